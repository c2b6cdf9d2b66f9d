//! Plain-text graph files.
//!
//! * edges: `<u> <v>` per line, 0-indexed. Reversed and repeated pairs are
//!   merged, so a one-directional edge file is symmetrized silently.
//!   Self-loops are dropped with a warning.
//! * features: header `n d`, then `n` lines of `d` reals.
//! * labels: `n` lines, one class index each.
//! * splits: `n` lines of `0=train 1=val 2=test 3=none`.
//!
//! Blank lines and lines starting with `#` are ignored everywhere.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Adjacency, Graph, Split};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct GraphPaths {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub splits: PathBuf,
}

impl GraphPaths {
    /// Conventional file names inside a graph directory.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            edges: dir.join("edges.txt"),
            features: dir.join("features.txt"),
            labels: dir.join("labels.txt"),
            splits: dir.join("splits.txt"),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-empty, non-comment lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_field<F: std::str::FromStr>(path: &Path, line: usize, tok: &str) -> Result<F> {
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {tok:?}")))
}

fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = read(path)?;
    let mut edges = Vec::new();
    for (ln, line) in content_lines(&text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(path, ln, "expected `<u> <v>`"));
        }
        edges.push((
            parse_field(path, ln, toks[0])?,
            parse_field(path, ln, toks[1])?,
        ));
    }
    Ok(edges)
}

fn read_features<T: Scalar>(path: &Path) -> Result<DenseMatrix<T>> {
    let text = read(path)?;
    let mut lines = content_lines(&text);
    let (hl, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing `n d` header"))?;
    let hdr: Vec<&str> = header.split_whitespace().collect();
    if hdr.len() != 2 {
        return Err(parse_err(path, hl, "expected `n d` header"));
    }
    let n: usize = parse_field(path, hl, hdr[0])?;
    let d: usize = parse_field(path, hl, hdr[1])?;
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (ln, line) in lines {
        if rows == n {
            return Err(parse_err(path, ln, format!("more than {n} feature rows")));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = parse_field(path, ln, tok)?;
            data.push(T::of(v));
        }
        if data.len() - before != d {
            return Err(parse_err(
                path,
                ln,
                format!("expected {d} values, found {}", data.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(parse_err(
            path,
            text.lines().count(),
            format!("expected {n} feature rows, found {rows}"),
        ));
    }
    DenseMatrix::from_vec(n, d, data)
}

/// One class index per line.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = read(path)?;
    content_lines(&text)
        .map(|(ln, line)| parse_field(path, ln, line))
        .collect()
}

fn read_splits(path: &Path) -> Result<Vec<Split>> {
    let text = read(path)?;
    content_lines(&text)
        .map(|(ln, line)| {
            let code: u8 = parse_field(path, ln, line)?;
            Split::from_code(code)
                .ok_or_else(|| parse_err(path, ln, format!("split code {code} not in 0..=3")))
        })
        .collect()
}

/// Loads and validates a graph. `num_classes` defaults to `max(label) + 1`;
/// when given, any label at or above it is a validation error.
pub fn load_graph<T: Scalar>(paths: &GraphPaths, num_classes: Option<usize>) -> Result<Graph<T>> {
    let features = read_features::<T>(&paths.features)?;
    let n = features.rows();
    let edges = read_edges(&paths.edges)?;
    let (adjacency, self_loops) = Adjacency::from_edges(n, &edges)?;
    if self_loops > 0 {
        log::warn!(
            "{}: dropped {self_loops} self-loop(s)",
            paths.edges.display()
        );
    }
    let labels = load_labels(&paths.labels)?;
    if labels.len() != n {
        return Err(Error::Validation(format!(
            "{} has {} labels for {n} nodes",
            paths.labels.display(),
            labels.len()
        )));
    }
    let splits = read_splits(&paths.splits)?;
    if splits.len() != n {
        return Err(Error::Validation(format!(
            "{} has {} entries for {n} nodes",
            paths.splits.display(),
            splits.len()
        )));
    }
    let c = num_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    Graph::new(adjacency, features, c, Some(labels), None, splits)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::with_capacity(labels.len() * 3);
    for y in labels {
        writeln!(s, "{y}").unwrap();
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Writes the four files of `paths`. Clean labels are required.
pub fn write_graph<T: Scalar>(graph: &Graph<T>, paths: &GraphPaths) -> Result<()> {
    let labels = graph
        .clean_labels()
        .ok_or_else(|| Error::Validation("graph has no clean labels to write".into()))?;

    let mut s = String::new();
    for (u, v) in graph.adjacency().edges() {
        writeln!(s, "{u} {v}").unwrap();
    }
    fs::write(&paths.edges, s).map_err(|e| Error::io(&paths.edges, e))?;

    let x = graph.features();
    let mut s = format!("{} {}\n", x.rows(), x.cols());
    for i in 0..x.rows() {
        let row: Vec<String> = x.row(i).iter().map(|v| v.to_string()).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    fs::write(&paths.features, s).map_err(|e| Error::io(&paths.features, e))?;

    write_labels(&paths.labels, labels)?;

    let mut s = String::with_capacity(graph.node_count() * 2);
    for sp in graph.splits() {
        writeln!(s, "{}", sp.code()).unwrap();
    }
    fs::write(&paths.splits, s).map_err(|e| Error::io(&paths.splits, e))
}
