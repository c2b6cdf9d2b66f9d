mod cbc;
mod corrupt;
mod experiment;
mod gen;
mod sweep;
mod train;

use std::path::Path;

use tss_core::graph::{load_graph, load_labels, GraphPaths};
use tss_core::Graph;

use crate::args::{Command, GraphArgs};
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Gen(a) => gen::run(a),
        Command::Corrupt(a) => corrupt::run(a),
        Command::Cbc(a) => cbc::run(a),
        Command::Train(a) => train::run(a),
        Command::Sweep(a) => sweep::run(a),
    }
}

/// A loaded graph plus the labels to train on.
pub struct Loaded {
    pub graph: Graph,
    pub labels: Vec<usize>,
    pub edges_digest: String,
}

/// Hashes the graph files (and label override) into the manifest.
pub fn hash_inputs<C: serde::Serialize>(args: &GraphArgs, manifest: &mut Manifest<'_, C>) -> CliResult<String> {
    if !args.graph.is_dir() {
        return Err(CliError::input(format!("graph directory {} not found", args.graph.display())));
    }
    let paths = GraphPaths::in_dir(&args.graph);
    let edges = manifest.input("edges", &paths.edges)?;
    manifest.input("features", &paths.features)?;
    manifest.input("labels", &paths.labels)?;
    manifest.input("splits", &paths.splits)?;
    if let Some(l) = &args.labels {
        manifest.input("train_labels", l)?;
    }
    Ok(edges)
}

pub fn load(args: &GraphArgs, edges_digest: String) -> CliResult<Loaded> {
    let graph: Graph = load_graph(&GraphPaths::in_dir(&args.graph), args.classes)?;
    let labels = match &args.labels {
        Some(path) => read_labels(path, &graph)?,
        None => graph.clean_labels().expect("loaded graphs carry labels").to_vec(),
    };
    Ok(Loaded {
        graph,
        labels,
        edges_digest,
    })
}

fn read_labels(path: &Path, graph: &Graph) -> CliResult<Vec<usize>> {
    let labels = load_labels(path)?;
    if labels.len() != graph.node_count() {
        return Err(CliError::input(format!(
            "{} has {} labels for {} nodes",
            path.display(),
            labels.len(),
            graph.node_count()
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= graph.num_classes()) {
        return Err(CliError::input(format!(
            "{}: label {y} outside 0..{}",
            path.display(),
            graph.num_classes()
        )));
    }
    Ok(labels)
}
