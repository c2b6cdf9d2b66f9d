//! Undirected graph with node features, labels and data splits.

mod diagnostics;
mod io;
mod sbm;

pub use diagnostics::{
    classify_boundary, edge_homophily, inject_heterophilous_edges, BoundaryTag,
};
pub use io::{load_graph, load_labels, write_graph, write_labels, GraphPaths};
pub use sbm::{generate_sbm, SbmConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, DenseMatrix};
use crate::scalar::Scalar;

/// Per-node data split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    None,
}

impl Split {
    pub fn code(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
            Split::None => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Split::Train,
            1 => Split::Val,
            2 => Split::Test,
            3 => Split::None,
            _ => return None,
        })
    }
}

/// Symmetric unweighted adjacency in CSR form. Neighbour lists are sorted,
/// duplicate-free and never contain the row itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency {
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl Adjacency {
    /// Builds a symmetric adjacency from an edge list. Reversed and repeated
    /// edges collapse to one undirected edge. Returns the number of dropped
    /// self-loops alongside the adjacency.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<(Self, usize)> {
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut self_loops = 0;
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if u == v {
                self_loops += 1;
                continue;
            }
            lists[u].push(v);
            lists[v].push(u);
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for mut l in lists {
            l.sort_unstable();
            l.dedup();
            indices.extend(l);
            indptr.push(indices.len());
        }
        Ok((Self { indptr, indices }, self_loops))
    }

    pub fn empty(n: usize) -> Self {
        Self {
            indptr: vec![0; n + 1],
            indices: Vec::new(),
        }
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.indptr.len() - 1
    }

    /// Number of undirected edges.
    #[inline]
    pub fn edge_count(&self) -> usize {
        self.indices.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.indices[self.indptr[u]..self.indptr[u + 1]]
    }

    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.indptr[u + 1] - self.indptr[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Undirected edges `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    fn check_symmetric(&self) -> Result<()> {
        for u in 0..self.node_count() {
            for &v in self.neighbors(u) {
                if v == u {
                    return Err(Error::Validation(format!("self-loop stored at node {u}")));
                }
                if !self.has_edge(v, u) {
                    return Err(Error::Validation(format!(
                        "edge ({u}, {v}) stored without its reverse"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Node-classification graph. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph<T> {
    adjacency: Adjacency,
    features: DenseMatrix<T>,
    num_classes: usize,
    clean_labels: Option<Vec<usize>>,
    noisy_labels: Option<Vec<usize>>,
    splits: Vec<Split>,
}

impl<T: Scalar> Graph<T> {
    pub fn new(
        adjacency: Adjacency,
        features: DenseMatrix<T>,
        num_classes: usize,
        clean_labels: Option<Vec<usize>>,
        noisy_labels: Option<Vec<usize>>,
        splits: Vec<Split>,
    ) -> Result<Self> {
        let n = adjacency.node_count();
        adjacency.check_symmetric()?;
        if features.rows() != n {
            return Err(Error::Validation(format!(
                "feature matrix has {} rows for {n} nodes",
                features.rows()
            )));
        }
        if splits.len() != n {
            return Err(Error::Validation(format!(
                "{} split entries for {n} nodes",
                splits.len()
            )));
        }
        for (name, labels) in [("clean", &clean_labels), ("noisy", &noisy_labels)] {
            if let Some(l) = labels {
                if l.len() != n {
                    return Err(Error::Validation(format!(
                        "{name} label vector has length {} for {n} nodes",
                        l.len()
                    )));
                }
                if let Some((i, &y)) = l.iter().enumerate().find(|(_, &y)| y >= num_classes) {
                    return Err(Error::Validation(format!(
                        "{name} label {y} of node {i} is not below num_classes={num_classes}"
                    )));
                }
            }
        }
        Ok(Self {
            adjacency,
            features,
            num_classes,
            clean_labels,
            noisy_labels,
            splits,
        })
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.adjacency.node_count()
    }

    #[inline]
    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    #[inline]
    pub fn features(&self) -> &DenseMatrix<T> {
        &self.features
    }

    pub fn clean_labels(&self) -> Option<&[usize]> {
        self.clean_labels.as_deref()
    }

    pub fn noisy_labels(&self) -> Option<&[usize]> {
        self.noisy_labels.as_deref()
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn mask(&self, split: Split) -> Vec<bool> {
        self.splits.iter().map(|&s| s == split).collect()
    }

    /// Node ids assigned to `split`, ascending.
    pub fn ids(&self, split: Split) -> Vec<usize> {
        self.splits
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn with_noisy_labels(mut self, noisy: Vec<usize>) -> Result<Self> {
        let clean = self.clean_labels.take();
        Self::new(
            self.adjacency,
            self.features,
            self.num_classes,
            clean,
            Some(noisy),
            self.splits,
        )
    }

    pub fn with_splits(mut self, splits: Vec<Split>) -> Result<Self> {
        let (clean, noisy) = (self.clean_labels.take(), self.noisy_labels.take());
        Self::new(
            self.adjacency,
            self.features,
            self.num_classes,
            clean,
            noisy,
            splits,
        )
    }

    pub(crate) fn with_adjacency(&self, adjacency: Adjacency) -> Result<Self> {
        Self::new(
            adjacency,
            self.features.clone(),
            self.num_classes,
            self.clean_labels.clone(),
            self.noisy_labels.clone(),
            self.splits.clone(),
        )
    }
}

/// `D^{-1/2} (A + sI) D^{-1/2}` where `D` is the degree matrix of `A + sI`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency<T> {
    pub matrix: CsrMatrix<T>,
    pub self_loops: bool,
}

impl<T: Scalar> NormalizedAdjacency<T> {
    #[inline]
    pub fn node_count(&self) -> usize {
        self.matrix.n_rows()
    }
}

/// Symmetrically normalized adjacency. Degree-zero nodes get an all-zero
/// row without self-loops and a unit diagonal with them.
pub fn normalized_adjacency<T: Scalar>(
    adjacency: &Adjacency,
    with_self_loops: bool,
) -> NormalizedAdjacency<T> {
    let n = adjacency.node_count();
    let s = usize::from(with_self_loops);
    let inv_sqrt: Vec<T> = (0..n)
        .map(|u| {
            let d = adjacency.degree(u) + s;
            if d == 0 {
                T::zero()
            } else {
                T::one() / T::of_usize(d).sqrt()
            }
        })
        .collect();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(adjacency.indices.len() + s * n);
    let mut values = Vec::with_capacity(indices.capacity());
    indptr.push(0);
    for u in 0..n {
        let nbrs = adjacency.neighbors(u);
        let split = nbrs.partition_point(|&v| v < u);
        let mut push = |v: usize| {
            indices.push(v);
            values.push(inv_sqrt[u] * inv_sqrt[v]);
        };
        nbrs[..split].iter().for_each(|&v| push(v));
        if with_self_loops {
            push(u);
        }
        nbrs[split..].iter().for_each(|&v| push(v));
        indptr.push(indices.len());
    }
    let matrix = CsrMatrix::from_parts(n, n, indptr, indices, values)
        .expect("normalized adjacency parts are consistent");
    NormalizedAdjacency {
        matrix,
        self_loops: with_self_loops,
    }
}
