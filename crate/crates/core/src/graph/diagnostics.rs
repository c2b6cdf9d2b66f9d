//! Structural diagnostics: homophily, class-boundary tags and heterophilous
//! edge injection.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Adjacency, Graph};
use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::scalar::Scalar;

fn check_len(adj: &Adjacency, labels: &[usize]) -> Result<()> {
    if labels.len() != adj.node_count() {
        return Err(Error::Validation(format!(
            "{} labels for {} nodes",
            labels.len(),
            adj.node_count()
        )));
    }
    Ok(())
}

/// Fraction of undirected edges whose endpoints share a label.
pub fn edge_homophily(adj: &Adjacency, labels: &[usize]) -> Result<f64> {
    check_len(adj, labels)?;
    let (mut same, mut total) = (0usize, 0usize);
    for (u, v) in adj.edges() {
        total += 1;
        same += usize::from(labels[u] == labels[v]);
    }
    if total == 0 {
        return Err(Error::Undefined("edge homophily of an edgeless graph".into()));
    }
    Ok(same as f64 / total as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Far,
    Near,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Far => "far",
            BoundaryTag::Near => "near",
        }
    }
}

/// Tags a node `far` when every node within two hops carries its label.
/// Isolated nodes are `far`.
pub fn classify_boundary(adj: &Adjacency, labels: &[usize]) -> Result<Vec<BoundaryTag>> {
    check_len(adj, labels)?;
    let tags = (0..adj.node_count())
        .map(|u| {
            let y = labels[u];
            let mixed = adj.neighbors(u).iter().any(|&v| {
                labels[v] != y || adj.neighbors(v).iter().any(|&w| labels[w] != y)
            });
            if mixed {
                BoundaryTag::Near
            } else {
                BoundaryTag::Far
            }
        })
        .collect();
    Ok(tags)
}

/// Adds `count` new edges drawn uniformly from the node pairs that carry
/// different clean labels and are not yet connected.
pub fn inject_heterophilous_edges<T: Scalar>(
    graph: &Graph<T>,
    count: usize,
    seed: u64,
) -> Result<Graph<T>> {
    let labels = graph
        .clean_labels()
        .ok_or_else(|| Error::Validation("heterophilous injection needs clean labels".into()))?;
    if count == 0 {
        return Ok(graph.clone());
    }
    let adj = graph.adjacency();
    let n = graph.node_count();

    let mut class_sizes = vec![0usize; graph.num_classes()];
    for &y in labels {
        class_sizes[y] += 1;
    }
    let same_pairs: usize = class_sizes.iter().map(|&s| s * s.saturating_sub(1) / 2).sum();
    let cross_pairs = n * n.saturating_sub(1) / 2 - same_pairs;
    let cross_edges = adj.edges().filter(|&(u, v)| labels[u] != labels[v]).count();
    let available = cross_pairs - cross_edges;
    if count > available {
        return Err(Error::Saturated {
            requested: count,
            added: 0,
        });
    }

    let mut rng = rng_for(seed, "graph/heterophilous-edges");
    let mut added: Vec<(usize, usize)> = Vec::with_capacity(count);
    if count * 2 > available {
        // Dense regime: enumerate the candidates and sample indices.
        let candidates: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| labels[u] != labels[v] && !adj.has_edge(u, v))
            .collect();
        let mut picked = index::sample(&mut rng, candidates.len(), count).into_vec();
        picked.sort_unstable();
        added.extend(picked.into_iter().map(|k| candidates[k]));
    } else {
        let mut seen = HashSet::with_capacity(count);
        while added.len() < count {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            let (u, v) = (u.min(v), u.max(v));
            if labels[u] == labels[v] || adj.has_edge(u, v) || !seen.insert((u, v)) {
                continue;
            }
            added.push((u, v));
        }
    }

    let mut edges: Vec<(usize, usize)> = adj.edges().collect();
    edges.extend(added);
    let (new_adj, _) = Adjacency::from_edges(n, &edges)?;
    graph.with_adjacency(new_adj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::test_graphs::{bare, path};
    use crate::graph::{generate_sbm, SbmConfig, Split};
    use crate::linalg::DenseMatrix;
    use proptest::prelude::*;

    fn labeled(n: usize, edges: &[(usize, usize)], labels: Vec<usize>) -> Graph<f64> {
        let (adj, _) = Adjacency::from_edges(n, edges).unwrap();
        let c = labels.iter().max().unwrap() + 1;
        Graph::new(
            adj,
            DenseMatrix::identity(n),
            c,
            Some(labels),
            None,
            vec![Split::Train; n],
        )
        .unwrap()
    }

    #[test]
    fn homophily_extremes() {
        let g = bare::<f64>(4, &path(4));
        assert_eq!(edge_homophily(g.adjacency(), &[1, 1, 1, 1]).unwrap(), 1.0);
        let p2 = bare::<f64>(2, &[(0, 1)]);
        assert_eq!(edge_homophily(p2.adjacency(), &[0, 1]).unwrap(), 0.0);
        assert!(edge_homophily(p2.adjacency(), &[0]).is_err());
    }

    #[test]
    fn homophily_matches_balanced_sbm_expectation() {
        let (p_in, p_out, c) = (0.1, 0.01, 3.0);
        let expected = p_in / (p_in + (c - 1.0) * p_out);
        let mut total = 0.0;
        for seed in 0..5 {
            let g: Graph<f64> =
                generate_sbm(&SbmConfig::new(600, 3, p_in, p_out, 3, 1.0, seed)).unwrap();
            total += edge_homophily(g.adjacency(), g.clean_labels().unwrap()).unwrap();
        }
        let mean = total / 5.0;
        assert!((mean - expected).abs() < 0.05, "{mean} vs {expected}");
    }

    #[test]
    fn boundary_tags() {
        let g = bare::<f64>(3, &path(3));
        let tags = classify_boundary(g.adjacency(), &[0, 0, 1]).unwrap();
        assert_eq!(tags, vec![BoundaryTag::Near; 3]);
        let tags = classify_boundary(g.adjacency(), &[2, 2, 2]).unwrap();
        assert_eq!(tags, vec![BoundaryTag::Far; 3]);

        // 0-1-2-3 with labels 0,0,0,1: node 0 sees {1,2}, both class 0.
        let g = bare::<f64>(5, &path(4));
        let tags = classify_boundary(g.adjacency(), &[0, 0, 0, 1, 1]).unwrap();
        use BoundaryTag::*;
        assert_eq!(tags, vec![Far, Near, Near, Near, Far]);
    }

    #[test]
    fn injection_zero_and_saturation() {
        let g = labeled(4, &path(4), vec![0, 0, 1, 1]);
        assert_eq!(inject_heterophilous_edges(&g, 0, 1).unwrap(), g);
        let uniform = labeled(3, &path(3), vec![0, 0, 0]);
        assert!(matches!(
            inject_heterophilous_edges(&uniform, 1, 1).unwrap_err(),
            Error::Saturated { .. }
        ));
        // 4 cross pairs exist, one is already an edge.
        let full = inject_heterophilous_edges(&g, 3, 1).unwrap();
        assert_eq!(full.adjacency().edge_count(), 6);
        assert!(inject_heterophilous_edges(&g, 4, 1).is_err());
    }

    #[test]
    fn injection_lowers_homophily() {
        let g: Graph<f64> = generate_sbm(&SbmConfig::new(300, 3, 0.1, 0.01, 3, 1.0, 2)).unwrap();
        let labels = g.clean_labels().unwrap();
        let before = edge_homophily(g.adjacency(), labels).unwrap();
        let h = inject_heterophilous_edges(&g, 100, 5).unwrap();
        let after = edge_homophily(h.adjacency(), labels).unwrap();
        assert!(after < before);
        assert_eq!(h.adjacency().edge_count(), g.adjacency().edge_count() + 100);
    }

    proptest! {
        #[test]
        fn injection_adds_only_new_cross_edges(seed in 0u64..1000, count in 0usize..40) {
            let g: Graph<f64> =
                generate_sbm(&SbmConfig::new(30, 3, 0.3, 0.05, 3, 1.0, seed)).unwrap();
            let labels = g.clean_labels().unwrap();
            let h = inject_heterophilous_edges(&g, count, seed).unwrap();
            prop_assert_eq!(h.adjacency().edge_count(), g.adjacency().edge_count() + count);
            for (u, v) in h.adjacency().edges() {
                if !g.adjacency().has_edge(u, v) {
                    prop_assert_ne!(labels[u], labels[v]);
                }
            }
        }

        #[test]
        fn boundary_tags_invariant_under_relabeling(seed in 0u64..1000, shift in 1usize..3) {
            let g: Graph<f64> =
                generate_sbm(&SbmConfig::new(30, 3, 0.2, 0.02, 3, 1.0, seed)).unwrap();
            let labels = g.clean_labels().unwrap();
            let permuted: Vec<usize> = labels.iter().map(|&y| (y + shift) % 3).collect();
            prop_assert_eq!(
                classify_boundary(g.adjacency(), labels).unwrap(),
                classify_boundary(g.adjacency(), &permuted).unwrap()
            );
        }
    }
}
