//! Brandes accumulation over unweighted shortest paths.
//!
//! Generic over any numeric field so that the exact rational case can be
//! checked against path enumeration without rounding.

use std::collections::VecDeque;

use num_traits::Num;

use crate::error::{Error, Result};
use crate::graph::Adjacency;

/// Largest graph accepted by the shortest-path routines.
pub const BETWEENNESS_NODE_LIMIT: usize = 500;

fn count<T: Num + Clone>(k: usize) -> T {
    let mut acc = T::zero();
    for _ in 0..k {
        acc = acc + T::one();
    }
    acc
}

/// Sum over ordered pairs `(s, t)` with `include(s, t)` of the fraction of
/// shortest `s`-`t` paths through each node, divided by `n (n - 1)`.
fn accumulate<T, F>(adj: &Adjacency, include: F) -> Result<Vec<T>>
where
    T: Num + Clone,
    F: Fn(usize, usize) -> bool,
{
    let n = adj.node_count();
    if n > BETWEENNESS_NODE_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "shortest-path betweenness is limited to {BETWEENNESS_NODE_LIMIT} nodes, graph has {n}"
        )));
    }
    let mut score = vec![T::zero(); n];
    if n < 3 {
        return Ok(score);
    }
    let mut dist = vec![usize::MAX; n];
    let mut sigma = vec![T::zero(); n];
    let mut delta = vec![T::zero(); n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::with_capacity(n);
    for s in 0..n {
        dist.fill(usize::MAX);
        sigma.fill(T::zero());
        delta.fill(T::zero());
        order.clear();
        dist[s] = 0;
        sigma[s] = T::one();
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in adj.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] = sigma[w].clone() + sigma[v].clone();
                }
            }
        }
        // Predecessors of w are the neighbours one step closer to s.
        for &w in order.iter().rev() {
            let target = if include(s, w) { T::one() } else { T::zero() };
            let coeff = (target + delta[w].clone()) / sigma[w].clone();
            for &v in adj.neighbors(w) {
                if dist[v] != usize::MAX && dist[v] + 1 == dist[w] {
                    delta[v] = delta[v].clone() + sigma[v].clone() * coeff.clone();
                }
            }
            if w != s {
                score[w] = score[w].clone() + delta[w].clone();
            }
        }
    }
    let norm = count::<T>(n) * count::<T>(n - 1);
    Ok(score.into_iter().map(|b| b / norm.clone()).collect())
}

/// Fraction of shortest paths between ordered node pairs passing through
/// each node, normalized by `n (n - 1)`. Disconnected pairs contribute zero.
pub fn betweenness_centrality<T: Num + Clone>(adj: &Adjacency) -> Result<Vec<T>> {
    accumulate(adj, |_, _| true)
}

/// Betweenness restricted to pairs whose labels differ.
pub fn shortest_path_cbc<T: Num + Clone>(adj: &Adjacency, labels: &[usize]) -> Result<Vec<T>> {
    if labels.len() != adj.node_count() {
        return Err(Error::Validation(format!(
            "{} labels for {} nodes",
            labels.len(),
            adj.node_count()
        )));
    }
    accumulate(adj, |s, t| labels[s] != labels[t])
}
