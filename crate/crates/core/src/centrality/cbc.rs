//! Class-conditional betweenness over a PPR matrix:
//!
//! `Cb_i = 1 / (m (m - 1)) * sum pi[u][i] * pi[i][v] / pi[u][v]`
//!
//! over ordered pairs `(u, v)` from the node set with `u != v`, `u != i`,
//! `v != i` and differing noisy labels, where `m` is the node-set size.

use std::collections::HashSet;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ppr::PprMatrix;
use crate::rng::rng_for;
use crate::scalar::Scalar;

pub const DEFAULT_EPSILON: f64 = 1e-12;
pub const DEFAULT_PAIR_BUDGET: usize = 2_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CbcConfig {
    /// Pairs with `pi[u][v] < epsilon` are skipped.
    pub epsilon: f64,
    /// Subsample pairs when more than this many are eligible; `None` is
    /// always exact.
    pub pair_budget: Option<usize>,
    pub seed: u64,
}

impl Default for CbcConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            pair_budget: Some(DEFAULT_PAIR_BUDGET),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CbcScores<T> {
    /// One score per graph node; nodes outside `node_set` score zero.
    pub scores: Vec<T>,
    pub node_set: Vec<usize>,
    /// Eligible ordered pairs (distinct nodes, differing labels).
    pub eligible_pairs: usize,
    /// Pairs that entered the sum.
    pub pair_count: usize,
    /// Pairs dropped by the epsilon floor.
    pub skipped_pairs: usize,
    pub epsilon: T,
    /// Number of sampled pairs when subsampling, `None` when exact.
    pub sampled_pairs: Option<usize>,
}

impl<T: Scalar> CbcScores<T> {
    pub fn scores_of(&self, ids: &[usize]) -> Vec<T> {
        ids.iter().map(|&i| self.scores[i]).collect()
    }
}

pub fn cbc_scores<T: Scalar>(
    ppr: &PprMatrix<T>,
    labels: &[usize],
    node_set: &[usize],
    cfg: &CbcConfig,
) -> Result<CbcScores<T>> {
    let n = ppr.node_count();
    if node_set.is_empty() {
        return Err(Error::InvalidParameter("CBC node set is empty".into()));
    }
    if labels.len() != n {
        return Err(Error::Validation(format!(
            "{} labels for a {n}-node PPR matrix",
            labels.len()
        )));
    }
    if !(cfg.epsilon > 0.0) {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    let mut seen = vec![false; n];
    for &u in node_set {
        if u >= n || std::mem::replace(&mut seen[u], true) {
            return Err(Error::InvalidParameter(format!(
                "node set entry {u} is out of range or repeated"
            )));
        }
    }

    let m = node_set.len();
    let eps = T::of(cfg.epsilon);
    let set_labels: Vec<usize> = node_set.iter().map(|&u| labels[u]).collect();
    let mut class_counts = std::collections::BTreeMap::new();
    for &y in &set_labels {
        *class_counts.entry(y).or_insert(0usize) += 1;
    }
    let same: usize = class_counts.values().map(|&c| c * (c - 1)).sum();
    let eligible = m * (m - 1) - same;

    let mut out = CbcScores {
        scores: vec![T::zero(); n],
        node_set: node_set.to_vec(),
        eligible_pairs: eligible,
        pair_count: 0,
        skipped_pairs: 0,
        epsilon: eps,
        sampled_pairs: None,
    };
    if eligible == 0 {
        log::warn!("all {m} nodes in the CBC node set share one label; scores are zero");
        return Ok(out);
    }
    let norm = T::one() / (T::of_usize(m) * T::of_usize(m - 1));

    match cfg.pair_budget {
        Some(budget) if budget < eligible => {
            let pairs = sample_pairs(&set_labels, eligible, budget, cfg.seed);
            let mut kept = Vec::with_capacity(pairs.len());
            for &(a, b) in &pairs {
                let puv = ppr.get(node_set[a], node_set[b]);
                if puv < eps {
                    out.skipped_pairs += 1;
                } else {
                    kept.push((node_set[a], node_set[b], T::one() / puv));
                }
            }
            out.pair_count = kept.len();
            out.sampled_pairs = Some(pairs.len());
            let scale = norm * T::of_usize(eligible) / T::of_usize(pairs.len());
            let scores: Vec<T> = node_set
                .par_iter()
                .map(|&i| {
                    let mut acc = T::zero();
                    for &(u, v, inv) in &kept {
                        if u != i && v != i {
                            acc += ppr.get(u, i) * ppr.get(i, v) * inv;
                        }
                    }
                    acc * scale
                })
                .collect();
            for (&i, s) in node_set.iter().zip(scores) {
                out.scores[i] = s;
            }
        }
        _ => {
            // inv[a][b] = 1 / pi[u][v] for summed pairs, zero otherwise.
            let mut inv = vec![T::zero(); m * m];
            for a in 0..m {
                for b in 0..m {
                    if a == b || set_labels[a] == set_labels[b] {
                        continue;
                    }
                    let puv = ppr.get(node_set[a], node_set[b]);
                    if puv < eps {
                        out.skipped_pairs += 1;
                    } else {
                        inv[a * m + b] = T::one() / puv;
                        out.pair_count += 1;
                    }
                }
            }
            let scores: Vec<T> = (0..m)
                .into_par_iter()
                .map(|ii| {
                    let i = node_set[ii];
                    let out_row: Vec<T> = node_set.iter().map(|&v| ppr.get(i, v)).collect();
                    let mut acc = T::zero();
                    for a in 0..m {
                        if a == ii {
                            continue;
                        }
                        let inv_row = &inv[a * m..(a + 1) * m];
                        let mut inner = T::zero();
                        for (b, (&w, &piv)) in inv_row.iter().zip(&out_row).enumerate() {
                            if b != ii {
                                inner += w * piv;
                            }
                        }
                        acc += ppr.get(node_set[a], i) * inner;
                    }
                    acc * norm
                })
                .collect();
            for (&i, s) in node_set.iter().zip(scores) {
                out.scores[i] = s;
            }
        }
    }
    Ok(out)
}

/// Uniform sample without replacement of `budget` eligible ordered pairs
/// (as node-set positions), returned sorted.
fn sample_pairs(labels: &[usize], eligible: usize, budget: usize, seed: u64) -> Vec<(usize, usize)> {
    let m = labels.len();
    let mut rng = rng_for(seed, "cbc/pairs");
    if budget * 2 > eligible {
        let all: Vec<(usize, usize)> = (0..m)
            .flat_map(|a| (0..m).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b && labels[a] != labels[b])
            .collect();
        let mut idx = rand::seq::index::sample(&mut rng, all.len(), budget).into_vec();
        idx.sort_unstable();
        return idx.into_iter().map(|k| all[k]).collect();
    }
    let mut picked = HashSet::with_capacity(budget);
    while picked.len() < budget {
        let a = rng.random_range(0..m);
        let b = rng.random_range(0..m);
        if a != b && labels[a] != labels[b] {
            picked.insert((a, b));
        }
    }
    let mut pairs: Vec<(usize, usize)> = picked.into_iter().collect();
    pairs.sort_unstable();
    pairs
}
