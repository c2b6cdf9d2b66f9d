//! Balanced stochastic block model with Gaussian class-conditional features.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Adjacency, Graph, Split};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::rng_for;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub n: usize,
    pub num_classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Euclidean distance between any two class means.
    pub feature_shift: f64,
    pub seed: u64,
    /// Per-class fraction of nodes placed in the train split.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
}

fn default_train_fraction() -> f64 {
    0.4
}

fn default_val_fraction() -> f64 {
    0.1
}

impl SbmConfig {
    pub fn new(
        n: usize,
        num_classes: usize,
        p_in: f64,
        p_out: f64,
        feature_dim: usize,
        feature_shift: f64,
        seed: u64,
    ) -> Self {
        Self {
            n,
            num_classes,
            p_in,
            p_out,
            feature_dim,
            feature_shift,
            seed,
            train_fraction: default_train_fraction(),
            val_fraction: default_val_fraction(),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) {
            return bad("p_in and p_out must lie in [0, 1]");
        }
        if self.p_out > self.p_in {
            return bad("p_out must not exceed p_in");
        }
        if self.num_classes == 0 || self.n % self.num_classes != 0 {
            return bad("n must be a positive multiple of num_classes");
        }
        if self.feature_dim < self.num_classes {
            return bad("feature_dim must be at least num_classes");
        }
        let (tr, va) = (self.train_fraction, self.val_fraction);
        if !(0.0..=1.0).contains(&tr) || !(0.0..=1.0).contains(&va) || tr + va > 1.0 {
            return bad("split fractions must be in [0, 1] and sum to at most 1");
        }
        Ok(())
    }
}

/// Calls `hit` for each index of `range` kept by independent
/// Bernoulli(`p`) trials, jumping over misses with geometric gaps.
fn bernoulli_hits(
    rng: &mut crate::rng::Rng,
    range: std::ops::Range<usize>,
    p: f64,
    mut hit: impl FnMut(usize),
) {
    if p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        range.for_each(hit);
        return;
    }
    let log_miss = (1.0 - p).ln();
    let mut next = range.start;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let gap = (u.ln() / log_miss).floor();
        if !(gap < (range.end - next) as f64) {
            return;
        }
        next += gap as usize;
        hit(next);
        next += 1;
    }
}

/// Generates a balanced SBM. Node `i` belongs to class `i / (n / C)`. Class
/// `c` has feature mean `(shift / sqrt 2) * e_c` plus unit Gaussian noise.
/// Splits are stratified per class.
pub fn generate_sbm<T: Scalar>(cfg: &SbmConfig) -> Result<Graph<T>> {
    cfg.validate()?;
    let n = cfg.n;
    let c = cfg.num_classes;
    let block = n / c;
    let labels: Vec<usize> = (0..n).map(|i| i / block).collect();

    let mut rng = rng_for(cfg.seed, "sbm/edges");
    let mut edges = Vec::new();
    for u in 0..n {
        let block_end = (labels[u] + 1) * block;
        bernoulli_hits(&mut rng, u + 1..block_end, cfg.p_in, |v| edges.push((u, v)));
        bernoulli_hits(&mut rng, block_end..n, cfg.p_out, |v| edges.push((u, v)));
    }
    let (adjacency, _) = Adjacency::from_edges(n, &edges)?;

    let mut rng = rng_for(cfg.seed, "sbm/features");
    let offset = cfg.feature_shift / std::f64::consts::SQRT_2;
    let d = cfg.feature_dim;
    let mut data = Vec::with_capacity(n * d);
    for &y in &labels {
        for k in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            let mean = if k == y { offset } else { 0.0 };
            data.push(T::of(mean + z));
        }
    }
    let features = DenseMatrix::from_vec(n, d, data)?;

    let mut rng = rng_for(cfg.seed, "sbm/splits");
    let mut splits = vec![Split::Test; n];
    let n_train = (cfg.train_fraction * block as f64).round() as usize;
    let n_val = ((cfg.val_fraction * block as f64).round() as usize).min(block - n_train);
    for class in 0..c {
        let mut members: Vec<usize> = (class * block..(class + 1) * block).collect();
        members.shuffle(&mut rng);
        for (k, &i) in members.iter().enumerate() {
            splits[i] = if k < n_train {
                Split::Train
            } else if k < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }

    Graph::new(adjacency, features, c, Some(labels), None, splits)
}
