//! Synthetic label noise: class-conditional (symmetric, pairflip) and
//! instance-dependent flips, plus an empirical audit.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Split};
use crate::linalg::DenseMatrix;
use crate::rng::rng_for;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Symmetric,
    Pairflip,
    Instance,
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(NoiseKind::Symmetric),
            "pairflip" => Ok(NoiseKind::Pairflip),
            "instance" => Ok(NoiseKind::Instance),
            other => Err(Error::InvalidParameter(format!(
                "unknown noise kind {other:?} (expected symmetric, pairflip or instance)"
            ))),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Symmetric => "symmetric",
            NoiseKind::Pairflip => "pairflip",
            NoiseKind::Instance => "instance",
        })
    }
}

/// Which nodes get corrupted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScope {
    Train,
    TrainVal,
    All,
}

impl NoiseScope {
    pub fn mask(self, splits: &[Split]) -> Vec<bool> {
        splits
            .iter()
            .map(|s| match self {
                NoiseScope::Train => *s == Split::Train,
                NoiseScope::TrainVal => matches!(s, Split::Train | Split::Val),
                NoiseScope::All => true,
            })
            .collect()
    }
}

impl FromStr for NoiseScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(NoiseScope::Train),
            "train_val" | "train-val" => Ok(NoiseScope::TrainVal),
            "all" => Ok(NoiseScope::All),
            other => Err(Error::InvalidParameter(format!(
                "unknown noise scope {other:?} (expected train, train_val or all)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rate: f64,
    pub seed: u64,
    #[serde(default = "default_scope")]
    pub scope: NoiseScope,
    /// Spread of the per-instance flip rates (instance noise only).
    #[serde(default = "default_instance_std")]
    pub instance_std: f64,
}

fn default_scope() -> NoiseScope {
    NoiseScope::Train
}

pub const DEFAULT_INSTANCE_STD: f64 = 0.1;

fn default_instance_std() -> f64 {
    DEFAULT_INSTANCE_STD
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, rate: f64, seed: u64) -> Self {
        Self {
            kind,
            rate,
            seed,
            scope: default_scope(),
            instance_std: DEFAULT_INSTANCE_STD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rate) {
            return Err(Error::InvalidParameter(format!(
                "noise rate must lie in [0, 1), got {}",
                self.rate
            )));
        }
        if self.kind == NoiseKind::Pairflip && self.rate >= 0.5 {
            return Err(Error::InvalidParameter(
                "pairflip rate must be below 0.5".into(),
            ));
        }
        if !(self.instance_std >= 0.0) {
            return Err(Error::InvalidParameter("instance_std must be >= 0".into()));
        }
        Ok(())
    }
}

/// Row-stochastic `T[a][b] = P(noisy = b | clean = a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    rows: Vec<Vec<f64>>,
}

impl TransitionMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let c = rows.len();
        for (a, r) in rows.iter().enumerate() {
            if r.len() != c {
                return Err(Error::Shape(format!("row {a} has {} entries, expected {c}", r.len())));
            }
            let sum: f64 = r.iter().sum();
            if r.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "row {a} is not a probability vector"
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn num_classes(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.rows[a]
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.rows[a][b]
    }
}

pub fn transition_matrix(kind: NoiseKind, rate: f64, num_classes: usize) -> Result<TransitionMatrix> {
    if num_classes < 2 {
        return Err(Error::InvalidParameter("need at least two classes".into()));
    }
    NoiseSpec::new(kind, rate, 0).validate()?;
    let c = num_classes;
    let rows = match kind {
        NoiseKind::Symmetric => (0..c)
            .map(|a| {
                (0..c)
                    .map(|b| if a == b { 1.0 - rate } else { rate / (c - 1) as f64 })
                    .collect()
            })
            .collect(),
        NoiseKind::Pairflip => (0..c)
            .map(|a| {
                let mut row = vec![0.0; c];
                row[a] = 1.0 - rate;
                row[(a + 1) % c] += rate;
                row
            })
            .collect(),
        NoiseKind::Instance => {
            return Err(Error::InvalidParameter(
                "instance noise has no single transition matrix; use instance_noise".into(),
            ))
        }
    };
    TransitionMatrix::from_rows(rows)
}

fn sample_categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // u landed in the rounding slack above the last positive entry
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Resamples each in-scope label from its row of `matrix`. One uniform draw
/// per in-scope node, in node order.
pub fn apply_class_noise(
    labels: &[usize],
    matrix: &TransitionMatrix,
    scope: &[bool],
    seed: u64,
) -> Result<Vec<usize>> {
    check_scope(labels, scope, matrix.num_classes())?;
    let mut rng = rng_for(seed, "noise/class");
    Ok(labels
        .iter()
        .zip(scope)
        .map(|(&y, &in_scope)| {
            if in_scope {
                sample_categorical(matrix.row(y), rng.random())
            } else {
                y
            }
        })
        .collect())
}

fn check_scope(labels: &[usize], scope: &[bool], c: usize) -> Result<()> {
    if scope.len() != labels.len() {
        return Err(Error::Shape(format!(
            "scope mask has {} entries for {} labels",
            scope.len(),
            labels.len()
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::Validation(format!("label {y} outside 0..{c}")));
    }
    Ok(())
}

/// Part-dependent generator: per-instance flip rates `q_i` from a normal
/// with mean `rate` and std `std` truncated to `[0, 1]`, one Gaussian
/// projection `W_c` (d x C) per class, and flip targets drawn from
/// `softmax(x_i W_y)` restricted to the wrong classes.
pub struct InstanceNoiseModel {
    num_classes: usize,
    dim: usize,
    /// `num_classes` blocks of `dim x num_classes`, row-major.
    projections: Vec<f64>,
}

impl InstanceNoiseModel {
    pub fn new(dim: usize, num_classes: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, "noise/instance/projection");
        let projections = (0..num_classes * dim * num_classes)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Self {
            num_classes,
            dim,
            projections,
        }
    }

    /// Probability of each noisy label for an instance with features `x`,
    /// clean label `y` and flip rate `q`. Entry `y` is `1 - q`.
    pub fn flip_distribution<T: Scalar>(&self, x: &[T], y: usize, q: f64) -> Vec<f64> {
        let c = self.num_classes;
        let block = &self.projections[y * self.dim * c..(y + 1) * self.dim * c];
        let mut logits = vec![0.0; c];
        for (k, &xk) in x.iter().enumerate() {
            let xk = xk.as_f64();
            if xk == 0.0 {
                continue;
            }
            for (l, &w) in logits.iter_mut().zip(&block[k * c..(k + 1) * c]) {
                *l += xk * w;
            }
        }
        let max = logits
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != y)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logits
            .iter()
            .enumerate()
            .map(|(k, &v)| if k == y { 0.0 } else { (v - max).exp() })
            .collect();
        let z: f64 = probs.iter().sum();
        for p in &mut probs {
            *p *= q / z;
        }
        probs[y] = 1.0 - q;
        probs
    }
}

fn truncated_normal(rng: &mut crate::rng::Rng, mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        return mean.clamp(0.0, 1.0);
    }
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let v = mean + std * z;
        if (0.0..=1.0).contains(&v) {
            return v;
        }
    }
}

pub fn instance_noise<T: Scalar>(
    features: &DenseMatrix<T>,
    labels: &[usize],
    num_classes: usize,
    rate: f64,
    std: f64,
    scope: &[bool],
    seed: u64,
) -> Result<Vec<usize>> {
    NoiseSpec {
        instance_std: std,
        ..NoiseSpec::new(NoiseKind::Instance, rate, seed)
    }
    .validate()?;
    if num_classes < 2 {
        return Err(Error::InvalidParameter("need at least two classes".into()));
    }
    check_scope(labels, scope, num_classes)?;
    if features.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} feature rows for {} labels",
            features.rows(),
            labels.len()
        )));
    }
    let model = InstanceNoiseModel::new(features.cols(), num_classes, seed);
    let mut q_rng = rng_for(seed, "noise/instance/rates");
    let mut pick_rng = rng_for(seed, "noise/instance/pick");
    Ok(labels
        .iter()
        .zip(scope)
        .enumerate()
        .map(|(i, (&y, &in_scope))| {
            if !in_scope {
                return y;
            }
            let q = truncated_normal(&mut q_rng, rate, std);
            let probs = model.flip_distribution(features.row(i), y, q);
            sample_categorical(&probs, pick_rng.random())
        })
        .collect())
}

/// Corrupts `clean` on the graph's nodes according to `spec`.
pub fn corrupt_labels<T: Scalar>(graph: &Graph<T>, clean: &[usize], spec: &NoiseSpec) -> Result<Vec<usize>> {
    spec.validate()?;
    let c = graph.num_classes();
    let scope = spec.scope.mask(graph.splits());
    match spec.kind {
        NoiseKind::Instance => instance_noise(graph.features(), clean, c, spec.rate, spec.instance_std, &scope, spec.seed),
        kind => apply_class_noise(clean, &transition_matrix(kind, spec.rate, c)?, &scope, spec.seed),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseAudit {
    /// Row-normalized empirical `P(noisy = b | clean = a)`; rows of absent
    /// classes are zero.
    pub confusion: Vec<Vec<f64>>,
    pub counts: Vec<Vec<usize>>,
    pub flip_rate: f64,
    /// `None` for classes with no clean instances.
    pub per_class_flip_rate: Vec<Option<f64>>,
}

impl NoiseAudit {
    /// Largest entrywise gap to a transition matrix.
    pub fn max_deviation(&self, t: &TransitionMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, row) in self.confusion.iter().enumerate() {
            if self.counts[a].iter().sum::<usize>() == 0 {
                continue;
            }
            for (b, &p) in row.iter().enumerate() {
                worst = worst.max((p - t.get(a, b)).abs());
            }
        }
        worst
    }
}

pub fn noise_audit(clean: &[usize], noisy: &[usize], num_classes: usize) -> Result<NoiseAudit> {
    if clean.len() != noisy.len() {
        return Err(Error::Shape(format!(
            "{} clean vs {} noisy labels",
            clean.len(),
            noisy.len()
        )));
    }
    let c = num_classes;
    let mut counts = vec![vec![0usize; c]; c];
    for (&a, &b) in clean.iter().zip(noisy) {
        if a >= c || b >= c {
            return Err(Error::Validation(format!("label pair ({a}, {b}) outside 0..{c}")));
        }
        counts[a][b] += 1;
    }
    let mut flips = 0;
    let mut confusion = vec![vec![0.0; c]; c];
    let mut per_class = vec![None; c];
    for a in 0..c {
        let total: usize = counts[a].iter().sum();
        if total == 0 {
            continue;
        }
        for b in 0..c {
            confusion[a][b] = counts[a][b] as f64 / total as f64;
        }
        flips += total - counts[a][a];
        per_class[a] = Some((total - counts[a][a]) as f64 / total as f64);
    }
    let flip_rate = if clean.is_empty() {
        0.0
    } else {
        flips as f64 / clean.len() as f64
    };
    Ok(NoiseAudit {
        confusion,
        counts,
        flip_rate,
        per_class_flip_rate: per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_sbm, Graph, SbmConfig};
    use proptest::prelude::*;

    fn cycle_labels(n: usize, c: usize) -> Vec<usize> {
        (0..n).map(|i| i % c).collect()
    }

    #[test]
    fn symmetric_matrix() {
        let t = transition_matrix(NoiseKind::Symmetric, 0.4, 7).unwrap();
        for a in 0..7 {
            for b in 0..7 {
                let want = if a == b { 0.6 } else { 0.4 / 6.0 };
                assert!((t.get(a, b) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pairflip_matrix() {
        let t = transition_matrix(NoiseKind::Pairflip, 0.2, 6).unwrap();
        for a in 0..6 {
            assert_eq!(t.get(a, a), 0.8);
            assert_eq!(t.get(a, (a + 1) % 6), 0.2);
            assert_eq!(t.row(a).iter().filter(|&&p| p == 0.0).count(), 4);
        }
    }

    #[test]
    fn zero_rate_is_identity_and_errors() {
        for kind in [NoiseKind::Symmetric, NoiseKind::Pairflip] {
            let t = transition_matrix(kind, 0.0, 4).unwrap();
            for a in 0..4 {
                for b in 0..4 {
                    assert_eq!(t.get(a, b), if a == b { 1.0 } else { 0.0 });
                }
            }
        }
        assert!(transition_matrix(NoiseKind::Instance, 0.2, 4).is_err());
        assert!(transition_matrix(NoiseKind::Pairflip, 0.5, 4).is_err());
        assert!(transition_matrix(NoiseKind::Symmetric, 1.0, 4).is_err());
        assert!(transition_matrix(NoiseKind::Symmetric, 0.1, 1).is_err());
        assert!("bogus".parse::<NoiseKind>().is_err());
    }

    #[test]
    fn symmetric_flip_fraction_concentrates() {
        let labels = cycle_labels(10_000, 5);
        let t = transition_matrix(NoiseKind::Symmetric, 0.3, 5).unwrap();
        let noisy = apply_class_noise(&labels, &t, &vec![true; 10_000], 3).unwrap();
        let audit = noise_audit(&labels, &noisy, 5).unwrap();
        // 3 sigma of a binomial proportion at n = 1e4 is ~0.014.
        assert!((audit.flip_rate - 0.3).abs() < 0.015, "{}", audit.flip_rate);
    }

    #[test]
    fn pairflip_targets_next_class_only() {
        let labels = cycle_labels(5000, 4);
        let t = transition_matrix(NoiseKind::Pairflip, 0.2, 4).unwrap();
        let noisy = apply_class_noise(&labels, &t, &vec![true; 5000], 8).unwrap();
        for (&y, &z) in labels.iter().zip(&noisy) {
            assert!(z == y || z == (y + 1) % 4);
        }
        let audit = noise_audit(&labels, &noisy, 4).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                if b != a && b != (a + 1) % 4 {
                    assert_eq!(audit.counts[a][b], 0);
                }
            }
        }
    }

    #[test]
    fn out_of_scope_untouched() {
        let labels = cycle_labels(1000, 3);
        let scope: Vec<bool> = (0..1000).map(|i| i % 2 == 0).collect();
        let t = transition_matrix(NoiseKind::Symmetric, 0.6, 3).unwrap();
        let noisy = apply_class_noise(&labels, &t, &scope, 1).unwrap();
        for i in (1..1000).step_by(2) {
            assert_eq!(noisy[i], labels[i]);
        }
    }

    #[test]
    fn empirical_confusion_converges() {
        let labels = cycle_labels(100_000, 4);
        let t = transition_matrix(NoiseKind::Symmetric, 0.5, 4).unwrap();
        let noisy = apply_class_noise(&labels, &t, &vec![true; 100_000], 21).unwrap();
        let audit = noise_audit(&labels, &noisy, 4).unwrap();
        assert!(audit.max_deviation(&t) < 0.01, "{}", audit.max_deviation(&t));
    }

    #[test]
    fn audit_of_identical_labels() {
        let labels = cycle_labels(30, 3);
        let audit = noise_audit(&labels, &labels, 4).unwrap();
        assert_eq!(audit.flip_rate, 0.0);
        for a in 0..3 {
            assert_eq!(audit.confusion[a][a], 1.0);
        }
        assert_eq!(audit.per_class_flip_rate[3], None);
        assert!(noise_audit(&labels, &labels[1..], 3).is_err());
    }

    fn sbm_features(n: usize) -> Graph<f64> {
        generate_sbm(&SbmConfig::new(n, 4, 0.0, 0.0, 8, 3.0, 5)).unwrap()
    }

    #[test]
    fn instance_noise_hits_target_rate() {
        let g = sbm_features(10_000);
        let labels = g.clean_labels().unwrap();
        let noisy =
            instance_noise(g.features(), labels, 4, 0.3, 0.1, &vec![true; 10_000], 17).unwrap();
        let audit = noise_audit(labels, &noisy, 4).unwrap();
        assert!((audit.flip_rate - 0.3).abs() <= 0.03, "{}", audit.flip_rate);
    }

    #[test]
    fn instance_noise_zero_rate_zero_spread_is_identity() {
        let g = sbm_features(400);
        let labels = g.clean_labels().unwrap();
        let noisy = instance_noise(g.features(), labels, 4, 0.0, 0.0, &vec![true; 400], 2).unwrap();
        assert_eq!(noisy, labels);
    }

    #[test]
    fn identical_features_share_flip_distribution() {
        let model = InstanceNoiseModel::new(3, 4, 99);
        let x = [0.3, -1.2, 2.0];
        let a = model.flip_distribution(&x, 2, 0.4);
        let b = model.flip_distribution(&x, 2, 0.4);
        assert_eq!(a, b);
        assert_eq!(a[2], 0.6);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_ne!(a, model.flip_distribution(&x, 1, 0.4));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn identity_matrix_keeps_labels(labels in proptest::collection::vec(0usize..5, 1..200), seed: u64) {
            let t = transition_matrix(NoiseKind::Symmetric, 0.0, 5).unwrap();
            let scope = vec![true; labels.len()];
            prop_assert_eq!(apply_class_noise(&labels, &t, &scope, seed).unwrap(), labels);
        }

        #[test]
        fn instance_flips_only_to_other_classes(
            x in proptest::collection::vec(-3.0f64..3.0, 6),
            y in 0usize..4,
            q in 0.0f64..1.0,
            seed: u64,
        ) {
            let model = InstanceNoiseModel::new(6, 4, seed);
            let probs = model.flip_distribution(&x, y, q);
            prop_assert_eq!(probs[y], 1.0 - q);
            let wrong: f64 = probs.iter().enumerate().filter(|&(k, _)| k != y).map(|(_, p)| p).sum();
            prop_assert!((wrong - q).abs() < 1e-12);
            prop_assert!(probs.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn scope_masks_follow_splits() {
        use crate::graph::Split::*;
        let splits = [Train, Val, Test, None];
        assert_eq!(NoiseScope::Train.mask(&splits), [true, false, false, false]);
        assert_eq!(NoiseScope::TrainVal.mask(&splits), [true, true, false, false]);
        assert_eq!(NoiseScope::All.mask(&splits), [true; 4]);
        assert_eq!("train_val".parse::<NoiseScope>().unwrap(), NoiseScope::TrainVal);
        assert!("val".parse::<NoiseScope>().is_err());
    }

    #[test]
    fn zero_rate_corruption_is_identity() {
        let g: crate::graph::Graph<f64> =
            crate::graph::generate_sbm(&crate::graph::SbmConfig::new(60, 3, 0.2, 0.05, 4, 1.0, 2)).unwrap();
        let y = g.clean_labels().unwrap();
        for kind in [NoiseKind::Symmetric, NoiseKind::Pairflip, NoiseKind::Instance] {
            let spec = NoiseSpec::new(kind, 0.0, 9);
            assert_eq!(corrupt_labels(&g, y, &spec).unwrap(), y);
        }
        let spec = NoiseSpec::new(NoiseKind::Symmetric, 0.5, 9);
        let noisy = corrupt_labels(&g, y, &spec).unwrap();
        let test = g.ids(Split::Test);
        assert!(test.iter().all(|&i| noisy[i] == y[i]));
    }
}