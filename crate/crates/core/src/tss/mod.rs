//! Curriculum retraining over betweenness-sorted training nodes.
//!
//! A pretrained classifier marks which noisy labels it agrees with; the
//! retrained model sees a growing prefix of the training nodes, ordered
//! from low to high class-conditional betweenness, restricted to those
//! agreeing nodes.

mod diagnostics;
mod pacing;

pub use diagnostics::{cbc_fscore_correlation, extraction_fscore, CorrelationReport, FScore, SubsetRow};
pub use pacing::{pacing, schedule, PacingKind};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::centrality::{cbc_scores, CbcConfig, CbcScores};
use crate::error::{Error, Result};
use crate::gcn::{
    accuracy, predict, train_plain, EpochRecord, GcnInputs, GcnParams, Supervision, TrainConfig, Trainer,
};
use crate::graph::{normalized_adjacency, Graph, Split};
use crate::ppr::{ppr_matrix, PprConfig, PprMatrix};
use crate::rng::{derive_seed, rng_for, stream_id};
use crate::scalar::Scalar;

pub const DEFAULT_LAMBDA0: f64 = 0.5;
pub const DEFAULT_PRETRAIN_EPOCHS: usize = 400;
pub const DEFAULT_NOISY_VAL_FRACTION: f64 = 0.1;
pub const DEFAULT_PATIENCE: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TssConfig {
    /// Teleport probability of the random walk behind the centrality.
    pub alpha: f64,
    pub lambda0: f64,
    /// Curriculum length; one optimizer step per epoch.
    pub epochs: usize,
    pub pacing: PacingKind,
    pub pretrain_epochs: usize,
    /// Optimizer, width and root seed shared by pretraining and
    /// retraining. Its `epochs` and `patience` fields are not used.
    pub train: TrainConfig,
    pub noisy_val_fraction: f64,
    /// Early stopping once the pool covers the whole training set.
    pub patience: usize,
    /// Re-extract confident nodes with the current model every `k` epochs
    /// instead of keeping the pretrained classifier's choice.
    pub refresh: Option<usize>,
    pub cbc: CbcConfig,
    pub ppr_tol: f64,
}

impl Default for TssConfig {
    fn default() -> Self {
        Self {
            alpha: crate::ppr::DEFAULT_ALPHA,
            lambda0: DEFAULT_LAMBDA0,
            epochs: 500,
            pacing: PacingKind::Linear,
            pretrain_epochs: DEFAULT_PRETRAIN_EPOCHS,
            train: TrainConfig::default(),
            noisy_val_fraction: DEFAULT_NOISY_VAL_FRACTION,
            patience: DEFAULT_PATIENCE,
            refresh: None,
            cbc: CbcConfig::default(),
            ppr_tol: crate::ppr::DEFAULT_TOL,
        }
    }
}

impl TssConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0 && self.lambda0 <= 1.0) {
            return Err(Error::InvalidParameter(format!("lambda0 {} outside (0, 1]", self.lambda0)));
        }
        if self.epochs == 0 || self.pretrain_epochs == 0 {
            return Err(Error::InvalidParameter("epoch counts must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.noisy_val_fraction) {
            return Err(Error::InvalidParameter(format!(
                "noisy validation fraction {} outside [0, 1)",
                self.noisy_val_fraction
            )));
        }
        if self.refresh == Some(0) {
            return Err(Error::InvalidParameter("refresh interval must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        self.train.validate()
    }

    fn seed(&self, tag: &str) -> u64 {
        derive_seed(self.train.seed, stream_id(tag))
    }

    fn pretrain_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.pretrain_epochs,
            patience: None,
            seed: self.seed("tss/pretrain"),
            ..self.train.clone()
        }
    }

    fn retrain_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            patience: Some(self.patience),
            seed: self.seed("tss/retrain"),
            ..self.train.clone()
        }
    }
}

/// Ascending by score, ties by node id.
pub fn sort_by_cbc<T: Scalar>(scores: &[T], ids: &[usize]) -> Vec<usize> {
    let mut order = ids.to_vec();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    order
}

/// Pool members whose prediction agrees with their noisy label, by id.
pub fn agreeing(predicted: &[usize], noisy: &[usize], pool: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = pool.iter().copied().filter(|&i| predicted[i] == noisy[i]).collect();
    out.sort_unstable();
    out
}

pub fn confident_subset<T: Scalar>(
    params: &GcnParams<T>,
    inputs: &GcnInputs<T>,
    noisy: &[usize],
    pool: &[usize],
) -> Result<Vec<usize>> {
    if pool.is_empty() {
        return Err(Error::InvalidParameter("candidate pool is empty".into()));
    }
    let pred = predict(params, inputs)?;
    Ok(agreeing(&pred.labels, noisy, pool))
}

/// Splits training ids into fitting nodes and a held-out noisy validation
/// set of `round(fraction * n)` nodes (at least one when `fraction > 0`).
pub fn carve_noisy_val(train: &[usize], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = train.len();
    let mut k = (fraction * n as f64).round() as usize;
    if fraction > 0.0 {
        k = k.max(1);
    }
    if k >= n {
        return Err(Error::InvalidParameter(format!(
            "{n} training nodes leave nothing to fit after a {fraction} validation carve"
        )));
    }
    let mut shuffled = train.to_vec();
    shuffled.shuffle(&mut rng_for(seed, "tss/noisy-val"));
    let mut val = shuffled.split_off(n - k);
    shuffled.sort_unstable();
    val.sort_unstable();
    Ok((shuffled, val))
}

/// Everything computed before the curriculum starts.
#[derive(Clone, Debug)]
pub struct Prepared<T> {
    pub inputs: GcnInputs<T>,
    pub fit: Vec<usize>,
    pub val: Vec<usize>,
    pub pretrained: GcnParams<T>,
    pub pretrain_history: Vec<EpochRecord>,
    /// Pretrained predictions for every node.
    pub predicted: Vec<usize>,
    pub cbc: CbcScores<T>,
    /// Fitting nodes by ascending centrality.
    pub sorted: Vec<usize>,
}

fn check_labels<T: Scalar>(graph: &Graph<T>, noisy: &[usize]) -> Result<()> {
    if noisy.len() != graph.node_count() {
        return Err(Error::Shape(format!("{} labels for {} nodes", noisy.len(), graph.node_count())));
    }
    if let Some(&y) = noisy.iter().find(|&&y| y >= graph.num_classes()) {
        return Err(Error::Validation(format!("label {y} outside 0..{}", graph.num_classes())));
    }
    Ok(())
}

fn split_train<T: Scalar>(graph: &Graph<T>, cfg: &TssConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    let train = graph.ids(Split::Train);
    if train.is_empty() {
        return Err(Error::InvalidParameter("graph has no training nodes".into()));
    }
    carve_noisy_val(&train, cfg.noisy_val_fraction, cfg.train.seed)
}

pub fn ppr_for<T: Scalar>(graph: &Graph<T>, cfg: &TssConfig) -> Result<PprMatrix<T>> {
    let adj = normalized_adjacency(graph.adjacency(), false);
    ppr_matrix(
        &adj,
        &PprConfig {
            alpha: cfg.alpha,
            tol: cfg.ppr_tol,
            ..Default::default()
        },
    )
}

/// Carve, pretrain, score and sort, using a precomputed random-walk matrix.
pub fn prepare<T: Scalar>(graph: &Graph<T>, noisy: &[usize], cfg: &TssConfig, ppr: &PprMatrix<T>) -> Result<Prepared<T>> {
    cfg.validate()?;
    check_labels(graph, noisy)?;
    if ppr.node_count() != graph.node_count() {
        return Err(Error::Shape(format!(
            "random-walk matrix has {} nodes, graph has {}",
            ppr.node_count(),
            graph.node_count()
        )));
    }
    let (fit, val) = split_train(graph, cfg)?;
    let inputs = GcnInputs::from_graph(graph)?;
    let sup = Supervision {
        labels: noisy,
        train: &fit,
        val: &val,
        test: &[],
        test_labels: None,
    };
    let pre = train_plain(&inputs, graph.num_classes(), &sup, &cfg.pretrain_config())?;
    let predicted = predict(&pre.params, &inputs)?.labels;
    let cbc = cbc_scores(ppr, noisy, &fit, &cfg.cbc)?;
    let sorted = sort_by_cbc(&cbc.scores, &fit);
    Ok(Prepared {
        inputs,
        fit,
        val,
        pretrained: pre.params,
        pretrain_history: pre.history,
        predicted,
        cbc,
        sorted,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub t: usize,
    pub lambda: f64,
    pub pool_size: usize,
    pub confident: Vec<usize>,
    pub confident_size: usize,
    /// `None` when the confident set was empty and the step was skipped.
    pub loss: Option<f64>,
    pub val_acc: Option<f64>,
    pub test_acc: Option<f64>,
    /// Extraction quality against ground truth over the current pool.
    pub extraction: Option<FScore>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochTrace>,
    pub sorted: Vec<usize>,
    pub fit: Vec<usize>,
    pub val: Vec<usize>,
    pub best_epoch: Option<usize>,
    pub skipped_epochs: usize,
}

impl TrainTrace {
    /// One JSON object per epoch, newline-terminated.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e).map_err(|e| Error::Validation(e.to_string()))?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Checks the structural guarantees of a finished run.
    pub fn check_invariants(&self, train_mask: &[bool]) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        for w in self.epochs.windows(2) {
            if w[1].lambda < w[0].lambda || w[1].pool_size < w[0].pool_size {
                return fail(format!("pace decreased at epoch {}", w[1].t));
            }
        }
        for e in &self.epochs {
            let pool = &self.sorted[..e.pool_size];
            if e.confident.len() != e.confident_size {
                return fail(format!("confident size mismatch at epoch {}", e.t));
            }
            if let Some(&i) = e.confident.iter().find(|i| !pool.contains(i) || !train_mask[**i]) {
                return fail(format!("node {i} outside the pool at epoch {}", e.t));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TssOutcome<T> {
    /// Retrained model at the best noisy-validation epoch.
    pub params: GcnParams<T>,
    pub trace: TrainTrace,
    pub prepared: Prepared<T>,
    /// Test accuracy of `params` against clean labels, when known.
    pub test_acc: Option<f64>,
}

pub fn run_tss<T: Scalar>(graph: &Graph<T>, noisy: &[usize], cfg: &TssConfig) -> Result<TssOutcome<T>> {
    cfg.validate()?;
    let ppr = ppr_for(graph, cfg)?;
    run_tss_with_ppr(graph, noisy, cfg, &ppr)
}

pub fn run_tss_with_ppr<T: Scalar>(
    graph: &Graph<T>,
    noisy: &[usize],
    cfg: &TssConfig,
    ppr: &PprMatrix<T>,
) -> Result<TssOutcome<T>> {
    let prepared = prepare(graph, noisy, cfg, ppr)?;
    curriculum(graph, noisy, cfg, prepared)
}

/// The paced retraining loop on top of a prepared run.
pub fn curriculum<T: Scalar>(
    graph: &Graph<T>,
    noisy: &[usize],
    cfg: &TssConfig,
    prepared: Prepared<T>,
) -> Result<TssOutcome<T>> {
    cfg.validate()?;
    let n = graph.node_count();
    let clean = graph.clean_labels();
    let test = graph.ids(Split::Test);
    let clean_flags: Option<Vec<bool>> = clean.map(|y| (0..n).map(|i| y[i] == noisy[i]).collect());
    let retrain = cfg.retrain_config();
    let mut trainer = Trainer::new(&prepared.inputs, graph.num_classes(), &retrain)?;
    let mut extractor = prepared.predicted.clone();
    let n_fit = prepared.sorted.len();

    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut weights = vec![T::zero(); n];
    let mut best: Option<(f64, usize, GcnParams<T>)> = None;
    let mut stale = 0;
    let mut skipped = 0;
    let mut lambda = cfg.lambda0;
    for t in 1..=cfg.epochs {
        lambda = pacing(cfg.pacing, lambda, cfg.lambda0, t, cfg.epochs)?;
        let pool_size = ((lambda * n_fit as f64).floor() as usize).min(n_fit);
        let pool = &prepared.sorted[..pool_size];
        if let Some(k) = cfg.refresh {
            if t > 1 && (t - 1) % k == 0 {
                extractor = trainer.predict()?.labels;
            }
        }
        let confident = agreeing(&extractor, noisy, pool);
        let loss = if confident.is_empty() {
            log::warn!("epoch {t}: no confident nodes among {pool_size} candidates, skipping update");
            skipped += 1;
            None
        } else {
            weights.iter_mut().for_each(|w| *w = T::zero());
            for &i in &confident {
                weights[i] = T::one();
            }
            Some(trainer.step(noisy, &weights)?.as_f64())
        };
        let pred = trainer.predict()?.labels;
        let val_acc = accuracy(&pred, noisy, &prepared.val);
        let test_acc = clean.and_then(|y| accuracy(&pred, y, &test));
        let extraction = clean_flags
            .as_ref()
            .and_then(|flags| extraction_fscore(&confident, pool, flags).ok());
        epochs.push(EpochTrace {
            t,
            lambda,
            pool_size,
            confident_size: confident.len(),
            confident,
            loss,
            val_acc,
            test_acc,
            extraction,
        });
        if let Some(v) = val_acc {
            if best.as_ref().is_none_or(|(b, _, _)| v > *b) {
                best = Some((v, t, trainer.params.clone()));
                stale = 0;
            } else if lambda >= 1.0 {
                stale += 1;
            }
        }
        if lambda >= 1.0 && stale >= cfg.patience {
            break;
        }
    }
    let (params, best_epoch) = match best {
        Some((_, t, p)) => (p, Some(t)),
        None => (trainer.params, None),
    };
    let test_acc = match clean {
        Some(y) => accuracy(&predict(&params, &prepared.inputs)?.labels, y, &test),
        None => None,
    };
    let trace = TrainTrace {
        epochs,
        sorted: prepared.sorted.clone(),
        fit: prepared.fit.clone(),
        val: prepared.val.clone(),
        best_epoch,
        skipped_epochs: skipped,
    };
    Ok(TssOutcome {
        params,
        trace,
        prepared,
        test_acc,
    })
}

#[derive(Clone, Debug)]
pub struct BaselineOutcome<T> {
    pub params: GcnParams<T>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub test_acc: Option<f64>,
}

/// Plain cross-entropy training with the same split, initialization,
/// epoch budget and model selection as the curriculum run.
pub fn run_baseline<T: Scalar>(graph: &Graph<T>, noisy: &[usize], cfg: &TssConfig) -> Result<BaselineOutcome<T>> {
    cfg.validate()?;
    check_labels(graph, noisy)?;
    let (fit, val) = split_train(graph, cfg)?;
    let inputs = GcnInputs::from_graph(graph)?;
    let test = graph.ids(Split::Test);
    let sup = Supervision {
        labels: noisy,
        train: &fit,
        val: &val,
        test: &test,
        test_labels: graph.clean_labels(),
    };
    let mut tc = cfg.retrain_config();
    if val.is_empty() {
        tc.patience = None;
    }
    let out = train_plain(&inputs, graph.num_classes(), &sup, &tc)?;
    let test_acc = match graph.clean_labels() {
        Some(y) => accuracy(&predict(&out.params, &inputs)?.labels, y, &test),
        None => None,
    };
    Ok(BaselineOutcome {
        params: out.params,
        history: out.history,
        best_epoch: out.best_epoch,
        test_acc,
    })
}

#[cfg(test)]
mod tests;
