//! Independent seeded runs of one training configuration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tss_core::gcn::history_csv;
use tss_core::graph::Split;
use tss_core::noise::{corrupt_labels, NoiseSpec};
use tss_core::rng::{derive_seed, stream_id};
use tss_core::tss::{run_baseline, run_tss_with_ppr, FScore, TssConfig};
use tss_core::{Graph, PprMatrix};

use crate::args::{Method, TrainKnobs};
use crate::error::CliResult;

pub fn tss_config(knobs: &TrainKnobs, alpha: f64, lambda0: f64, pacing: tss_core::tss::PacingKind) -> TssConfig {
    TssConfig {
        alpha,
        lambda0,
        epochs: knobs.epochs,
        pacing,
        pretrain_epochs: knobs.pretrain_epochs,
        train: tss_core::gcn::TrainConfig {
            lr: knobs.lr,
            weight_decay: knobs.weight_decay,
            hidden: knobs.hidden,
            epochs: knobs.epochs,
            seed: knobs.seed,
            patience: None,
            dropout: knobs.dropout,
        },
        noisy_val_fraction: knobs.noisy_val,
        patience: knobs.patience,
        refresh: knobs.refresh,
        cbc: tss_core::centrality::CbcConfig {
            epsilon: knobs.eps,
            pair_budget: (knobs.pair_budget > 0).then_some(knobs.pair_budget),
            seed: knobs.seed,
        },
        ..Default::default()
    }
}

/// Seed of run `k` under the root seed.
pub fn run_seed(root: u64, k: usize) -> u64 {
    derive_seed(root, k as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub index: usize,
    pub seed: u64,
    pub test_acc: Option<f64>,
    pub best_epoch: Option<usize>,
    pub epochs_run: usize,
    /// Fraction of training nodes whose label differs from the clean one.
    pub train_noise: Option<f64>,
    /// Extraction quality at the last curriculum epoch.
    pub final_extraction: Option<FScore>,
    pub skipped_epochs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation; zero for a single run.
    pub std: Option<f64>,
}

pub fn aggregate(results: &[RunResult]) -> Aggregate {
    let xs: Vec<f64> = results.iter().filter_map(|r| r.test_acc).collect();
    if xs.is_empty() {
        return Aggregate {
            runs: results.len(),
            mean: None,
            std: None,
        };
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Aggregate {
        runs: results.len(),
        mean: Some(mean),
        std: Some(std),
    }
}

/// Per-run files: a CSV history for plain training, JSON lines for the curriculum.
pub enum Artifact {
    History(String),
    Trace(String),
}

pub struct Experiment<'a> {
    pub graph: &'a Graph,
    pub labels: &'a [usize],
    pub method: Method,
    pub config: TssConfig,
    /// Corruption applied afresh per run; its seed is replaced per run.
    pub noise: Option<NoiseSpec>,
    pub ppr: Option<&'a PprMatrix>,
}

impl Experiment<'_> {
    pub fn run(&self, root: u64, runs: usize) -> CliResult<Vec<(RunResult, Artifact)>> {
        (0..runs)
            .into_par_iter()
            .map(|k| self.run_one(k, run_seed(root, k)))
            .collect()
    }

    fn run_one(&self, index: usize, seed: u64) -> CliResult<(RunResult, Artifact)> {
        let g = self.graph;
        let labels = match &self.noise {
            Some(spec) => {
                let spec = NoiseSpec {
                    seed: derive_seed(seed, stream_id("cli/noise")),
                    ..spec.clone()
                };
                corrupt_labels(g, self.labels, &spec)?
            }
            None => self.labels.to_vec(),
        };
        let train_noise = g.clean_labels().and_then(|y| {
            let train = g.ids(Split::Train);
            (!train.is_empty())
                .then(|| train.iter().filter(|&&i| labels[i] != y[i]).count() as f64 / train.len() as f64)
        });
        let mut cfg = self.config.clone();
        cfg.train.seed = seed;
        cfg.cbc.seed = derive_seed(seed, stream_id("cli/cbc"));
        match self.method {
            Method::Plain => {
                let out = run_baseline(g, &labels, &cfg)?;
                let result = RunResult {
                    index,
                    seed,
                    test_acc: out.test_acc,
                    best_epoch: out.best_epoch,
                    epochs_run: out.history.len(),
                    train_noise,
                    final_extraction: None,
                    skipped_epochs: None,
                };
                Ok((result, Artifact::History(history_csv(&out.history))))
            }
            Method::Tss => {
                let owned;
                let ppr = match self.ppr {
                    Some(p) => p,
                    None => {
                        owned = tss_core::tss::ppr_for(g, &cfg)?;
                        &owned
                    }
                };
                let out = run_tss_with_ppr(g, &labels, &cfg, ppr)?;
                let result = RunResult {
                    index,
                    seed,
                    test_acc: out.test_acc,
                    best_epoch: out.trace.best_epoch,
                    epochs_run: out.trace.epochs.len(),
                    train_noise,
                    final_extraction: out.trace.epochs.last().and_then(|e| e.extraction),
                    skipped_epochs: Some(out.trace.skipped_epochs),
                };
                Ok((result, Artifact::Trace(out.trace.to_json_lines()?)))
            }
        }
    }
}
