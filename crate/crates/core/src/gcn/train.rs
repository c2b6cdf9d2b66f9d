use std::fmt::Write as _;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{adam_step, loss_and_grads_masked, predict, AdamState, GcnInputs, GcnParams, Prediction};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::{rng_for, Rng};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub hidden: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Stop after this many epochs without a better validation accuracy
    /// and restore the best checkpoint.
    pub patience: Option<usize>,
    /// Inverted dropout on the hidden layer during training.
    pub dropout: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            weight_decay: 5e-4,
            hidden: 16,
            epochs: 400,
            seed: 0,
            patience: None,
            dropout: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be positive".into()));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidParameter("hidden width must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lr {} / weight decay {} out of range",
                self.lr, self.weight_decay
            )));
        }
        if let Some(p) = self.dropout {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("dropout {p} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

/// Parameters plus optimizer state for step-by-step training.
pub struct Trainer<'a, T> {
    inputs: &'a GcnInputs<T>,
    pub params: GcnParams<T>,
    adam: AdamState<T>,
    lr: T,
    weight_decay: T,
    dropout: Option<f64>,
    rng: Rng,
}

impl<'a, T: Scalar> Trainer<'a, T> {
    pub fn new(inputs: &'a GcnInputs<T>, num_classes: usize, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let params = GcnParams::glorot(inputs.feature_dim(), config.hidden, num_classes, config.seed);
        let adam = AdamState::new(&params);
        Ok(Self {
            inputs,
            params,
            adam,
            lr: T::of(config.lr),
            weight_decay: T::of(config.weight_decay),
            dropout: config.dropout,
            rng: rng_for(config.seed, "gcn/dropout"),
        })
    }

    /// One optimizer step on the weighted loss; returns the loss before the update.
    pub fn step(&mut self, labels: &[usize], node_weights: &[T]) -> Result<T> {
        let mask = self.dropout.map(|p| {
            let keep = T::of(1.0 / (1.0 - p));
            let n = self.inputs.node_count();
            let h = self.params.hidden();
            let data = (0..n * h)
                .map(|_| if self.rng.random::<f64>() < p { T::zero() } else { keep })
                .collect();
            DenseMatrix::from_vec(n, h, data).expect("shape")
        });
        let (loss, grads) = loss_and_grads_masked(
            &self.params,
            self.inputs,
            labels,
            node_weights,
            self.weight_decay,
            mask.as_ref(),
        )?;
        if !loss.is_finite() {
            return Err(Error::Validation(format!("non-finite loss at step {}", self.adam.step + 1)));
        }
        adam_step(&mut self.params, &grads, &mut self.adam, self.lr);
        Ok(loss)
    }

    pub fn predict(&self) -> Result<Prediction<T>> {
        predict(&self.params, self.inputs)
    }
}

/// Fraction of `ids` whose prediction equals the label; `None` for no ids.
pub fn accuracy(pred: &[usize], labels: &[usize], ids: &[usize]) -> Option<f64> {
    if ids.is_empty() {
        return None;
    }
    let hits = ids.iter().filter(|&&i| pred[i] == labels[i]).count();
    Some(hits as f64 / ids.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: Option<f64>,
    pub val_acc: Option<f64>,
    pub test_acc: Option<f64>,
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("epoch,loss,train_acc,val_acc,test_acc\n");
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch,
            r.loss,
            opt(r.train_acc),
            opt(r.val_acc),
            opt(r.test_acc)
        );
    }
    out
}

/// Label sources for training and evaluation.
#[derive(Clone, Copy, Debug)]
pub struct Supervision<'a> {
    /// Training and validation labels, usually noisy.
    pub labels: &'a [usize],
    pub train: &'a [usize],
    pub val: &'a [usize],
    pub test: &'a [usize],
    /// Ground truth used only for test accuracy.
    pub test_labels: Option<&'a [usize]>,
}

impl Supervision<'_> {
    pub(crate) fn record(&self, epoch: usize, loss: f64, pred: &[usize]) -> EpochRecord {
        EpochRecord {
            epoch,
            loss,
            train_acc: accuracy(pred, self.labels, self.train),
            val_acc: accuracy(pred, self.labels, self.val),
            test_acc: self.test_labels.and_then(|y| accuracy(pred, y, self.test)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub params: GcnParams<T>,
    pub history: Vec<EpochRecord>,
    /// Epoch of the returned parameters when validation selection ran.
    pub best_epoch: Option<usize>,
}

/// Tracks the best validation accuracy and its parameters.
#[derive(Clone, Debug)]
pub(crate) struct BestTracker<T> {
    pub best: Option<(f64, usize, GcnParams<T>)>,
    pub since: usize,
}

impl<T: Scalar> BestTracker<T> {
    pub fn new() -> Self {
        Self { best: None, since: 0 }
    }

    /// Returns true when `val` strictly improves on the best so far.
    pub fn observe(&mut self, val: f64, epoch: usize, params: &GcnParams<T>) -> bool {
        match &self.best {
            Some((b, _, _)) if val <= *b => {
                self.since += 1;
                false
            }
            _ => {
                self.best = Some((val, epoch, params.clone()));
                self.since = 0;
                true
            }
        }
    }
}

/// Full-batch training on every node in `sup.train` with unit weight.
pub fn train_plain<T: Scalar>(
    inputs: &GcnInputs<T>,
    num_classes: usize,
    sup: &Supervision<'_>,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    let n = inputs.node_count();
    if sup.labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} nodes", sup.labels.len())));
    }
    if sup.train.is_empty() {
        return Err(Error::InvalidParameter("empty training set".into()));
    }
    if config.patience.is_some() && sup.val.is_empty() {
        return Err(Error::InvalidParameter("early stopping needs a validation set".into()));
    }
    let mut weights = vec![T::zero(); n];
    for &i in sup.train {
        weights[i] = T::one();
    }
    let mut trainer = Trainer::new(inputs, num_classes, config)?;
    let mut history = Vec::with_capacity(config.epochs);
    let mut tracker = BestTracker::new();
    for epoch in 1..=config.epochs {
        let loss = trainer.step(sup.labels, &weights)?;
        let pred = trainer.predict()?;
        let rec = sup.record(epoch, loss.as_f64(), &pred.labels);
        let val = rec.val_acc;
        history.push(rec);
        if let (Some(patience), Some(val)) = (config.patience, val) {
            tracker.observe(val, epoch, &trainer.params);
            if tracker.since >= patience {
                break;
            }
        }
    }
    Ok(match tracker.best {
        Some((_, epoch, params)) => TrainOutcome {
            params,
            history,
            best_epoch: Some(epoch),
        },
        None => TrainOutcome {
            params: trainer.params,
            history,
            best_epoch: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::test_graphs::bare;
    use crate::graph::{generate_sbm, Graph, SbmConfig, Split};

    #[test]
    fn loss_decreases_on_separable_pair() {
        let g = bare::<f64>(2, &[]);
        let inputs = GcnInputs::from_graph(&g).unwrap();
        let cfg = TrainConfig {
            lr: 1e-3,
            weight_decay: 0.0,
            hidden: 4,
            seed: 3,
            ..Default::default()
        };
        let mut trainer = Trainer::new(&inputs, 2, &cfg).unwrap();
        let mut prev = f64::INFINITY;
        for _ in 0..300 {
            let loss = trainer.step(&[0, 1], &[1.0, 1.0]).unwrap();
            assert!(loss <= prev + 1e-12, "{loss} > {prev}");
            prev = loss;
        }
    }

    fn sbm() -> Graph<f64> {
        generate_sbm(&SbmConfig::new(300, 3, 0.05, 0.005, 16, 2.0, 4)).unwrap()
    }

    #[test]
    fn learns_a_planted_partition() {
        let g = sbm();
        let inputs = GcnInputs::from_graph(&g).unwrap();
        let y = g.clean_labels().unwrap();
        let (train, val, test) = (g.ids(Split::Train), g.ids(Split::Val), g.ids(Split::Test));
        let sup = Supervision {
            labels: y,
            train: &train,
            val: &val,
            test: &test,
            test_labels: Some(y),
        };
        let cfg = TrainConfig {
            epochs: 200,
            ..Default::default()
        };
        let out = train_plain(&inputs, 3, &sup, &cfg).unwrap();
        assert_eq!(out.history.len(), 200);
        assert!(out.best_epoch.is_none());
        let acc = out.history.last().unwrap().test_acc.unwrap();
        assert!(acc > 0.85, "{acc}");
        let again = train_plain(&inputs, 3, &sup, &cfg).unwrap();
        assert_eq!(again.params, out.params);
    }

    #[test]
    fn clean_partition_reaches_high_accuracy_within_200_epochs() {
        let g = sbm();
        let inputs = GcnInputs::from_graph(&g).unwrap();
        let y = g.clean_labels().unwrap();
        let (train, test) = (g.ids(Split::Train), g.ids(Split::Test));
        let sup = Supervision {
            labels: y,
            train: &train,
            val: &[],
            test: &test,
            test_labels: Some(y),
        };
        let cfg = TrainConfig {
            epochs: 200,
            ..Default::default()
        };
        let out = train_plain(&inputs, 3, &sup, &cfg).unwrap();
        let best = out.history.iter().filter_map(|r| r.test_acc).fold(0.0, f64::max);
        assert!(best >= 0.95, "{best}");
    }

    #[test]
    fn overfit_clean_run_fits_every_training_label() {
        let g = sbm();
        let inputs = GcnInputs::from_graph(&g).unwrap();
        let y = g.clean_labels().unwrap();
        let train = g.ids(Split::Train);
        let sup = Supervision {
            labels: y,
            train: &train,
            val: &[],
            test: &[],
            test_labels: None,
        };
        let cfg = TrainConfig {
            epochs: 600,
            weight_decay: 0.0,
            hidden: 64,
            ..Default::default()
        };
        let out = train_plain(&inputs, 3, &sup, &cfg).unwrap();
        assert_eq!(out.history.last().unwrap().train_acc, Some(1.0));
    }

    #[test]
    fn label_noise_lowers_clean_test_accuracy() {
        use crate::noise::{corrupt_labels, NoiseKind, NoiseSpec};
        let (mut clean_acc, mut noisy_acc) = (0.0, 0.0);
        for seed in 0..10 {
            let g: Graph<f64> = generate_sbm(&SbmConfig::new(300, 3, 0.05, 0.005, 16, 1.0, seed)).unwrap();
            let inputs = GcnInputs::from_graph(&g).unwrap();
            let y = g.clean_labels().unwrap();
            let noisy = corrupt_labels(&g, y, &NoiseSpec::new(NoiseKind::Symmetric, 0.4, seed + 50)).unwrap();
            let (train, test) = (g.ids(Split::Train), g.ids(Split::Test));
            let cfg = TrainConfig {
                epochs: 200,
                seed,
                ..Default::default()
            };
            let final_acc = |labels: &[usize]| {
                let sup = Supervision {
                    labels,
                    train: &train,
                    val: &[],
                    test: &test,
                    test_labels: Some(y),
                };
                train_plain(&inputs, 3, &sup, &cfg).unwrap().history.last().unwrap().test_acc.unwrap()
            };
            clean_acc += final_acc(y);
            noisy_acc += final_acc(&noisy);
        }
        assert!(noisy_acc < clean_acc, "{noisy_acc} vs {clean_acc}");
    }

    #[test]
    fn patience_stops_and_restores_best() {
        let g = sbm();
        let inputs = GcnInputs::from_graph(&g).unwrap();
        let y = g.clean_labels().unwrap();
        let (train, val) = (g.ids(Split::Train), g.ids(Split::Val));
        let sup = Supervision {
            labels: y,
            train: &train,
            val: &val,
            test: &[],
            test_labels: None,
        };
        let cfg = TrainConfig {
            epochs: 1000,
            patience: Some(5),
            ..Default::default()
        };
        let out = train_plain(&inputs, 3, &sup, &cfg).unwrap();
        let best = out.best_epoch.unwrap();
        assert!(out.history.len() < 1000);
        assert_eq!(out.history.len(), best + 5);
        let best_val = out.history[best - 1].val_acc.unwrap();
        assert!(out.history.iter().all(|r| r.val_acc.unwrap() <= best_val));
        let pred = predict(&out.params, &inputs).unwrap();
        assert_eq!(accuracy(&pred.labels, y, &val), Some(best_val));
    }

    #[test]
    fn rejects_bad_configs() {
        let g = bare::<f64>(2, &[]);
        let inputs = GcnInputs::from_graph(&g).unwrap();
        let sup = Supervision {
            labels: &[0, 1],
            train: &[0, 1],
            val: &[],
            test: &[],
            test_labels: None,
        };
        let zero = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(train_plain(&inputs, 2, &sup, &zero).is_err());
        let patience = TrainConfig {
            patience: Some(3),
            ..Default::default()
        };
        assert!(train_plain(&inputs, 2, &sup, &patience).is_err());
    }

    #[test]
    fn dropout_training_is_seeded() {
        let g = bare::<f64>(3, &[(0, 1)]);
        let inputs = GcnInputs::from_graph(&g).unwrap();
        let cfg = TrainConfig {
            dropout: Some(0.5),
            ..Default::default()
        };
        let run = || {
            let mut t = Trainer::new(&inputs, 2, &cfg).unwrap();
            for _ in 0..10 {
                t.step(&[0, 1, 1], &[1.0, 1.0, 1.0]).unwrap();
            }
            t.params
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn csv_leaves_missing_metrics_blank() {
        let csv = history_csv(&[EpochRecord {
            epoch: 1,
            loss: 0.5,
            train_acc: Some(1.0),
            val_acc: None,
            test_acc: None,
        }]);
        assert_eq!(csv, "epoch,loss,train_acc,val_acc,test_acc\n1,0.5,1,,\n");
    }
}
