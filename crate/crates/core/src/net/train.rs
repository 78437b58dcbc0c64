//! Mini-batch training with per-epoch validation and best-model selection.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::adam::{adam_step, AdamState};
use crate::net::checkpoint::{Hyper, ModelCheckpoint};
use crate::net::network::{batch_gradients, loss, Network};
use crate::seed::derive_seed;
use crate::signal::{prepare_all, NormalizerStats, PreparedSequence, INPUT_DIM};
use crate::trial::TrialRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub keep_prob: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden: usize,
    pub layers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            lr: 0.001,
            keep_prob: 0.5,
            batch_size: 16,
            seed: 0,
            hidden: 16,
            layers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::Config(format!("keep_prob must lie in (0, 1], got {}", self.keep_prob)));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be finite and >= 0, got {}", self.lr)));
        }
        if self.batch_size == 0 || self.hidden == 0 || self.layers == 0 {
            return Err(Error::Config("batch size, hidden size and layer count must be positive".into()));
        }
        Ok(())
    }

    pub fn hyper(&self) -> Hyper {
        Hyper {
            keep_prob: self.keep_prob,
            lr: self.lr,
            epochs: self.epochs,
            seed: self.seed,
            hidden: self.hidden,
            layers: self.layers,
            batch_size: self.batch_size,
        }
    }
}

/// Epoch 0 holds the untrained model's losses (dropout off). Later rows hold
/// the mean dropout-on mini-batch loss and the dropout-off validation loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: ModelCheckpoint,
    pub curve: Vec<CurvePoint>,
    pub best_epoch: usize,
}

pub fn format_curve(curve: &[CurvePoint]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for p in curve {
        match p.val_loss {
            Some(v) => {
                let _ = writeln!(out, "{},{},{}", p.epoch, p.train_loss, v);
            }
            None => {
                let _ = writeln!(out, "{},{},", p.epoch, p.train_loss);
            }
        }
    }
    out
}

/// Inference-mode loss of a network over prepared sequences.
pub fn evaluate_loss(net: &Network, seqs: &[PreparedSequence]) -> Result<f64> {
    let preds = seqs
        .iter()
        .map(|s| net.predict(&s.inputs))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<Vec<f64>> = seqs.iter().map(|s| s.targets.clone()).collect();
    loss(&preds, &targets)
}

/// Trains a fresh network. The normalizer is fitted on `train` alone.
pub fn train(
    train: &[TrialRecord],
    validation: &[TrialRecord],
    cfg: &TrainConfig,
    label: &str,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::InsufficientData(
            "training needs non-empty train and validation splits".into(),
        ));
    }
    let normalizer = NormalizerStats::fit(train)?;
    let train_seqs = prepare_all(train, &normalizer)?;
    let val_seqs = prepare_all(validation, &normalizer)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "init", 0));
    let network = Network::init(INPUT_DIM, cfg.hidden, cfg.layers, &mut init_rng);
    let start = ModelCheckpoint {
        network,
        normalizer,
        hyper: cfg.hyper(),
        lineage: vec![label.to_string()],
    };
    optimize(start, &train_seqs, Some(&val_seqs), cfg)
}

/// Continues Adam (fresh moments) from `start`. With validation data the
/// lowest-validation-loss snapshot is returned, otherwise the final one. The
/// returned checkpoint keeps `start`'s lineage and normalizer; callers append labels.
pub fn optimize(
    start: ModelCheckpoint,
    train_seqs: &[PreparedSequence],
    val_seqs: Option<&[PreparedSequence]>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_seqs.is_empty() {
        return Err(Error::InsufficientData("no training sequences".into()));
    }
    let val_seqs = val_seqs.filter(|v| !v.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "epochs", 0));
    let mut net = start.network.clone();
    let mut adam = AdamState::new(&net);

    let snapshot = |network: &Network| ModelCheckpoint {
        network: network.clone(),
        normalizer: start.normalizer.clone(),
        hyper: Hyper {
            epochs: cfg.epochs,
            ..cfg.hyper()
        },
        lineage: start.lineage.clone(),
    };
    let failure = |reason: String, best: &Network| Error::TrainingFailure {
        reason,
        last_good: Some(Box::new(snapshot(best))),
    };

    let initial_train = evaluate_loss(&net, train_seqs)?;
    let initial_val = val_seqs.map(|v| evaluate_loss(&net, v)).transpose()?;
    let mut curve = vec![CurvePoint {
        epoch: 0,
        train_loss: initial_train,
        val_loss: initial_val,
    }];
    let mut best = net.clone();
    let mut best_val = initial_val.unwrap_or(f64::INFINITY);
    let mut best_epoch = 0;

    let mut order: Vec<usize> = (0..train_seqs.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[Vec<f64>], &[f64])> = chunk
                .iter()
                .map(|&k| (&train_seqs[k].inputs[..], &train_seqs[k].targets[..]))
                .collect();
            let (batch_loss, grads) = batch_gradients(&net, &batch, cfg.keep_prob, &mut rng, true)
                .map_err(|e| failure(format!("epoch {epoch}: {e}"), &best))?;
            if !batch_loss.is_finite() {
                return Err(failure(format!("epoch {epoch}: loss is not finite"), &best));
            }
            adam_step(&mut net, &grads, &mut adam, cfg.lr)
                .map_err(|e| failure(format!("epoch {epoch}: {e}"), &best))?;
            epoch_loss += batch_loss * chunk.len() as f64;
        }
        let train_loss = epoch_loss / train_seqs.len() as f64;
        let val_loss = match val_seqs {
            Some(v) => Some(
                evaluate_loss(&net, v).map_err(|e| failure(format!("epoch {epoch}: {e}"), &best))?,
            ),
            None => None,
        };
        if !train_loss.is_finite() || val_loss.is_some_and(|v| !v.is_finite()) {
            return Err(failure(format!("epoch {epoch}: loss is not finite"), &best));
        }
        curve.push(CurvePoint {
            epoch,
            train_loss,
            val_loss,
        });
        match val_loss {
            Some(v) if v < best_val => {
                best_val = v;
                best.clone_from(&net);
                best_epoch = epoch;
            }
            Some(_) => {}
            None => {
                best.clone_from(&net);
                best_epoch = epoch;
            }
        }
    }
    Ok(TrainOutcome {
        checkpoint: snapshot(&best),
        curve,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::ContainerSpec;
    use crate::trial::SourceTag;
    use crate::units::PhysicalConstants;

    /// Tiny synthetic trials: ramp θ forward then back, with ω depending on the goal.
    fn toy_trials(n: usize) -> Vec<TrialRecord> {
        let c = PhysicalConstants::default();
        (0..n)
            .map(|k| {
                let goal = 0.1 + 0.02 * k as f64;
                let peak = 20 + (k % 5) * 4;
                let mut theta = Vec::new();
                let mut force = Vec::new();
                for t in 0..peak {
                    theta.push(t as f64 * 0.5);
                    force.push(0.0);
                }
                for t in 0..peak {
                    theta.push((peak - t) as f64 * 0.5);
                    force.push(goal * t as f64 / peak as f64);
                }
                TrialRecord::new(
                    ContainerSpec::new("toy", 100.0 + k as f64, 60.0).unwrap(),
                    0.8,
                    goal,
                    theta,
                    force,
                    SourceTag::SyntheticDemo,
                    &c,
                )
                .unwrap()
            })
            .collect()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs: 15,
            hidden: 6,
            batch_size: 4,
            seed: 42,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn returns_the_best_validation_snapshot() {
        let trials = toy_trials(12);
        let out = train(&trials[..9], &trials[9..], &quick(), "M0").unwrap();
        let best_val = out.curve[out.best_epoch].val_loss.unwrap();
        for p in &out.curve {
            assert!(best_val <= p.val_loss.unwrap());
        }
        let stats = &out.checkpoint.normalizer;
        let val = prepare_all(&trials[9..], stats).unwrap();
        let reeval = evaluate_loss(&out.checkpoint.network, &val).unwrap();
        assert!((reeval - best_val).abs() < 1e-12);
        assert_eq!(out.checkpoint.lineage, vec!["M0".to_string()]);
        assert_eq!(out.curve.len(), 16);
    }

    #[test]
    fn training_is_deterministic() {
        let trials = toy_trials(10);
        let a = train(&trials[..8], &trials[8..], &quick(), "M0").unwrap();
        let b = train(&trials[..8], &trials[8..], &quick(), "M0").unwrap();
        assert_eq!(a.checkpoint.to_json().unwrap(), b.checkpoint.to_json().unwrap());
        assert_eq!(format_curve(&a.curve), format_curve(&b.curve));
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let trials = toy_trials(10);
        let stats = NormalizerStats::fit(&trials[..8]).unwrap();
        let seqs = prepare_all(&trials[..8], &stats).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let start = ModelCheckpoint {
            network: Network::init(INPUT_DIM, 6, 1, &mut rng),
            normalizer: stats,
            hyper: quick().hyper(),
            lineage: vec!["M0".into()],
        };
        let cfg = TrainConfig { lr: 0.0, ..quick() };
        let out = optimize(start.clone(), &seqs, None, &cfg).unwrap();
        assert_eq!(out.checkpoint.network, start.network);
    }

    #[test]
    fn loss_drops_on_toy_data() {
        let trials = toy_trials(12);
        let cfg = TrainConfig {
            epochs: 150,
            keep_prob: 1.0,
            ..quick()
        };
        let out = train(&trials[..9], &trials[9..], &cfg, "M0").unwrap();
        let first = out.curve[0].train_loss;
        let last = out.curve.last().unwrap().train_loss;
        assert!(last < 0.5 * first, "{first} -> {last}");
    }

    #[test]
    fn empty_splits_rejected() {
        let trials = toy_trials(4);
        assert!(matches!(
            train(&trials, &[], &quick(), "M0"),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn curve_csv_shape() {
        let s = format_curve(&[
            CurvePoint { epoch: 0, train_loss: 1.5, val_loss: Some(2.0) },
            CurvePoint { epoch: 1, train_loss: 1.0, val_loss: None },
        ]);
        assert_eq!(s, "epoch,train_loss,val_loss\n0,1.5,2\n1,1,\n");
    }
}
