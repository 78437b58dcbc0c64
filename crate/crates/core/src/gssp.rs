//! Generalization by self-supervised practicing: the model pours on its own,
//! every pour is relabeled with what it actually poured, and the model is
//! fine-tuned on those pours.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::container::ContainerSpec;
use crate::control::{replay_actual_ml, run_closed_loop, ExecConfig, PourResult, PourTask};
use crate::error::{Error, Result};
use crate::net::{optimize, ModelCheckpoint, TrainConfig, TrainOutcome};
use crate::seed::{derive_seed, rng_for};
use crate::signal::prepare_all;
use crate::trial::TrialRecord;
use crate::units::weight_to_volume;

/// Smallest requested volume, and the least that must stay behind.
pub const MIN_POUR_ML: f64 = 50.0;
pub const MIN_LEFT_ML: f64 = 30.0;
pub const FILL_BAND: (f64, f64) = (0.4, 0.9);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GsspMode {
    Gradual,
    Batch,
    BatchCombined,
}

impl GsspMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GsspMode::Gradual => "gradual",
            GsspMode::Batch => "batch",
            GsspMode::BatchCombined => "batch-combined",
        }
    }
}

impl FromStr for GsspMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gradual" => Ok(GsspMode::Gradual),
            "batch" => Ok(GsspMode::Batch),
            "batch-combined" | "batch_combined" => Ok(GsspMode::BatchCombined),
            other => Err(Error::Usage(format!("unknown GSSP mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GsspConfig {
    pub mode: GsspMode,
    pub n_practices: usize,
    pub err_threshold_ml: f64,
    pub max_rounds: usize,
    pub fine_tune_epochs: usize,
    pub fine_tune_lr: f64,
    /// Practice the same task set every round instead of drawing a new one.
    pub reuse_tasks: bool,
    pub seed: u64,
}

impl GsspConfig {
    pub fn gradual(err_threshold_ml: f64, seed: u64) -> Self {
        Self {
            mode: GsspMode::Gradual,
            n_practices: 10,
            err_threshold_ml,
            max_rounds: 8,
            fine_tune_epochs: 500,
            fine_tune_lr: 1e-3,
            reuse_tasks: false,
            seed,
        }
    }

    pub fn batch(n_practices: usize, include_demos: bool, seed: u64) -> Self {
        Self {
            mode: if include_demos { GsspMode::BatchCombined } else { GsspMode::Batch },
            n_practices,
            err_threshold_ml: f64::INFINITY,
            max_rounds: 1,
            ..Self::gradual(f64::INFINITY, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            GsspMode::Gradual if !(5..=15).contains(&self.n_practices) => {
                return Err(Error::Config(format!(
                    "gradual practicing uses 5 to 15 pours per round, got {}",
                    self.n_practices
                )))
            }
            GsspMode::Batch | GsspMode::BatchCombined if self.n_practices < 36 => {
                return Err(Error::Config(format!(
                    "batch practicing needs more than 35 pours, got {}",
                    self.n_practices
                )))
            }
            _ => {}
        }
        if self.max_rounds == 0 {
            return Err(Error::Config("max_rounds must be at least 1".into()));
        }
        if !(self.err_threshold_ml >= 0.0) || !(self.fine_tune_lr >= 0.0) {
            return Err(Error::Config("threshold and learning rate must be non-negative".into()));
        }
        Ok(())
    }
}

/// Random requirements for `container`: v_total ~ U[0.4, 0.9]·capacity (but
/// large enough to leave room for the smallest pour), v_2pour ~ U[50, v_total − 30].
pub fn generate_practice_tasks<R: Rng>(n: usize, container: &ContainerSpec, rng: &mut R) -> Result<Vec<PourTask>> {
    if n == 0 {
        return Err(Error::InvalidArgument("at least one practice task is needed".into()));
    }
    container.validate()?;
    let cap = container.capacity_ml();
    let hi = FILL_BAND.1 * cap;
    let lo = (FILL_BAND.0 * cap).max(MIN_POUR_ML + MIN_LEFT_ML);
    if hi <= lo {
        return Err(Error::Infeasible(format!(
            "{} holds {cap:.1} mL, too little for a {MIN_POUR_ML} mL pour leaving {MIN_LEFT_ML} mL",
            container.name
        )));
    }
    (0..n)
        .map(|_| {
            let total = rng.random_range(lo..hi);
            let target = rng.random_range(MIN_POUR_ML..total - MIN_LEFT_ML);
            PourTask::new(container.clone(), total, target, rng.next_u64())
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct PracticeOutcome {
    pub results: Vec<PourResult>,
    /// Relabeled trials; pours that delivered nothing are left out.
    pub trials: Vec<TrialRecord>,
    pub mean_error_ml: f64,
}

/// Pours every task with `model` and relabels the outcomes.
pub fn practice(model: &ModelCheckpoint, tasks: &[PourTask], exec: &ExecConfig) -> Result<PracticeOutcome> {
    if tasks.is_empty() {
        return Err(Error::InvalidArgument("no practice tasks".into()));
    }
    let results = tasks
        .iter()
        .map(|t| run_closed_loop(model, t, exec))
        .collect::<Result<Vec<_>>>()?;
    let mean_error_ml = results.iter().map(PourResult::abs_error_ml).sum::<f64>() / results.len() as f64;
    let trials = results.iter().filter_map(|r| r.trial.clone()).collect();
    Ok(PracticeOutcome {
        results,
        trials,
        mean_error_ml,
    })
}

/// Continues training `model` on `dataset` with a fresh optimizer. Holds out
/// 20% for model selection when there are at least 10 trials, otherwise keeps
/// the final epoch. The normalizer is kept as is.
pub fn fine_tune(
    model: &ModelCheckpoint,
    dataset: &[TrialRecord],
    epochs: usize,
    lr: f64,
    seed: u64,
    label: &str,
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::InsufficientData("fine-tuning needs at least one trial".into()));
    }
    let cfg = TrainConfig {
        epochs,
        lr,
        seed,
        ..TrainConfig {
            keep_prob: model.hyper.keep_prob,
            batch_size: model.hyper.batch_size,
            hidden: model.hyper.hidden,
            layers: model.hyper.layers,
            ..TrainConfig::default()
        }
    };
    let seqs = prepare_all(dataset, &model.normalizer)?;
    let mut outcome = if seqs.len() >= 10 {
        let mut order: Vec<usize> = (0..seqs.len()).collect();
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, "split", 0)));
        let n_train = (seqs.len() as f64 * 0.8).round() as usize;
        let train: Vec<_> = order[..n_train].iter().map(|&k| seqs[k].clone()).collect();
        let val: Vec<_> = order[n_train..].iter().map(|&k| seqs[k].clone()).collect();
        optimize(model.clone(), &train, Some(&val), &cfg)
    } else {
        optimize(model.clone(), &seqs, None, &cfg)
    }
    .map_err(|e| match e {
        Error::TrainingFailure { reason, last_good } => Error::TrainingFailure {
            reason,
            last_good: last_good.map(|mut m| {
                m.lineage.push(label.to_string());
                m
            }),
        },
        other => other,
    })?;
    outcome.checkpoint.lineage.push(label.to_string());
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub n: usize,
    pub mean_error_ml: f64,
    pub dataset_size: usize,
    pub model_label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GsspReport {
    pub mode: GsspMode,
    pub container: String,
    pub err_threshold_ml: f64,
    pub rounds: Vec<RoundReport>,
    pub converged: bool,
    pub lineage: Vec<String>,
}

impl GsspReport {
    pub fn to_json(&self) -> Result<String> {
        // an infinite threshold is not representable in JSON
        let mut v = serde_json::to_value(self)?;
        if !self.err_threshold_ml.is_finite() {
            v["err_threshold_ml"] = serde_json::Value::Null;
        }
        Ok(serde_json::to_string_pretty(&v)? + "\n")
    }
}

#[derive(Clone, Debug)]
pub struct GsspOutcome {
    pub model: ModelCheckpoint,
    pub report: GsspReport,
    /// Every relabeled practice trial gathered.
    pub dataset: Vec<TrialRecord>,
}

fn round_label(container: &ContainerSpec, mode: GsspMode, round: usize) -> String {
    format!("{}:{}:{round}", mode.as_str(), container.name)
}

/// Practice n, stop when under threshold, otherwise fine-tune on everything
/// gathered so far and practice again. Falls back to the model with the
/// lowest practice error when `max_rounds` runs out.
pub fn gssp_gradual(
    model_init: &ModelCheckpoint,
    container: &ContainerSpec,
    config: &GsspConfig,
    exec: &ExecConfig,
) -> Result<GsspOutcome> {
    config.validate()?;
    if config.mode != GsspMode::Gradual {
        return Err(Error::Config("gssp_gradual needs gradual mode".into()));
    }
    let mut model = model_init.clone();
    let mut dataset = Vec::new();
    let mut rounds = Vec::new();
    let mut best: Option<(f64, ModelCheckpoint)> = None;
    let mut tasks = generate_practice_tasks(config.n_practices, container, &mut rng_for(config.seed, "practice", 0))?;
    for round in 1..=config.max_rounds {
        if round > 1 && !config.reuse_tasks {
            tasks = generate_practice_tasks(
                config.n_practices,
                container,
                &mut rng_for(config.seed, "practice", round as u64 - 1),
            )?;
        }
        let out = practice(&model, &tasks, exec)?;
        dataset.extend(out.trials);
        rounds.push(RoundReport {
            round,
            n: tasks.len(),
            mean_error_ml: out.mean_error_ml,
            dataset_size: dataset.len(),
            model_label: model.label().to_string(),
        });
        if best.as_ref().is_none_or(|(e, _)| out.mean_error_ml < *e) {
            best = Some((out.mean_error_ml, model.clone()));
        }
        if out.mean_error_ml < config.err_threshold_ml {
            let lineage = model.lineage.clone();
            return Ok(GsspOutcome {
                model,
                report: GsspReport {
                    mode: config.mode,
                    container: container.name.clone(),
                    err_threshold_ml: config.err_threshold_ml,
                    rounds,
                    converged: true,
                    lineage,
                },
                dataset,
            });
        }
        if round == config.max_rounds || dataset.is_empty() {
            break;
        }
        model = fine_tune(
            &model,
            &dataset,
            config.fine_tune_epochs,
            config.fine_tune_lr,
            derive_seed(config.seed, "fine-tune", round as u64),
            &round_label(container, config.mode, round),
        )?
        .checkpoint;
    }
    let (_, model) = best.expect("at least one round ran");
    Ok(GsspOutcome {
        report: GsspReport {
            mode: config.mode,
            container: container.name.clone(),
            err_threshold_ml: config.err_threshold_ml,
            rounds,
            converged: false,
            lineage: model.lineage.clone(),
        },
        model,
        dataset,
    })
}

/// One large practice round and a single fine-tune, optionally on the
/// practices combined with the demonstration training split.
pub fn gssp_batch(
    model_init: &ModelCheckpoint,
    container: &ContainerSpec,
    config: &GsspConfig,
    exec: &ExecConfig,
    demos: &[TrialRecord],
) -> Result<GsspOutcome> {
    config.validate()?;
    if config.mode == GsspMode::Gradual {
        return Err(Error::Config("gssp_batch needs a batch mode".into()));
    }
    let tasks = generate_practice_tasks(config.n_practices, container, &mut rng_for(config.seed, "practice", 0))?;
    let out = practice(model_init, &tasks, exec)?;
    let dataset = out.trials;
    let mut train_set = dataset.clone();
    if config.mode == GsspMode::BatchCombined {
        train_set.extend_from_slice(demos);
    }
    let model = fine_tune(
        model_init,
        &train_set,
        config.fine_tune_epochs,
        config.fine_tune_lr,
        derive_seed(config.seed, "fine-tune", 1),
        &round_label(container, config.mode, 1),
    )?
    .checkpoint;
    Ok(GsspOutcome {
        report: GsspReport {
            mode: config.mode,
            container: container.name.clone(),
            err_threshold_ml: config.err_threshold_ml,
            rounds: vec![RoundReport {
                round: 1,
                n: tasks.len(),
                mean_error_ml: out.mean_error_ml,
                dataset_size: dataset.len(),
                model_label: model_init.label().to_string(),
            }],
            converged: true,
            lineage: model.lineage.clone(),
        },
        model,
        dataset,
    })
}

/// Largest gap between a trial's goal and what replaying its angles pours.
pub fn relabel_audit(trials: &[TrialRecord], exec: &ExecConfig) -> Result<f64> {
    let mut worst = 0.0f64;
    for t in trials {
        let total = weight_to_volume(t.f_total_lbf, &exec.consts)?;
        let goal = weight_to_volume(t.f_2pour_lbf, &exec.consts)?;
        let replayed = replay_actual_ml(t, total, exec)?;
        worst = worst.max((replayed - goal).abs());
    }
    Ok(worst)
}
