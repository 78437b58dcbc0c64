use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trial::TrialRecord;

pub const INPUT_DIM: usize = 6;
pub const STD_FLOOR: f64 = 1e-6;

/// Per-dimension z-score statistics, fitted on the training split only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizerStats {
    pub input_mean: [f64; INPUT_DIM],
    pub input_std: [f64; INPUT_DIM],
    pub output_mean: f64,
    pub output_std: f64,
}

/// Raw feature vector [θ, f, f_total, f_2pour, H, κ] at sample `step` (0-based).
pub fn raw_features(trial: &TrialRecord, step: usize) -> Result<[f64; INPUT_DIM]> {
    let last = trial.len().saturating_sub(1);
    if step >= last {
        return Err(Error::Index {
            index: step,
            valid: format!("0..{last}"),
        });
    }
    Ok([
        trial.theta_deg[step],
        trial.f_lbf[step],
        trial.f_total_lbf,
        trial.f_2pour_lbf,
        trial.container.height_mm,
        trial.container.curvature()?,
    ])
}

impl NormalizerStats {
    /// Pools every input step and every ω target across the given trials.
    pub fn fit(trials: &[TrialRecord]) -> Result<Self> {
        if trials.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "normalizer needs at least 2 trials, got {}",
                trials.len()
            )));
        }
        let mut sum = [0.0; INPUT_DIM];
        let mut count = 0usize;
        let mut out_sum = 0.0;
        for trial in trials {
            for step in 0..trial.len() - 1 {
                let x = raw_features(trial, step)?;
                for (s, v) in sum.iter_mut().zip(x) {
                    *s += v;
                }
                out_sum += trial.omega_dps[step];
                count += 1;
            }
        }
        let n = count as f64;
        let mean = sum.map(|s| s / n);
        let out_mean = out_sum / n;

        let mut sq = [0.0; INPUT_DIM];
        let mut out_sq = 0.0;
        for trial in trials {
            for step in 0..trial.len() - 1 {
                let x = raw_features(trial, step)?;
                for d in 0..INPUT_DIM {
                    sq[d] += (x[d] - mean[d]).powi(2);
                }
                out_sq += (trial.omega_dps[step] - out_mean).powi(2);
            }
        }
        Ok(Self {
            input_mean: mean,
            input_std: sq.map(|s| (s / n).sqrt().max(STD_FLOOR)),
            output_mean: out_mean,
            output_std: (out_sq / n).sqrt().max(STD_FLOOR),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self
            .input_mean
            .iter()
            .chain(&self.input_std)
            .chain([&self.output_mean, &self.output_std])
            .all(|v| v.is_finite());
        if !finite || self.input_std.iter().any(|&s| s <= 0.0) || self.output_std <= 0.0 {
            return Err(Error::Config("normalizer statistics are degenerate".into()));
        }
        Ok(())
    }

    pub fn normalize_input(&self, raw: &[f64; INPUT_DIM]) -> [f64; INPUT_DIM] {
        std::array::from_fn(|d| (raw[d] - self.input_mean[d]) / self.input_std[d])
    }

    pub fn denormalize_input(&self, x: &[f64; INPUT_DIM]) -> [f64; INPUT_DIM] {
        std::array::from_fn(|d| x[d] * self.input_std[d] + self.input_mean[d])
    }

    pub fn normalize_output(&self, omega: f64) -> f64 {
        (omega - self.output_mean) / self.output_std
    }

    pub fn denormalize_output(&self, y: f64) -> f64 {
        y * self.output_std + self.output_mean
    }
}

/// Normalised network input at sample `step`.
pub fn assemble_features(
    trial: &TrialRecord,
    step: usize,
    stats: &NormalizerStats,
) -> Result<[f64; INPUT_DIM]> {
    Ok(stats.normalize_input(&raw_features(trial, step)?))
}

/// A trial turned into network-ready inputs and ω targets.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedSequence {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl PreparedSequence {
    pub fn from_trial(trial: &TrialRecord, stats: &NormalizerStats) -> Result<Self> {
        let steps = trial.len() - 1;
        let mut inputs = Vec::with_capacity(steps);
        for step in 0..steps {
            inputs.push(assemble_features(trial, step, stats)?.to_vec());
        }
        let targets = trial
            .omega_dps
            .iter()
            .map(|&w| stats.normalize_output(w))
            .collect();
        Ok(Self { inputs, targets })
    }
}

pub fn prepare_all(trials: &[TrialRecord], stats: &NormalizerStats) -> Result<Vec<PreparedSequence>> {
    trials
        .iter()
        .map(|t| PreparedSequence::from_trial(t, stats))
        .collect()
}
