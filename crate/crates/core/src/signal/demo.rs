//! Scripted human-like pourer producing outcome-relabeled demonstrations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::{run_pour, ExecConfig, Observation, PourController, PourResult, PourTask, Termination};
use crate::error::{Error, Result};
use crate::sim::{max_retained_volume, MAX_TILT_DEG};
use crate::trial::{SourceTag, TrialRecord};
use crate::units::lbf_to_ml_signed;

/// Re-draws of the rates before a task is declared undemonstrable.
const MAX_ATTEMPTS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemonstratorProfile {
    pub forward_rate_range: (f64, f64),
    pub anticipation_mean: f64,
    pub anticipation_std: f64,
    pub backward_rate_range: (f64, f64),
    pub noise_std: f64,
    /// Backward speed is capped at gain·(θ − θ_home), easing into the home angle.
    pub approach_gain: f64,
    pub duration_band_s: (f64, f64),
    /// Watch the filtered scale reading (true) or the raw one.
    pub filter_force: bool,
    /// Return to upright (true) rather than to the angle the pour started from.
    pub return_upright: bool,
    /// How long the demonstrator stays still before the recording ends.
    pub hold_s: f64,
}

impl Default for DemonstratorProfile {
    fn default() -> Self {
        Self {
            forward_rate_range: (15.0, 25.0),
            anticipation_mean: 0.85,
            anticipation_std: 0.05,
            backward_rate_range: (25.0, 45.0),
            noise_std: 1.0,
            approach_gain: 3.0,
            duration_band_s: (2.5, 10.0),
            filter_force: true,
            return_upright: true,
            hold_s: 1.0,
        }
    }
}

impl DemonstratorProfile {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo && hi.is_finite();
        if !(self.anticipation_mean > 0.0 && self.anticipation_mean <= 1.0) {
            return Err(Error::Config(format!(
                "anticipation mean must lie in (0, 1], got {}",
                self.anticipation_mean
            )));
        }
        if !range_ok(self.forward_rate_range) || !range_ok(self.backward_rate_range) {
            return Err(Error::Config("demonstrator rate ranges must be positive".into()));
        }
        if !(self.anticipation_std >= 0.0 && self.noise_std >= 0.0 && self.approach_gain > 0.0 && self.hold_s >= 0.0) {
            return Err(Error::Config("demonstrator noise and gain must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Forward,
    Backward,
    Rest,
}

struct Demonstrator {
    forward: f64,
    backward: f64,
    anticipation: f64,
    noise: Option<Normal<f64>>,
    gain: f64,
    filter_force: bool,
    return_upright: bool,
    phase: Phase,
    rng: ChaCha8Rng,
}

/// Below this distance from its home angle the demonstrator stops moving.
const REST_MARGIN_DEG: f64 = 0.2;

impl PourController for Demonstrator {
    fn command(&mut self, obs: &Observation<'_>) -> Result<f64> {
        let f = if self.filter_force { obs.f_lbf } else { obs.f_raw_lbf };
        let poured = lbf_to_ml_signed(f, obs.consts);
        if self.phase == Phase::Forward && poured >= self.anticipation * obs.task.vol_2pour_ml {
            self.phase = Phase::Backward;
        }
        let home = if self.return_upright { 0.0 } else { obs.theta_start_deg };
        let above = obs.theta_deg - home;
        if self.phase == Phase::Backward && above <= REST_MARGIN_DEG {
            self.phase = Phase::Rest;
        }
        let (nominal, noise_scale) = match self.phase {
            Phase::Forward => (self.forward, 1.0),
            Phase::Backward => {
                let w = self.backward.min(self.gain * above);
                (-w, w / self.backward)
            }
            Phase::Rest => return Ok(0.0),
        };
        let jitter = match &self.noise {
            Some(n) => n.sample(&mut self.rng) * noise_scale,
            None => 0.0,
        };
        Ok(nominal + jitter)
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Runs the demonstrator on `task`, redrawing its rates until the pour
/// settles within the duration band.
pub fn demonstrate<R: Rng>(
    task: &PourTask,
    cfg: &ExecConfig,
    profile: &DemonstratorProfile,
    rng: &mut R,
) -> Result<PourResult> {
    profile.validate()?;
    task.validate()?;
    let reachable = task.vol_total_ml - max_retained_volume(&task.container, MAX_TILT_DEG)?;
    if reachable < task.vol_2pour_ml {
        return Err(Error::DemoFailure(format!(
            "{} can release at most {reachable:.1} mL of {} mL, {} mL requested",
            task.container.name, task.vol_total_ml, task.vol_2pour_ml
        )));
    }
    let mut cfg = *cfg;
    cfg.policy.still_duration_s = cfg.policy.still_duration_s.max(profile.hold_s);
    let cfg = &cfg;
    let noise = (profile.noise_std > 0.0)
        .then(|| Normal::new(0.0, profile.noise_std).expect("finite std"));
    let anticipation = Normal::new(profile.anticipation_mean, profile.anticipation_std)
        .map_err(|e| Error::Config(e.to_string()))?;
    for _ in 0..MAX_ATTEMPTS {
        let mut demo = Demonstrator {
            forward: uniform(rng, profile.forward_rate_range),
            backward: uniform(rng, profile.backward_rate_range),
            anticipation: anticipation.sample(rng).clamp(0.05, 1.0),
            noise,
            gain: profile.approach_gain,
            filter_force: profile.filter_force,
            return_upright: profile.return_upright,
            phase: Phase::Forward,
            rng: ChaCha8Rng::seed_from_u64(rng.next_u64()),
        };
        let result = run_pour(&mut demo, task, cfg, SourceTag::SyntheticDemo)?;
        let (lo, hi) = profile.duration_band_s;
        if result.trial.is_some()
            && result.terminated_by == Termination::Settled
            && (lo..=hi).contains(&result.duration_s)
        {
            return Ok(result);
        }
    }
    Err(Error::DemoFailure(format!(
        "no demonstration of {} mL from {} settled in the duration band",
        task.vol_2pour_ml, task.container.name
    )))
}

/// One demonstration trial, its goal relabeled to what was actually poured.
pub fn generate_demo<R: Rng>(
    task: &PourTask,
    cfg: &ExecConfig,
    profile: &DemonstratorProfile,
    rng: &mut R,
) -> Result<TrialRecord> {
    let result = demonstrate(task, cfg, profile, rng)?;
    Ok(result.trial.expect("demonstrate only returns recorded pours"))
}
