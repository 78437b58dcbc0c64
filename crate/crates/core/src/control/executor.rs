//! The sampling loop shared by every controller: sense, filter, command, step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::control::task::{Decision, PourResult, PourTask, Termination, TerminationPolicy, TrajectoryRow};
use crate::seed::rng_for;
use crate::signal::ForceFilter;
use crate::sim::{FlowModel, Plant, Sensor, SensorModel, SimState, MAX_TILT_DEG};
use crate::trial::{SourceTag, TrialRecord};
use crate::units::{volume_to_weight, PhysicalConstants};

/// How long to keep the plant still after termination before measuring.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettleConfig {
    pub min_s: f64,
    pub max_s: f64,
    /// Transit and overflow below this count as settled.
    pub tolerance_ml: f64,
}

impl Default for SettleConfig {
    fn default() -> Self {
        Self {
            min_s: 1.0,
            max_s: 10.0,
            tolerance_ml: 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecConfig {
    pub flow: FlowModel,
    pub sensor: SensorModel,
    pub policy: TerminationPolicy,
    pub settle: SettleConfig,
    pub max_omega_dps: f64,
    /// Start angles are drawn from [0, start_angle_max_deg].
    pub start_angle_max_deg: f64,
    pub consts: PhysicalConstants,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            flow: FlowModel::default(),
            sensor: SensorModel::default(),
            policy: TerminationPolicy::default(),
            settle: SettleConfig::default(),
            max_omega_dps: 90.0,
            start_angle_max_deg: 5.0,
            consts: PhysicalConstants::default(),
        }
    }
}

/// What a controller sees at one sample. `state` is the true plant state;
/// only the cheating oracle is supposed to look at it.
#[derive(Debug)]
pub struct Observation<'a> {
    pub step: usize,
    pub t_s: f64,
    pub theta_deg: f64,
    pub theta_start_deg: f64,
    /// Filtered force reading.
    pub f_lbf: f64,
    pub f_raw_lbf: f64,
    pub state: &'a SimState,
    pub task: &'a PourTask,
    pub consts: &'a PhysicalConstants,
}

pub trait PourController {
    /// Called once before the first sample of every pour.
    fn reset(&mut self, _task: &PourTask) -> Result<()> {
        Ok(())
    }

    /// Angular velocity command in deg/s.
    fn command(&mut self, obs: &Observation<'_>) -> Result<f64>;
}

/// Holds the plant still until in-flight liquid has landed.
pub(crate) fn settle(
    plant: &Plant,
    mut state: SimState,
    cfg: &SettleConfig,
    mut each: impl FnMut(&SimState),
) -> SimState {
    let rate = plant.consts.sample_rate;
    let min_steps = (cfg.min_s * rate).round() as usize;
    let max_steps = (cfg.max_s * rate).round().max(min_steps as f64) as usize;
    for k in 0..max_steps {
        if k >= min_steps && state.v_transit_ml < cfg.tolerance_ml && plant.excess_ml(&state) < cfg.tolerance_ml {
            break;
        }
        state = plant.step(&state, 0.0);
        each(&state);
    }
    state
}

/// Runs one pour closed-loop. Start angle and sensor noise come from `task.seed`.
pub fn run_pour<C: PourController + ?Sized>(
    controller: &mut C,
    task: &PourTask,
    cfg: &ExecConfig,
    tag: SourceTag,
) -> Result<PourResult> {
    task.validate()?;
    let consts = cfg.consts;
    let plant = Plant::new(task.container.clone(), cfg.flow, consts)?;
    let mut rng = rng_for(task.seed, "pour", 0);
    let theta_start = rng.random_range(0.0..=cfg.start_angle_max_deg);
    let mut state = SimState::new(theta_start, task.vol_total_ml);
    let mut sensor = Sensor::new(cfg.sensor);
    let mut filter = ForceFilter::default();
    controller.reset(task)?;

    let mut theta = Vec::new();
    let mut f_filtered = Vec::new();
    let mut omega_cmd = Vec::new();
    let mut rows = Vec::new();
    let terminated_by = loop {
        let raw = sensor.read_force(&state, &mut rng, &consts);
        let f = filter.push(raw);
        theta.push(state.theta_deg);
        f_filtered.push(f);
        let obs = Observation {
            step: theta.len() - 1,
            t_s: state.t_s,
            theta_deg: state.theta_deg,
            theta_start_deg: theta_start,
            f_lbf: f,
            f_raw_lbf: raw,
            state: &state,
            task,
            consts: &consts,
        };
        let w = controller.command(&obs)?;
        if !w.is_finite() {
            return Err(Error::Numeric(format!("controller issued {w} at step {}", obs.step)));
        }
        // motor limit, then the tilt stops: pushing into 0° or 89° moves nothing
        let w = w
            .clamp(-cfg.max_omega_dps, cfg.max_omega_dps)
            .clamp(-state.theta_deg / consts.dt, (MAX_TILT_DEG - state.theta_deg) / consts.dt);
        omega_cmd.push(w);
        rows.push(TrajectoryRow {
            t_s: state.t_s,
            theta_deg: state.theta_deg,
            omega_dps: w,
            v_source_ml: state.v_source_ml,
            v_recv_ml: state.v_recv_ml,
            f_meas_lbf: raw,
        });
        match cfg.policy.check(&theta, &omega_cmd, &consts) {
            Decision::Continue => state = plant.step(&state, w),
            Decision::Stop(t) => break t,
        }
    };
    let pour_steps = rows.len();

    let final_state = settle(&plant, state, &cfg.settle, |s| {
        let raw = sensor.read_force(s, &mut rng, &consts);
        rows.push(TrajectoryRow {
            t_s: s.t_s,
            theta_deg: s.theta_deg,
            omega_dps: 0.0,
            v_source_ml: s.v_source_ml,
            v_recv_ml: s.v_recv_ml,
            f_meas_lbf: raw,
        });
    });
    let actual_ml = final_state.v_recv_ml;
    let peak_theta_deg = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let duration_s = (theta.len() - 1) as f64 * consts.dt;

    let trial = if actual_ml > 0.0 && actual_ml < task.vol_total_ml {
        Some(TrialRecord::new(
            task.container.clone(),
            volume_to_weight(task.vol_total_ml, &consts)?,
            volume_to_weight(actual_ml, &consts)?,
            theta,
            f_filtered,
            tag,
            &consts,
        )?)
    } else {
        None
    };
    Ok(PourResult {
        trial,
        actual_ml,
        requested_ml: task.vol_2pour_ml,
        signed_error_ml: actual_ml - task.vol_2pour_ml,
        duration_s,
        terminated_by,
        theta_start_deg: theta_start,
        peak_theta_deg,
        trajectory: rows,
        pour_steps,
    })
}

/// Replays a recorded angle series open-loop from a fresh plant holding
/// `v_total_ml` and returns the settled poured volume.
pub fn replay_actual_ml(trial: &TrialRecord, v_total_ml: f64, cfg: &ExecConfig) -> Result<f64> {
    let plant = Plant::new(trial.container.clone(), cfg.flow, cfg.consts)?;
    let mut state = SimState::new(trial.theta_deg[0], v_total_ml);
    for &w in &trial.omega_dps {
        state = plant.step(&state, w);
    }
    Ok(settle(&plant, state, &cfg.settle, |_| {}).v_recv_ml)
}

/// Whether a pour ended the way a finished pour should.
pub fn is_settled(result: &PourResult) -> bool {
    result.terminated_by == Termination::Settled
}
