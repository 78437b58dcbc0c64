use crate::control::executor::{run_pour, ExecConfig, Observation, PourController};
use crate::control::task::{PourResult, PourTask};
use crate::error::{Error, Result};
use crate::net::{ModelCheckpoint, RecurrentState};
use crate::signal::INPUT_DIM;
use crate::sim::{max_retained_volume, MAX_TILT_DEG};
use crate::trial::SourceTag;
use crate::units::{lbf_to_ml_signed, volume_to_weight};

/// Drives the plant with the trained network, one LSTM step per sample.
pub struct LearnedController<'a> {
    model: &'a ModelCheckpoint,
    state: RecurrentState,
    statics: [f64; 4],
}

impl<'a> LearnedController<'a> {
    pub fn new(model: &'a ModelCheckpoint) -> Result<Self> {
        model.validate()?;
        if model.network.input_dim() != INPUT_DIM {
            return Err(Error::Config(format!(
                "checkpoint expects {} inputs, the pipeline provides {INPUT_DIM}",
                model.network.input_dim()
            )));
        }
        Ok(Self {
            model,
            state: RecurrentState::new(&model.network),
            statics: [0.0; 4],
        })
    }
}

impl PourController for LearnedController<'_> {
    fn reset(&mut self, _task: &PourTask) -> Result<()> {
        self.state = RecurrentState::new(&self.model.network);
        Ok(())
    }

    fn command(&mut self, obs: &Observation<'_>) -> Result<f64> {
        if obs.step == 0 {
            let task = obs.task;
            self.statics = [
                volume_to_weight(task.vol_total_ml, obs.consts)?,
                volume_to_weight(task.vol_2pour_ml, obs.consts)?,
                task.container.height_mm,
                task.container.curvature()?,
            ];
        }
        let [f_total, f_2pour, h, kappa] = self.statics;
        let raw = [obs.theta_deg, obs.f_lbf, f_total, f_2pour, h, kappa];
        let x = self.model.normalizer.normalize_input(&raw);
        let y = self.model.network.step(&x, &mut self.state)?;
        Ok(self.model.normalizer.denormalize_output(y))
    }
}

/// Executes `task` with the trained network.
pub fn run_closed_loop(model: &ModelCheckpoint, task: &PourTask, cfg: &ExecConfig) -> Result<PourResult> {
    let mut ctl = LearnedController::new(model)?;
    run_pour(&mut ctl, task, cfg, SourceTag::RobotPractice)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Forward,
    Backward,
    Rest,
}

/// Constant forward rate until the scale reads the target, then constant
/// backward rate until the start angle is reached.
#[derive(Clone, Debug)]
pub struct SwitchController {
    pub omega_fwd: f64,
    pub omega_back: f64,
    /// Trigger on the filtered reading (true) or the raw one.
    pub filter_force: bool,
    phase: Phase,
}

impl SwitchController {
    pub fn new(omega_fwd: f64, omega_back: f64) -> Result<Self> {
        if !(omega_fwd > 0.0 && omega_back < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "switch controller needs omega_fwd > 0 > omega_back, got {omega_fwd} and {omega_back}"
            )));
        }
        Ok(Self {
            omega_fwd,
            omega_back,
            filter_force: true,
            phase: Phase::Forward,
        })
    }
}

impl PourController for SwitchController {
    fn reset(&mut self, _task: &PourTask) -> Result<()> {
        self.phase = Phase::Forward;
        Ok(())
    }

    fn command(&mut self, obs: &Observation<'_>) -> Result<f64> {
        let f = if self.filter_force { obs.f_lbf } else { obs.f_raw_lbf };
        let poured = lbf_to_ml_signed(f, obs.consts);
        if self.phase == Phase::Forward && poured >= obs.task.vol_2pour_ml {
            self.phase = Phase::Backward;
        }
        if self.phase == Phase::Backward && obs.theta_deg <= obs.theta_start_deg {
            self.phase = Phase::Rest;
        }
        Ok(match self.phase {
            Phase::Forward => self.omega_fwd,
            Phase::Backward => self.omega_back,
            Phase::Rest => 0.0,
        })
    }
}

pub fn switch_controller(
    task: &PourTask,
    omega_fwd: f64,
    omega_back: f64,
    cfg: &ExecConfig,
) -> Result<PourResult> {
    let mut ctl = SwitchController::new(omega_fwd, omega_back)?;
    run_pour(&mut ctl, task, cfg, SourceTag::RobotPractice)
}

/// Cheating controller that reads the true plant state: tilts to the angle
/// whose retention leaves exactly the target poured, waits for the liquid to
/// land, then returns. An upper bound on achievable accuracy.
#[derive(Clone, Debug)]
pub struct OracleController {
    pub max_rate_dps: f64,
    target_deg: f64,
    phase: Phase,
}

impl OracleController {
    pub fn new(max_rate_dps: f64) -> Self {
        Self {
            max_rate_dps,
            target_deg: 0.0,
            phase: Phase::Forward,
        }
    }
}

/// Tilt at which a cylinder holding `v_total` keeps only `v_total - v_pour`.
pub fn pour_angle_deg(task: &PourTask) -> f64 {
    let keep = task.vol_total_ml - task.vol_2pour_ml;
    let retained = |t: f64| max_retained_volume(&task.container, t).unwrap_or(0.0);
    if retained(MAX_TILT_DEG) > keep {
        return MAX_TILT_DEG;
    }
    let (mut lo, mut hi) = (0.0, MAX_TILT_DEG);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if retained(mid) > keep {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

impl PourController for OracleController {
    fn reset(&mut self, task: &PourTask) -> Result<()> {
        self.target_deg = pour_angle_deg(task);
        self.phase = Phase::Forward;
        Ok(())
    }

    fn command(&mut self, obs: &Observation<'_>) -> Result<f64> {
        let tol = 1e-9;
        let s = obs.state;
        if self.phase == Phase::Forward && obs.theta_deg >= self.target_deg - 1e-12 {
            let excess = (s.v_source_ml
                - max_retained_volume(&obs.task.container, obs.theta_deg).unwrap_or(0.0))
            .max(0.0);
            if excess < tol && s.v_transit_ml < tol {
                self.phase = Phase::Backward;
            }
        }
        if self.phase == Phase::Backward && obs.theta_deg <= obs.theta_start_deg {
            self.phase = Phase::Rest;
        }
        let per_step = obs.consts.sample_rate;
        Ok(match self.phase {
            Phase::Forward => ((self.target_deg - obs.theta_deg) * per_step).clamp(0.0, self.max_rate_dps),
            Phase::Backward => -((obs.theta_deg - obs.theta_start_deg) * per_step).clamp(0.0, self.max_rate_dps),
            Phase::Rest => 0.0,
        })
    }
}
