use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::container::ContainerSpec;
use crate::error::{Error, Result};
use crate::trial::TrialRecord;
use crate::units::PhysicalConstants;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PourTask {
    pub container: ContainerSpec,
    pub vol_total_ml: f64,
    /// Requested target volume.
    pub vol_2pour_ml: f64,
    /// Seeds the start angle and the sensor noise of this pour.
    pub seed: u64,
}

impl PourTask {
    pub fn new(container: ContainerSpec, vol_total_ml: f64, vol_2pour_ml: f64, seed: u64) -> Result<Self> {
        let task = Self {
            container,
            vol_total_ml,
            vol_2pour_ml,
            seed,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        self.container.validate()?;
        if !(self.vol_2pour_ml > 0.0 && self.vol_total_ml > self.vol_2pour_ml) {
            return Err(Error::InvalidArgument(format!(
                "need v_total > v_2pour > 0, got {} and {}",
                self.vol_total_ml, self.vol_2pour_ml
            )));
        }
        // tiny tolerance so a container filled exactly to the brim passes
        if self.vol_total_ml > self.container.capacity_ml() * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "{} mL does not fit in {} ({:.1} mL)",
                self.vol_total_ml,
                self.container.name,
                self.container.capacity_ml()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Settled,
    Timeout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Stop(Termination),
}

/// When a pour counts as finished. All thresholds are configurable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminationPolicy {
    pub min_peak_deg: f64,
    pub return_margin_deg: f64,
    pub still_omega_dps: f64,
    pub still_duration_s: f64,
    pub timeout_s: f64,
}

impl Default for TerminationPolicy {
    fn default() -> Self {
        Self {
            min_peak_deg: 15.0,
            return_margin_deg: 2.0,
            still_omega_dps: 0.5,
            still_duration_s: 0.5,
            timeout_s: 15.0,
        }
    }
}

impl TerminationPolicy {
    /// `theta` holds every sampled angle so far (first = start angle) and
    /// `omega_cmd` every command issued, the latest last.
    pub fn check(&self, theta: &[f64], omega_cmd: &[f64], consts: &PhysicalConstants) -> Decision {
        let (Some(&start), Some(&now)) = (theta.first(), theta.last()) else {
            return Decision::Continue;
        };
        let elapsed = (theta.len() - 1) as f64 * consts.dt;
        let peak = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let window = (self.still_duration_s * consts.sample_rate).round().max(1.0) as usize;
        let still = omega_cmd.len() >= window
            && omega_cmd[omega_cmd.len() - window..]
                .iter()
                .all(|w| w.abs() < self.still_omega_dps);
        if peak >= self.min_peak_deg && now <= start + self.return_margin_deg && still {
            Decision::Stop(Termination::Settled)
        } else if elapsed >= self.timeout_s - 1e-9 {
            Decision::Stop(Termination::Timeout)
        } else {
            Decision::Continue
        }
    }
}

/// One sample of a pour, including the post-termination settling phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t_s: f64,
    pub theta_deg: f64,
    pub omega_dps: f64,
    pub v_source_ml: f64,
    pub v_recv_ml: f64,
    pub f_meas_lbf: f64,
}

pub const TRAJECTORY_COLUMNS: &str = "t_s,theta_deg,omega_dps,v_source_ml,v_recv_ml,f_meas_lbf";

pub fn format_trajectory(rows: &[TrajectoryRow]) -> String {
    let mut out = format!("{TRAJECTORY_COLUMNS}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.t_s, r.theta_deg, r.omega_dps, r.v_source_ml, r.v_recv_ml, r.f_meas_lbf
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PourResult {
    /// The recorded pour with f_2pour relabeled to the actual outcome. `None`
    /// when nothing was poured, since such a pour cannot form a valid trial.
    pub trial: Option<TrialRecord>,
    pub actual_ml: f64,
    pub requested_ml: f64,
    pub signed_error_ml: f64,
    /// Time from the first sample to termination.
    pub duration_s: f64,
    pub terminated_by: Termination,
    pub theta_start_deg: f64,
    pub peak_theta_deg: f64,
    /// Rows `0..pour_steps` cover the pour itself, later rows the settling.
    pub trajectory: Vec<TrajectoryRow>,
    pub pour_steps: usize,
}

impl PourResult {
    pub fn abs_error_ml(&self) -> f64 {
        self.signed_error_ml.abs()
    }

    /// Index of the last pour-phase step where the received volume grew, and
    /// of the first where the command turned backward.
    pub fn inflow_after_reversal(&self) -> Option<(usize, usize)> {
        let rows = &self.trajectory[..self.pour_steps];
        let first_back = rows.iter().position(|r| r.omega_dps < 0.0)?;
        let last_rise = (1..rows.len())
            .rev()
            .find(|&k| rows[k].v_recv_ml > rows[k - 1].v_recv_ml)?;
        Some((last_rise, first_back))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn forward_only_times_out() {
        let p = TerminationPolicy::default();
        let steps = 900;
        let theta: Vec<f64> = (0..=steps).map(|k| k as f64 * 0.05).collect();
        let omega = vec![3.0; steps + 1];
        assert_eq!(p.check(&theta[..500], &omega[..500], &consts()), Decision::Continue);
        assert_eq!(p.check(&theta, &omega, &consts()), Decision::Stop(Termination::Timeout));
    }

    #[test]
    fn return_and_rest_settles() {
        let p = TerminationPolicy::default();
        let mut theta = vec![2.0];
        let mut omega = Vec::new();
        for _ in 0..60 {
            omega.push(30.0);
            theta.push(theta.last().unwrap() + 0.5);
        }
        for _ in 0..60 {
            omega.push(-30.0);
            theta.push(theta.last().unwrap() - 0.5);
        }
        for _ in 0..29 {
            omega.push(0.0);
            theta.push(2.0);
            assert_eq!(p.check(&theta, &omega, &consts()), Decision::Continue);
        }
        omega.push(0.0);
        theta.push(2.0);
        assert_eq!(p.check(&theta, &omega, &consts()), Decision::Stop(Termination::Settled));
    }

    #[test]
    fn oscillation_near_start_keeps_going() {
        let p = TerminationPolicy::default();
        let mut theta = vec![0.0, 20.0, 1.0];
        let mut omega = vec![10.0, -10.0];
        for k in 0..40 {
            omega.push(if k % 2 == 0 { 5.0 } else { -5.0 });
            theta.push(1.0);
        }
        assert_eq!(p.check(&theta, &omega, &consts()), Decision::Continue);
    }

    #[test]
    fn task_band_checks() {
        let c = ContainerSpec::new("cup", 100.0, 60.0).unwrap();
        assert!(PourTask::new(c.clone(), 200.0, 100.0, 0).is_ok());
        assert!(PourTask::new(c.clone(), 100.0, 100.0, 0).is_err());
        assert!(PourTask::new(c.clone(), 100.0, 0.0, 0).is_err());
        assert!(PourTask::new(c.clone(), 400.0, 100.0, 0).is_err());
        assert!(PourTask::new(c.clone(), c.capacity_ml(), 100.0, 0).is_ok());
    }

    #[test]
    fn trajectory_csv_header() {
        let s = format_trajectory(&[TrajectoryRow {
            t_s: 0.0,
            theta_deg: 1.0,
            omega_dps: 2.0,
            v_source_ml: 3.0,
            v_recv_ml: 4.0,
            f_meas_lbf: 0.5,
        }]);
        assert_eq!(s, format!("{TRAJECTORY_COLUMNS}\n0,1,2,3,4,0.5\n"));
    }
}
