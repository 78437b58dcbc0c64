//! The trial data model: one recorded pouring sequence sampled at 60 Hz.

use serde::{Deserialize, Serialize};

use crate::container::ContainerSpec;
use crate::error::{Error, Result};
use crate::units::PhysicalConstants;

/// Allowed per-step decrease of the filtered force before a series counts as decreasing.
pub const FORCE_MONOTONE_TOLERANCE_LBF: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceTag {
    HumanDemo,
    SyntheticDemo,
    RobotPractice,
}

impl SourceTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceTag::HumanDemo => "human-demo",
            SourceTag::SyntheticDemo => "synthetic-demo",
            SourceTag::RobotPractice => "robot-practice",
        }
    }
}

impl std::str::FromStr for SourceTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "human-demo" => Ok(SourceTag::HumanDemo),
            "synthetic-demo" => Ok(SourceTag::SyntheticDemo),
            "robot-practice" => Ok(SourceTag::RobotPractice),
            other => Err(Error::Parse(format!("unknown source tag `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub container: ContainerSpec,
    pub f_total_lbf: f64,
    /// Goal weight. Always the actual poured outcome, never the requested target.
    pub f_2pour_lbf: f64,
    pub theta_deg: Vec<f64>,
    /// Filtered poured weight.
    pub f_lbf: Vec<f64>,
    pub omega_dps: Vec<f64>,
    pub source_tag: SourceTag,
}

impl TrialRecord {
    /// Builds a record, deriving ω from θ.
    pub fn new(
        container: ContainerSpec,
        f_total_lbf: f64,
        f_2pour_lbf: f64,
        theta_deg: Vec<f64>,
        f_lbf: Vec<f64>,
        source_tag: SourceTag,
        consts: &PhysicalConstants,
    ) -> Result<Self> {
        let omega_dps = angular_velocity_series(&theta_deg, consts)?;
        let rec = Self {
            container,
            f_total_lbf,
            f_2pour_lbf,
            theta_deg,
            f_lbf,
            omega_dps,
            source_tag,
        };
        rec.validate()?;
        Ok(rec)
    }

    /// Number of samples T.
    pub fn len(&self) -> usize {
        self.theta_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta_deg.is_empty()
    }

    pub fn duration_s(&self, consts: &PhysicalConstants) -> f64 {
        self.len().saturating_sub(1) as f64 * consts.dt
    }

    pub fn validate(&self) -> Result<()> {
        self.container.validate()?;
        if !(self.f_2pour_lbf > 0.0 && self.f_total_lbf > self.f_2pour_lbf) {
            return Err(Error::InvalidMeasurement(format!(
                "need f_total > f_2pour > 0, got f_total={} f_2pour={}",
                self.f_total_lbf, self.f_2pour_lbf
            )));
        }
        let t = self.theta_deg.len();
        if t < 2 {
            return Err(Error::InsufficientData(format!(
                "trial needs at least 2 samples, got {t}"
            )));
        }
        if self.f_lbf.len() != t || self.omega_dps.len() != t - 1 {
            return Err(Error::Dimension(format!(
                "theta has {t} samples, force {}, omega {} (expected {t}, {})",
                self.f_lbf.len(),
                self.omega_dps.len(),
                t - 1
            )));
        }
        let all = self
            .theta_deg
            .iter()
            .chain(&self.f_lbf)
            .chain(&self.omega_dps);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("trial contains non-finite samples".into()));
        }
        if let Some(k) = self
            .f_lbf
            .windows(2)
            .position(|w| w[1] < w[0] - FORCE_MONOTONE_TOLERANCE_LBF)
        {
            return Err(Error::InvalidMeasurement(format!(
                "force decreases by more than {FORCE_MONOTONE_TOLERANCE_LBF} lbf at sample {k}"
            )));
        }
        Ok(())
    }
}

/// ω(t) = (θ(t+1) − θ(t))·f_s.
pub fn angular_velocity_series(theta_deg: &[f64], consts: &PhysicalConstants) -> Result<Vec<f64>> {
    if theta_deg.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "angular velocity needs at least 2 angles, got {}",
            theta_deg.len()
        )));
    }
    Ok(theta_deg
        .windows(2)
        .map(|w| (w[1] - w[0]) * consts.sample_rate)
        .collect())
}

/// Summary of absolute pouring error over a set of trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mu_e_ml: f64,
    pub sigma_e_ml: f64,
    pub per_trial: Vec<TrialError>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialError {
    pub target_ml: f64,
    pub actual_ml: f64,
    pub signed_error_ml: f64,
}

impl ErrorStats {
    /// Population mean and standard deviation of |actual − target|.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let per_trial: Vec<TrialError> = pairs
            .into_iter()
            .map(|(target_ml, actual_ml)| TrialError {
                target_ml,
                actual_ml,
                signed_error_ml: actual_ml - target_ml,
            })
            .collect();
        let n = per_trial.len();
        if n == 0 {
            return Self {
                mu_e_ml: 0.0,
                sigma_e_ml: 0.0,
                per_trial,
            };
        }
        let abs: Vec<f64> = per_trial.iter().map(|e| e.signed_error_ml.abs()).collect();
        let mu = abs.iter().sum::<f64>() / n as f64;
        let var = abs.iter().map(|a| (a - mu) * (a - mu)).sum::<f64>() / n as f64;
        Self {
            mu_e_ml: mu,
            sigma_e_ml: var.sqrt(),
            per_trial,
        }
    }

    pub fn mean_signed_error_ml(&self) -> f64 {
        if self.per_trial.is_empty() {
            return 0.0;
        }
        self.per_trial.iter().map(|e| e.signed_error_ml).sum::<f64>() / self.per_trial.len() as f64
    }
}
