//! Physical constants and the weight/volume conversions used across the pipeline.
//!
//! Weights are carried in pound-force (as collected by the force sensor), volumes
//! in millilitres, angles in degrees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// g/mL
    pub water_density: f64,
    /// m/s²
    pub gravity: f64,
    /// N per lbf
    pub lbf_to_newton: f64,
    /// Hz
    pub sample_rate: f64,
    /// s
    pub dt: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            water_density: 0.997,
            gravity: 9.80665,
            lbf_to_newton: 4.4482216152605,
            sample_rate: 60.0,
            dt: 1.0 / 60.0,
        }
    }
}

impl PhysicalConstants {
    /// Millilitres of water per lbf of weight.
    fn ml_per_lbf(&self) -> f64 {
        // N / (m/s²) = kg; kg * 1000 = g; g / (g/mL) = mL
        self.lbf_to_newton / self.gravity * 1000.0 / self.water_density
    }
}

/// Volume of water (mL) whose weight is `f_lbf`.
pub fn weight_to_volume(f_lbf: f64, consts: &PhysicalConstants) -> Result<f64> {
    if !(f_lbf >= 0.0) {
        return Err(Error::InvalidMeasurement(format!(
            "weight must be non-negative, got {f_lbf} lbf"
        )));
    }
    Ok(f_lbf * consts.ml_per_lbf())
}

/// Weight (lbf) of `v_ml` millilitres of water.
pub fn volume_to_weight(v_ml: f64, consts: &PhysicalConstants) -> Result<f64> {
    if !(v_ml >= 0.0) {
        return Err(Error::InvalidMeasurement(format!(
            "volume must be non-negative, got {v_ml} mL"
        )));
    }
    Ok(v_ml / consts.ml_per_lbf())
}

/// Unchecked signed conversions, for noisy sensor readings that may dip below zero.
pub(crate) fn lbf_to_ml_signed(f_lbf: f64, consts: &PhysicalConstants) -> f64 {
    f_lbf * consts.ml_per_lbf()
}

pub(crate) fn ml_to_lbf_signed(v_ml: f64, consts: &PhysicalConstants) -> f64 {
    v_ml / consts.ml_per_lbf()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn constants_match_fixed_values() {
        let c = PhysicalConstants::default();
        assert_eq!(c.water_density, 0.997);
        assert_eq!(c.gravity, 9.80665);
        assert_eq!(c.lbf_to_newton, 4.4482216152605);
        assert_eq!(c.sample_rate, 60.0);
        assert!((c.dt * c.sample_rate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_pound_of_water() {
        let c = PhysicalConstants::default();
        // 4.4482216 N / 9.80665 m/s² = 0.45359237 kg; 453.59237 g / 0.997 g/mL
        let oracle = 453.59237 / 0.997;
        let v = weight_to_volume(1.0, &c).unwrap();
        assert!((v - 454.96).abs() < 0.01, "{v}");
        assert!((v - oracle).abs() < 1e-6);
    }

    #[test]
    fn sensor_nonlinearity_in_millilitres() {
        let c = PhysicalConstants::default();
        let v = weight_to_volume(0.01, &c).unwrap();
        assert!((v - 4.55).abs() < 0.01, "{v}");
        assert_eq!(weight_to_volume(0.0, &c).unwrap(), 0.0);
    }

    #[test]
    fn negative_weight_rejected() {
        let c = PhysicalConstants::default();
        assert!(matches!(
            weight_to_volume(-0.1, &c),
            Err(Error::InvalidMeasurement(_))
        ));
        assert!(weight_to_volume(f64::NAN, &c).is_err());
    }

    proptest! {
        #[test]
        fn weight_volume_round_trip(f in 0.0f64..10.0) {
            let c = PhysicalConstants::default();
            let back = volume_to_weight(weight_to_volume(f, &c).unwrap(), &c).unwrap();
            if f > 0.0 {
                prop_assert!(((back - f) / f).abs() < 1e-9);
            } else {
                prop_assert_eq!(back, 0.0);
            }
        }
    }

    #[test]
    fn signed_helpers_agree_with_checked() {
        let c = PhysicalConstants::default();
        assert_relative_eq!(lbf_to_ml_signed(0.37, &c), weight_to_volume(0.37, &c).unwrap());
        assert_relative_eq!(ml_to_lbf_signed(120.0, &c), volume_to_weight(120.0, &c).unwrap());
    }
}
