use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A cylindrical source container. Curvature is always derived from the diameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainerSpec {
    pub name: String,
    pub height_mm: f64,
    pub diameter_mm: f64,
}

impl ContainerSpec {
    pub fn new(name: impl Into<String>, height_mm: f64, diameter_mm: f64) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            height_mm,
            diameter_mm,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.height_mm > 0.0 && self.height_mm.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "{}: height must be positive, got {} mm",
                self.name, self.height_mm
            )));
        }
        if !(self.diameter_mm > 0.0 && self.diameter_mm.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "{}: diameter must be positive, got {} mm",
                self.name, self.diameter_mm
            )));
        }
        Ok(())
    }

    pub fn radius_mm(&self) -> f64 {
        self.diameter_mm / 2.0
    }

    /// Body curvature in mm⁻¹.
    pub fn curvature(&self) -> Result<f64> {
        curvature(self)
    }

    /// Full capacity in mL.
    pub fn capacity_ml(&self) -> f64 {
        let r = self.radius_mm();
        PI * r * r * self.height_mm / 1000.0
    }
}

/// κ = 2 / D.
pub fn curvature(spec: &ContainerSpec) -> Result<f64> {
    if !(spec.diameter_mm > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "{}: diameter must be positive, got {} mm",
            spec.name, spec.diameter_mm
        )));
    }
    Ok(2.0 / spec.diameter_mm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cup(d: f64) -> ContainerSpec {
        ContainerSpec {
            name: "c".into(),
            height_mm: 100.0,
            diameter_mm: d,
        }
    }

    #[test]
    fn curvature_examples() {
        assert!((curvature(&cup(60.0)).unwrap() - 1.0 / 30.0).abs() < 1e-15);
        assert_eq!(curvature(&cup(2.0)).unwrap(), 1.0);
        assert!((curvature(&cup(82.0)).unwrap() - 0.024390243902439025).abs() < 1e-15);
    }

    #[test]
    fn non_positive_diameter_is_invalid() {
        assert!(matches!(curvature(&cup(0.0)), Err(Error::InvalidGeometry(_))));
        assert!(matches!(curvature(&cup(-3.0)), Err(Error::InvalidGeometry(_))));
        assert!(ContainerSpec::new("x", 0.0, 10.0).is_err());
    }

    #[test]
    fn curvature_strictly_decreasing_in_diameter() {
        let mut prev = f64::INFINITY;
        for d in (1..400).map(|k| k as f64 * 0.5) {
            let k = curvature(&cup(d)).unwrap();
            assert!(k < prev);
            prev = k;
        }
    }

    #[test]
    fn capacity_of_reference_cylinder() {
        let c = ContainerSpec::new("ref", 100.0, 60.0).unwrap();
        assert!((c.capacity_ml() - 282.743).abs() < 1e-3);
    }
}
