//! Self-checks of the simulator that the command line can run on demand.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::catalog::ContainerCatalog;
use crate::seed::rng_for;
use crate::sim::{max_retained_volume, oracle_max_retained_volume, FlowModel, Plant, SimState, MAX_TILT_DEG};
use crate::units::PhysicalConstants;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationCheck {
    pub trajectories: usize,
    pub steps: usize,
    /// Largest |v_source + v_transit + v_recv + spilled − total| seen at any step.
    pub max_violation_ml: f64,
    /// Steps at which the receiver lost volume.
    pub receiver_decreases: usize,
}

impl ConservationCheck {
    pub fn passed(&self, tolerance_ml: f64) -> bool {
        self.max_violation_ml < tolerance_ml && self.receiver_decreases == 0
    }
}

/// Random-walk tilt commands on random catalog containers and fill levels.
pub fn conservation_check(trajectories: usize, steps: usize, flow: FlowModel, seed: u64) -> Result<ConservationCheck> {
    let catalog = ContainerCatalog::default();
    let containers: Vec<_> = catalog.all().cloned().collect();
    let consts = PhysicalConstants::default();
    let mut rng = rng_for(seed, "conservation", 0);
    let mut max_violation_ml = 0.0f64;
    let mut receiver_decreases = 0;
    for _ in 0..trajectories {
        let c = containers[rng.random_range(0..containers.len())].clone();
        let total = rng.random_range(0.0..=1.0) * c.capacity_ml();
        let plant = Plant::new(c, flow, consts)?;
        let mut s = SimState::new(rng.random_range(0.0..5.0), total);
        let mut w = 0.0f64;
        for _ in 0..steps {
            w = (w + rng.random_range(-15.0..15.0)).clamp(-90.0, 90.0);
            let next = plant.step(&s, w);
            max_violation_ml = max_violation_ml.max((next.total_ml() - total).abs());
            if next.v_recv_ml < s.v_recv_ml {
                receiver_decreases += 1;
            }
            s = next;
        }
    }
    Ok(ConservationCheck {
        trajectories,
        steps,
        max_violation_ml,
        receiver_decreases,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryCheck {
    pub points: usize,
    /// Largest |closed form − slicing| / slicing over the grid.
    pub max_rel_dev: f64,
    /// Largest |slicing(0°) − πR²H| / πR²H.
    pub upright_rel_dev: f64,
}

/// Closed-form retention against the slicing integral on every catalog
/// container at 0°, 5°, …, 85° and the tilt stop.
pub fn geometry_check(slices: usize) -> Result<GeometryCheck> {
    let catalog = ContainerCatalog::default();
    let angles: Vec<f64> = (0..18).map(|k| k as f64 * 5.0).chain([MAX_TILT_DEG]).collect();
    let mut points = 0;
    let mut max_rel_dev = 0.0f64;
    let mut upright_rel_dev = 0.0f64;
    for c in catalog.all() {
        for &theta in &angles {
            let closed = max_retained_volume(c, theta)?;
            let sliced = oracle_max_retained_volume(c, theta, slices)?;
            max_rel_dev = max_rel_dev.max((closed - sliced).abs() / sliced);
            points += 1;
        }
        let cylinder = c.capacity_ml();
        let sliced = oracle_max_retained_volume(c, 0.0, slices)?;
        upright_rel_dev = upright_rel_dev.max((sliced - cylinder).abs() / cylinder);
    }
    Ok(GeometryCheck {
        points,
        max_rel_dev,
        upright_rel_dev,
    })
}
