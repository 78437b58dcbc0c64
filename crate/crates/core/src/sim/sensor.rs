use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::sim::plant::SimState;
use crate::units::{ml_to_lbf_signed, PhysicalConstants};

/// Force sensor under the receiving container.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub white_noise_std: f64,
    /// Std of the drift random walk per sample.
    pub drift_walk_std: f64,
    pub drift_bound: f64,
    pub bias: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            white_noise_std: 0.002,
            drift_walk_std: 0.0001,
            drift_bound: 0.01,
            bias: 0.0,
        }
    }
}

impl SensorModel {
    pub fn noiseless() -> Self {
        Self {
            white_noise_std: 0.0,
            drift_walk_std: 0.0,
            drift_bound: 0.01,
            bias: 0.0,
        }
    }
}

/// Per-pour sensor state; the drift walk restarts at zero for each pour.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sensor {
    pub model: SensorModel,
    drift: f64,
}

impl Sensor {
    pub fn new(model: SensorModel) -> Self {
        Self { model, drift: 0.0 }
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// Reading in lbf: weight of the received liquid plus drift, white noise and bias.
    pub fn read_force<R: Rng>(&mut self, state: &SimState, rng: &mut R, consts: &PhysicalConstants) -> f64 {
        let m = self.model;
        if m.drift_walk_std > 0.0 {
            let step = Normal::new(0.0, m.drift_walk_std).expect("finite std").sample(rng);
            self.drift = (self.drift + step).clamp(-m.drift_bound, m.drift_bound);
        }
        let noise = if m.white_noise_std > 0.0 {
            Normal::new(0.0, m.white_noise_std).expect("finite std").sample(rng)
        } else {
            0.0
        };
        ml_to_lbf_signed(state.v_recv_ml, consts) + self.drift + noise + m.bias
    }
}
