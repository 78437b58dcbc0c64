//! Learning to pour accurately from outcome-relabeled demonstrations.
//!
//! A peephole LSTM maps the pouring state to an angular velocity; it is
//! trained on demonstrations whose goal is set to what was actually poured,
//! executed closed-loop against a simulated plant, and adapted to unfamiliar
//! containers by practicing on itself.

pub mod container;
pub mod control;
pub mod error;
pub mod gssp;
pub mod harness;
pub mod net;
pub mod seed;
pub mod signal;
pub mod sim;
pub mod trial;
pub mod units;

pub use container::{curvature, ContainerSpec};
pub use error::{Error, Result};
pub use net::ModelCheckpoint;
pub use trial::{angular_velocity_series, ErrorStats, SourceTag, TrialError, TrialRecord};
pub use units::{volume_to_weight, weight_to_volume, PhysicalConstants};
