//! Simulated pouring plant: quasi-static overflow of a tilted cylinder with a
//! first-order lag, a receiving container and a drifting force sensor.

pub mod geometry;
pub mod plant;
pub mod sensor;

pub use geometry::{critical_angle_deg, max_retained_volume, oracle_max_retained_volume};
pub use plant::{FlowModel, Plant, SimState, MAX_TILT_DEG};
pub use sensor::{Sensor, SensorModel};
