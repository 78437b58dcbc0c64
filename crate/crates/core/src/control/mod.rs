//! Closed-loop pouring: the executor, the learned controller, baselines and
//! the termination rule.

pub mod controllers;
pub mod executor;
pub mod task;

pub use controllers::{pour_angle_deg, run_closed_loop, switch_controller, LearnedController, OracleController, SwitchController};
pub use executor::{replay_actual_ml, run_pour, ExecConfig, Observation, PourController, SettleConfig};
pub use task::{format_trajectory, Decision, PourResult, PourTask, Termination, TerminationPolicy, TrajectoryRow, TRAJECTORY_COLUMNS};
