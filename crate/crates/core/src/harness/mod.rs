//! Experiment runners: catalog, demonstrations, evaluation, the suite and
//! plot-data export.

pub mod catalog;
pub mod checks;
pub mod config;
pub mod evaluate;
pub mod export;
pub mod suite;

pub use catalog::{inside_training_hull, ContainerCatalog};
pub use checks::{conservation_check, geometry_check, ConservationCheck, GeometryCheck};
pub use config::SuiteConfig;
pub use evaluate::{evaluate, evaluate_controller, evaluate_tasks, evaluation_tasks, generate_demo_set, DemoSet, EvalOutcome};
pub use export::{error_bars_csv, export_plot_data, target_vs_actual_csv, trajectory_csv, PlotStyle};
pub use suite::{demo_dataset, run_experiment_suite, summary_table, ExperimentReport, SuiteOutcome, SuiteReport, TrainingSummary};
