//! Plot-ready CSV exports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::control::{format_trajectory, PourResult};
use crate::error::{Error, Result};
use crate::harness::suite::{ExperimentReport, SuiteReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotStyle {
    TargetVsActual,
    Trajectory,
    ErrorBars,
}

impl FromStr for PlotStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "target_vs_actual" | "target-vs-actual" => Ok(PlotStyle::TargetVsActual),
            "trajectory" => Ok(PlotStyle::Trajectory),
            "error_bars" | "error-bars" => Ok(PlotStyle::ErrorBars),
            other => Err(Error::Usage(format!(
                "unknown plot style `{other}` (target_vs_actual, trajectory, error_bars)"
            ))),
        }
    }
}

/// One row per pour; `diagonal_ml` is the zero-error reference line.
pub fn target_vs_actual_csv(exp: &ExperimentReport) -> String {
    let mut out = String::from("target_ml,actual_ml,signed_error_ml,diagonal_ml\n");
    for e in &exp.stats.per_trial {
        let _ = writeln!(out, "{},{},{},{}", e.target_ml, e.actual_ml, e.signed_error_ml, e.target_ml);
    }
    out
}

pub fn error_bars_csv<'a>(exps: impl IntoIterator<Item = &'a ExperimentReport>) -> String {
    let mut out = String::from("experiment,container,mu_e_ml,sigma_e_ml,n\n");
    for e in exps {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.id,
            e.container,
            e.stats.mu_e_ml,
            e.stats.sigma_e_ml,
            e.stats.per_trial.len()
        );
    }
    out
}

pub fn trajectory_csv(result: &PourResult) -> String {
    format_trajectory(&result.trajectory)
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Writes report-derived plot data into `dir`. Trajectories are not part of a
/// report; the suite writes them while pouring.
pub fn export_plot_data(report: &SuiteReport, style: PlotStyle, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match style {
        PlotStyle::TargetVsActual => {
            for exp in &report.experiments {
                let path = dir.join(format!("target_vs_actual_{}.csv", file_stem(&exp.id)));
                std::fs::write(&path, target_vs_actual_csv(exp))?;
                written.push(path);
            }
        }
        PlotStyle::ErrorBars => {
            let path = dir.join("error_bars.csv");
            std::fs::write(&path, error_bars_csv(&report.experiments))?;
            written.push(path);
        }
        PlotStyle::Trajectory => {
            return Err(Error::Usage(
                "trajectories come from pours: use `eval --verbose-trajectories` or the suite's trajectories/ folder".into(),
            ))
        }
    }
    Ok(written)
}
