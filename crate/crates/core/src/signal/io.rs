//! Trial files and dataset manifests.
//!
//! A trial file carries `# key: value` header lines followed by
//! `time_s,theta_deg,f_lbf` rows at 60 Hz. A manifest lists one
//! `path,split` pair per line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::container::ContainerSpec;
use crate::error::{Error, Result};
use crate::trial::{SourceTag, TrialRecord};
use crate::units::PhysicalConstants;

pub const TRIAL_COLUMNS: &str = "time_s,theta_deg,f_lbf";

pub fn format_trial(trial: &TrialRecord, consts: &PhysicalConstants) -> String {
    let mut out = String::new();
    let c = &trial.container;
    let _ = writeln!(out, "# name: {}", c.name);
    let _ = writeln!(out, "# H_mm: {}", c.height_mm);
    let _ = writeln!(out, "# D_mm: {}", c.diameter_mm);
    let _ = writeln!(out, "# f_total_lbf: {}", trial.f_total_lbf);
    let _ = writeln!(out, "# f_2pour_lbf: {}", trial.f_2pour_lbf);
    let _ = writeln!(out, "# source_tag: {}", trial.source_tag.as_str());
    let _ = writeln!(out, "{TRIAL_COLUMNS}");
    for (k, (theta, f)) in trial.theta_deg.iter().zip(&trial.f_lbf).enumerate() {
        let _ = writeln!(out, "{},{},{}", k as f64 * consts.dt, theta, f);
    }
    out
}

pub fn parse_trial(text: &str, consts: &PhysicalConstants) -> Result<TrialRecord> {
    let mut name = None;
    let mut height = None;
    let mut diameter = None;
    let mut f_total = None;
    let mut f_2pour = None;
    let mut tag = None;
    let mut theta = Vec::new();
    let mut force = Vec::new();

    let num = |key: &str, v: &str| -> Result<f64> {
        v.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad value for {key}: `{v}`")))
    };

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let Some((key, value)) = header.split_once(':') else {
                continue;
            };
            let value = value.trim();
            match key.trim() {
                "name" => name = Some(value.to_string()),
                "H_mm" => height = Some(num("H_mm", value)?),
                "D_mm" => diameter = Some(num("D_mm", value)?),
                "f_total_lbf" => f_total = Some(num("f_total_lbf", value)?),
                "f_2pour_lbf" => f_2pour = Some(num("f_2pour_lbf", value)?),
                "source_tag" => tag = Some(value.parse::<SourceTag>()?),
                _ => {}
            }
            continue;
        }
        if line == TRIAL_COLUMNS {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Parse(format!(
                "line {}: expected 3 columns, got {}",
                lineno + 1,
                cols.len()
            )));
        }
        theta.push(num("theta_deg", cols[1])?);
        force.push(num("f_lbf", cols[2])?);
    }

    let missing = |k: &str| Error::Parse(format!("trial header is missing `{k}`"));
    let container = ContainerSpec::new(
        name.ok_or_else(|| missing("name"))?,
        height.ok_or_else(|| missing("H_mm"))?,
        diameter.ok_or_else(|| missing("D_mm"))?,
    )?;
    TrialRecord::new(
        container,
        f_total.ok_or_else(|| missing("f_total_lbf"))?,
        f_2pour.ok_or_else(|| missing("f_2pour_lbf"))?,
        theta,
        force,
        tag.ok_or_else(|| missing("source_tag"))?,
        consts,
    )
}

pub fn write_trial(path: &Path, trial: &TrialRecord, consts: &PhysicalConstants) -> Result<()> {
    fs::write(path, format_trial(trial, consts))?;
    Ok(())
}

pub fn read_trial(path: &Path, consts: &PhysicalConstants) -> Result<TrialRecord> {
    parse_trial(&fs::read_to_string(path)?, consts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<(PathBuf, Split)>,
}

impl Manifest {
    pub fn format(&self) -> String {
        let mut out = String::from("# path,split\n");
        for (p, s) in &self.entries {
            let _ = writeln!(out, "{},{}", p.display(), s.as_str());
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (p, s) = line
                .rsplit_once(',')
                .ok_or_else(|| Error::Parse(format!("manifest line `{line}` lacks a split")))?;
            let split = match s.trim() {
                "train" => Split::Train,
                "validation" | "val" => Split::Validation,
                other => return Err(Error::Parse(format!("unknown split `{other}`"))),
            };
            entries.push((PathBuf::from(p.trim()), split));
        }
        Ok(Self { entries })
    }

    /// Reads every listed trial, resolving relative paths against `base`.
    pub fn load(
        &self,
        base: &Path,
        consts: &PhysicalConstants,
    ) -> Result<(Vec<TrialRecord>, Vec<TrialRecord>)> {
        let mut train = Vec::new();
        let mut val = Vec::new();
        for (p, split) in &self.entries {
            let path = if p.is_absolute() { p.clone() } else { base.join(p) };
            let trial = read_trial(&path, consts)?;
            match split {
                Split::Train => train.push(trial),
                Split::Validation => val.push(trial),
            }
        }
        Ok((train, val))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrialRecord {
        TrialRecord::new(
            ContainerSpec::new("red_cup", 120.0, 75.0).unwrap(),
            0.61234567890123,
            0.2718281828,
            vec![1.5, 2.0, 2.7, 3.1],
            vec![0.0, 0.001, 0.0005, 0.04],
            SourceTag::SyntheticDemo,
            &PhysicalConstants::default(),
        )
        .unwrap()
    }

    #[test]
    fn trial_text_round_trip_is_lossless() {
        let c = PhysicalConstants::default();
        let t = sample();
        let text = format_trial(&t, &c);
        assert!(text.contains("# source_tag: synthetic-demo"));
        let back = parse_trial(&text, &c).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn header_fields_are_required() {
        let c = PhysicalConstants::default();
        let text = format_trial(&sample(), &c).replace("# D_mm: 75\n", "");
        assert!(matches!(parse_trial(&text, &c), Err(Error::Parse(_))));
    }

    #[test]
    fn rows_without_column_header_are_accepted() {
        let c = PhysicalConstants::default();
        let text = format_trial(&sample(), &c).replace("time_s,theta_deg,f_lbf\n", "");
        assert_eq!(parse_trial(&text, &c).unwrap(), sample());
        let bad = format!("{text}0.1,2.0\n");
        assert!(parse_trial(&bad, &c).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let m = Manifest {
            entries: vec![
                ("demos/t000.csv".into(), Split::Train),
                ("demos/t001.csv".into(), Split::Validation),
            ],
        };
        assert_eq!(Manifest::parse(&m.format()).unwrap(), m);
        assert!(Manifest::parse("a.csv,test\n").is_err());
    }
}
