//! Flat `key = value` experiment configuration. Every key can be overridden
//! from the command line; `seed` is mandatory.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::ExecConfig;
use crate::error::{Error, Result};
use crate::net::TrainConfig;
use crate::signal::DemonstratorProfile;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub demo_count: usize,
    pub epochs: usize,
    pub lr: f64,
    pub keep_prob: f64,
    pub hidden: usize,
    pub layers: usize,
    pub batch_size: usize,
    pub eval_trials: usize,
    pub fine_tune_epochs: usize,
    pub fine_tune_lr: f64,
    pub gradual_n: usize,
    pub gradual_max_rounds: usize,
    pub gradual_reuse_tasks: bool,
    /// Multiple of the demonstrator's μ_e at which gradual practicing stops.
    pub err_threshold_factor: f64,
    pub batch_n_wine: usize,
    pub batch_n_blue: usize,
    pub run_combined: bool,
    pub switch_fast_fwd: f64,
    pub switch_fast_back: f64,
    pub switch_slow_fwd: f64,
    pub switch_slow_back: f64,
    pub lag_tau_s: f64,
    pub settle_tau_s: f64,
    pub max_flow_ml_per_s: f64,
    pub viscosity_factor: f64,
    pub sensor_noise_lbf: f64,
    pub sensor_drift_walk_lbf: f64,
    pub sensor_drift_bound_lbf: f64,
    pub sensor_bias_lbf: f64,
    pub demo_forward_min: f64,
    pub demo_forward_max: f64,
    pub demo_backward_min: f64,
    pub demo_backward_max: f64,
    pub demo_anticipation_mean: f64,
    pub demo_anticipation_std: f64,
    pub demo_noise_std: f64,
    pub demo_approach_gain: f64,
    pub demo_hold_s: f64,
    pub verbose_trajectories: bool,
}

impl SuiteConfig {
    pub fn with_seed(seed: u64) -> Self {
        let exec = ExecConfig::default();
        let demo = DemonstratorProfile::default();
        Self {
            seed,
            demo_count: 284,
            epochs: 300,
            lr: 1e-3,
            keep_prob: 0.5,
            hidden: 16,
            layers: 1,
            batch_size: 16,
            eval_trials: 15,
            fine_tune_epochs: 500,
            fine_tune_lr: 1e-3,
            gradual_n: 10,
            gradual_max_rounds: 8,
            gradual_reuse_tasks: false,
            err_threshold_factor: 2.0,
            batch_n_wine: 36,
            batch_n_blue: 54,
            run_combined: false,
            switch_fast_fwd: 20.0,
            switch_fast_back: -30.0,
            switch_slow_fwd: 5.0,
            switch_slow_back: -7.5,
            lag_tau_s: exec.flow.lag_tau_s,
            settle_tau_s: exec.flow.settle_tau_s,
            max_flow_ml_per_s: exec.flow.max_flow_ml_per_s,
            viscosity_factor: exec.flow.viscosity_factor,
            sensor_noise_lbf: exec.sensor.white_noise_std,
            sensor_drift_walk_lbf: exec.sensor.drift_walk_std,
            sensor_drift_bound_lbf: exec.sensor.drift_bound,
            sensor_bias_lbf: exec.sensor.bias,
            demo_forward_min: demo.forward_rate_range.0,
            demo_forward_max: demo.forward_rate_range.1,
            demo_backward_min: demo.backward_rate_range.0,
            demo_backward_max: demo.backward_rate_range.1,
            demo_anticipation_mean: demo.anticipation_mean,
            demo_anticipation_std: demo.anticipation_std,
            demo_noise_std: demo.noise_std,
            demo_approach_gain: demo.approach_gain,
            demo_hold_s: demo.hold_s,
            verbose_trajectories: false,
        }
    }

    /// Parses a config file. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let seed = pairs
            .iter()
            .find(|(k, _)| k == "seed")
            .ok_or_else(|| Error::Config("the config must set `seed`".into()))?;
        let mut cfg = Self::with_seed(parse_value(&seed.0, &seed.1)?);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        macro_rules! keys {
            ($($name:ident),* $(,)?) => {
                match key {
                    $(stringify!($name) => self.$name = parse_value(key, value)?,)*
                    other => return Err(Error::Config(format!("unknown config key `{other}`"))),
                }
            };
        }
        keys!(
            seed, demo_count, epochs, lr, keep_prob, hidden, layers, batch_size, eval_trials,
            fine_tune_epochs, fine_tune_lr, gradual_n, gradual_max_rounds, gradual_reuse_tasks,
            err_threshold_factor, batch_n_wine, batch_n_blue, run_combined, switch_fast_fwd,
            switch_fast_back, switch_slow_fwd, switch_slow_back, lag_tau_s, settle_tau_s,
            max_flow_ml_per_s, viscosity_factor, sensor_noise_lbf, sensor_drift_walk_lbf,
            sensor_drift_bound_lbf, sensor_bias_lbf, demo_forward_min, demo_forward_max,
            demo_backward_min, demo_backward_max, demo_anticipation_mean, demo_anticipation_std,
            demo_noise_std, demo_approach_gain, demo_hold_s, verbose_trajectories,
        );
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("override `{}` is not key=value", o.as_ref())))?;
            self.set(k.trim(), v.trim())?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        self.exec_config().flow.validate()?;
        self.demo_profile().validate()?;
        if self.demo_count < 10 || self.eval_trials == 0 {
            return Err(Error::Config("need at least 10 demonstrations and one evaluation pour".into()));
        }
        Ok(())
    }

    /// The config written back out, one key per line.
    pub fn to_text(&self) -> String {
        let v = serde_json::to_value(self).expect("plain struct");
        let mut out = String::new();
        for (k, val) in v.as_object().expect("struct serialises to an object") {
            let _ = writeln!(out, "{k} = {val}");
        }
        out
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            keep_prob: self.keep_prob,
            batch_size: self.batch_size,
            seed: crate::seed::derive_seed(self.seed, "train", 0),
            hidden: self.hidden,
            layers: self.layers,
        }
    }

    pub fn exec_config(&self) -> ExecConfig {
        let mut exec = ExecConfig::default();
        exec.flow.lag_tau_s = self.lag_tau_s;
        exec.flow.settle_tau_s = self.settle_tau_s;
        exec.flow.max_flow_ml_per_s = self.max_flow_ml_per_s;
        exec.flow.viscosity_factor = self.viscosity_factor;
        exec.sensor.white_noise_std = self.sensor_noise_lbf;
        exec.sensor.drift_walk_std = self.sensor_drift_walk_lbf;
        exec.sensor.drift_bound = self.sensor_drift_bound_lbf;
        exec.sensor.bias = self.sensor_bias_lbf;
        exec
    }

    pub fn demo_profile(&self) -> DemonstratorProfile {
        DemonstratorProfile {
            forward_rate_range: (self.demo_forward_min, self.demo_forward_max),
            backward_rate_range: (self.demo_backward_min, self.demo_backward_max),
            anticipation_mean: self.demo_anticipation_mean,
            anticipation_std: self.demo_anticipation_std,
            noise_std: self.demo_noise_std,
            approach_gain: self.demo_approach_gain,
            hold_s: self.demo_hold_s,
            ..DemonstratorProfile::default()
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}
