//! Central finite-difference check of the BPTT gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::net::network::{batch_gradients, Network};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub parameters_checked: usize,
    pub max_relative_error: f64,
    pub worst_parameter: String,
}

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    pub hidden: usize,
    pub input: usize,
    pub layers: usize,
    pub steps: usize,
    pub trials: usize,
    pub keep_prob: f64,
    pub step_size: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            hidden: 8,
            input: 6,
            layers: 1,
            steps: 20,
            trials: 2,
            keep_prob: 0.5,
            step_size: 1e-5,
        }
    }
}

/// |a − n| / max(|a|, |n|, 1e-6); the floor keeps vanishing gradients from
/// reporting pure rounding noise as relative error.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Builds a random network (every tensor, peepholes included, drawn from
/// U(−0.5, 0.5)) and random sequences, then compares every gradient entry with
/// a central difference. Dropout masks are replayed from a fixed seed so each
/// loss evaluation sees the same masks.
pub fn grad_check(config: &GradCheckConfig, seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::zeros(config.input, config.hidden, config.layers);
    for (_, t) in net.tensors_mut() {
        t.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
    }
    let data: Vec<(Vec<Vec<f64>>, Vec<f64>)> = (0..config.trials)
        .map(|k| {
            // uneven lengths exercise the per-trial averaging
            let steps = config.steps.saturating_sub(3 * k).max(2);
            let x = (0..steps)
                .map(|_| (0..config.input).map(|_| rng.random_range(-1.5..1.5)).collect())
                .collect();
            let y = (0..steps).map(|_| rng.random_range(-1.0..1.0)).collect();
            (x, y)
        })
        .collect();
    let batch: Vec<(&[Vec<f64>], &[f64])> = data.iter().map(|(x, y)| (&x[..], &y[..])).collect();
    let mask_seed = seed ^ 0x5eed;
    let training = config.keep_prob < 1.0;

    let loss_at = |n: &Network| -> Result<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(mask_seed);
        Ok(batch_gradients(n, &batch, config.keep_prob, &mut r, training)?.0)
    };
    let mut r = ChaCha8Rng::seed_from_u64(mask_seed);
    let (_, grads) = batch_gradients(&net, &batch, config.keep_prob, &mut r, training)?;

    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .into_iter()
        .map(|(name, t)| (name, t.to_vec()))
        .collect();
    let h = config.step_size;
    let mut worst = (0.0, String::new());
    let mut checked = 0;
    for (ti, (name, g)) in analytic.iter().enumerate() {
        for k in 0..g.len() {
            let original = net.tensors()[ti].1[k];
            net.tensors_mut()[ti].1[k] = original + h;
            let up = loss_at(&net)?;
            net.tensors_mut()[ti].1[k] = original - h;
            let down = loss_at(&net)?;
            net.tensors_mut()[ti].1[k] = original;
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(g[k], numeric);
            if err > worst.0 || worst.1.is_empty() {
                worst = (err, format!("{name}[{k}]"));
            }
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        seed,
        parameters_checked: checked,
        max_relative_error: worst.0,
        worst_parameter: worst.1,
    })
}
