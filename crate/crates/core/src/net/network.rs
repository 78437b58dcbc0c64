//! Stacked peephole LSTM with dropout on the non-recurrent connections and a
//! linear head, plus full backpropagation through time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::cell::{cell_backward, cell_forward_unchecked, cell_step, dot, CellCache, LstmParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub w_y: Vec<f64>,
    pub b_y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<LstmParams>,
    pub head: HeadParams,
}

impl Network {
    pub fn zeros(input: usize, hidden: usize, layers: usize) -> Self {
        assert!(layers >= 1);
        let layers = (0..layers)
            .map(|l| LstmParams::zeros(hidden, if l == 0 { input } else { hidden }))
            .collect();
        Self {
            layers,
            head: HeadParams {
                w_y: vec![0.0; hidden],
                b_y: 0.0,
            },
        }
    }

    pub fn init<R: Rng>(input: usize, hidden: usize, layers: usize, rng: &mut R) -> Self {
        assert!(layers >= 1);
        let layers = (0..layers)
            .map(|l| LstmParams::init(hidden, if l == 0 { input } else { hidden }, rng))
            .collect();
        let s = 1.0 / (hidden as f64).sqrt();
        Self {
            layers,
            head: HeadParams {
                w_y: (0..hidden).map(|_| rng.random_range(-s..s)).collect(),
                b_y: 0.0,
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers[0].hidden
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Every learnable tensor with a stable name, e.g. `lstm0.p_o`, `head.b_y`.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, t) in layer.tensors() {
                out.push((format!("lstm{l}.{name}"), t));
            }
        }
        out.push(("head.w_y".to_string(), &self.head.w_y[..]));
        out.push(("head.b_y".to_string(), std::slice::from_ref(&self.head.b_y)));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (name, t) in layer.tensors_mut() {
                out.push((format!("lstm{l}.{name}"), t));
            }
        }
        out.push(("head.w_y".to_string(), &mut self.head.w_y[..]));
        out.push(("head.b_y".to_string(), std::slice::from_mut(&mut self.head.b_y)));
        out
    }

    pub fn validate(&self) -> Result<()> {
        let mut expected_input = None;
        for layer in &self.layers {
            layer.validate()?;
            if let Some(d) = expected_input {
                if layer.input != d {
                    return Err(Error::Dimension("stacked layer widths disagree".into()));
                }
            }
            expected_input = Some(layer.hidden);
        }
        let top = self.layers.last().map(|l| l.hidden).unwrap_or(0);
        if self.head.w_y.len() != top {
            return Err(Error::Dimension(format!(
                "head expects {} inputs, top layer has {top}",
                self.head.w_y.len()
            )));
        }
        if self.head.w_y.iter().any(|v| !v.is_finite()) || !self.head.b_y.is_finite() {
            return Err(Error::Numeric("head has non-finite entries".into()));
        }
        Ok(())
    }

    /// Forward pass over a whole sequence, keeping what BPTT needs.
    /// h(0) = c(0) = 0; dropout masks are drawn from `rng` only when `training`.
    pub fn sequence_forward<R: Rng>(
        &self,
        inputs: &[Vec<f64>],
        keep_prob: f64,
        rng: &mut R,
        training: bool,
    ) -> Result<SequenceTrace> {
        if inputs.is_empty() {
            return Err(Error::InsufficientData("empty input sequence".into()));
        }
        let d = self.input_dim();
        if let Some(bad) = inputs.iter().find(|x| x.len() != d) {
            return Err(Error::Dimension(format!(
                "input has {} features, network expects {d}",
                bad.len()
            )));
        }
        if inputs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite network input".into()));
        }
        let steps = inputs.len();
        let mut caches: Vec<Vec<CellCache>> = Vec::with_capacity(self.layers.len());
        let mut masks: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.layers.len());
        let mut below: Vec<Vec<f64>> = inputs.to_vec();
        for layer in &self.layers {
            let n = layer.hidden;
            let mut h = vec![0.0; n];
            let mut c = vec![0.0; n];
            let mut layer_caches = Vec::with_capacity(steps);
            let mut layer_masks = Vec::new();
            let mut out = Vec::with_capacity(steps);
            for x in &below {
                let cache = cell_forward_unchecked(x, &h, &c, layer);
                h.clone_from(&cache.h);
                c.clone_from(&cache.c);
                if training {
                    let mask = dropout_mask(n, keep_prob, rng);
                    out.push(cache.h.iter().zip(&mask).map(|(a, m)| a * m).collect());
                    layer_masks.push(mask);
                } else {
                    out.push(cache.h.clone());
                }
                layer_caches.push(cache);
            }
            caches.push(layer_caches);
            masks.push(layer_masks);
            below = out;
        }
        let outputs = below
            .iter()
            .map(|hd| dot(&self.head.w_y, hd) + self.head.b_y)
            .collect::<Vec<_>>();
        if outputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("network output is not finite".into()));
        }
        Ok(SequenceTrace {
            caches,
            masks,
            head_inputs: below,
            outputs,
        })
    }

    /// Inference-mode outputs (no dropout, no cache).
    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut state = RecurrentState::new(self);
        inputs.iter().map(|x| self.step(x, &mut state)).collect()
    }

    /// One inference step carrying recurrent state across calls.
    pub fn step(&self, x: &[f64], state: &mut RecurrentState) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite network input".into()));
        }
        let mut below: &[f64] = x;
        let mut buf = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            cell_step(below, &mut state.h[l], &mut state.c[l], layer, &mut state.scratch);
            buf.clone_from(&state.h[l]);
            below = &buf;
        }
        Ok(dot(&self.head.w_y, below) + self.head.b_y)
    }

    /// Gradients of `loss_scale · Σ_t (ŷ(t) − y(t))²` accumulated into `grads`.
    pub fn sequence_backward(
        &self,
        trace: &SequenceTrace,
        targets: &[f64],
        loss_scale: f64,
        grads: &mut Network,
    ) -> Result<()> {
        let steps = trace.outputs.len();
        if targets.len() != steps {
            return Err(Error::Dimension(format!(
                "{} targets for {steps} outputs",
                targets.len()
            )));
        }
        if trace.caches.len() != self.layers.len() {
            return Err(Error::InvalidArgument("trace does not match this network".into()));
        }
        let top = self.layers.len() - 1;
        // gradient reaching each layer's (masked) output at every step
        let mut d_out: Vec<Vec<f64>> = Vec::with_capacity(steps);
        for t in 0..steps {
            let dy = 2.0 * (trace.outputs[t] - targets[t]) * loss_scale;
            grads.head.b_y += dy;
            for (g, hd) in grads.head.w_y.iter_mut().zip(&trace.head_inputs[t]) {
                *g += dy * hd;
            }
            d_out.push(self.head.w_y.iter().map(|w| w * dy).collect());
        }
        for l in (0..=top).rev() {
            let layer = &self.layers[l];
            let n = layer.hidden;
            let caches = &trace.caches[l];
            let masks = &trace.masks[l];
            let mut dh_next = vec![0.0; n];
            let mut dc_next = vec![0.0; n];
            let mut dh = vec![0.0; n];
            let mut dz = vec![0.0; layer.cols()];
            let mut dc_prev = vec![0.0; n];
            let mut d_below = if l > 0 { vec![Vec::new(); steps] } else { Vec::new() };
            for t in (0..steps).rev() {
                for j in 0..n {
                    let m = if masks.is_empty() { 1.0 } else { masks[t][j] };
                    dh[j] = d_out[t][j] * m + dh_next[j];
                }
                cell_backward(
                    &caches[t],
                    layer,
                    &dh,
                    &dc_next,
                    &mut grads.layers[l],
                    &mut dz,
                    &mut dc_prev,
                );
                dh_next.copy_from_slice(&dz[..n]);
                dc_next.copy_from_slice(&dc_prev);
                if l > 0 {
                    d_below[t] = dz[n..].to_vec();
                }
            }
            if l > 0 {
                d_out = d_below;
            }
        }
        Ok(())
    }
}

/// Hidden and cell state of every layer, for step-by-step inference.
#[derive(Clone, Debug)]
pub struct RecurrentState {
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    scratch: Vec<f64>,
}

impl RecurrentState {
    pub fn new(net: &Network) -> Self {
        Self {
            h: net.layers.iter().map(|l| vec![0.0; l.hidden]).collect(),
            c: net.layers.iter().map(|l| vec![0.0; l.hidden]).collect(),
            scratch: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SequenceTrace {
    pub caches: Vec<Vec<CellCache>>,
    /// Inverted-dropout multipliers per layer and step; empty in inference mode.
    pub masks: Vec<Vec<Vec<f64>>>,
    pub head_inputs: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
}


fn dropout_mask<R: Rng>(n: usize, keep_prob: f64, rng: &mut R) -> Vec<f64> {
    if keep_prob >= 1.0 {
        return vec![1.0; n];
    }
    let scale = 1.0 / keep_prob;
    (0..n)
        .map(|_| if rng.random::<f64>() < keep_prob { scale } else { 0.0 })
        .collect()
}

/// Inverted dropout: kept entries are scaled by 1/keep_prob; identity at inference.
pub fn dropout<R: Rng>(h: &[f64], keep_prob: f64, rng: &mut R, training: bool) -> Vec<f64> {
    if !training {
        return h.to_vec();
    }
    dropout_mask(h.len(), keep_prob, rng)
        .iter()
        .zip(h)
        .map(|(m, v)| m * v)
        .collect()
}

/// Mean squared error of one trial.
pub fn sequence_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    let sse: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    Ok(sse / predictions.len() as f64)
}

/// Per-trial MSE averaged over trials, so every trial weighs the same whatever its length.
pub fn loss(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if predictions.len() != targets.len() {
        return Err(Error::Dimension("batch sizes differ".into()));
    }
    let mut total = 0.0;
    for (p, y) in predictions.iter().zip(targets) {
        total += sequence_loss(p, y)?;
    }
    Ok(total / predictions.len() as f64)
}

/// Loss and exact gradients over a batch of (inputs, targets) sequences.
pub fn batch_gradients<R: Rng>(
    net: &Network,
    batch: &[(&[Vec<f64>], &[f64])],
    keep_prob: f64,
    rng: &mut R,
    training: bool,
) -> Result<(f64, Network)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut grads = net.zeros_like();
    let mut total = 0.0;
    let n_trials = batch.len() as f64;
    for (inputs, targets) in batch {
        let trace = net.sequence_forward(inputs, keep_prob, rng, training)?;
        total += sequence_loss(&trace.outputs, targets)?;
        let scale = 1.0 / (targets.len() as f64 * n_trials);
        net.sequence_backward(&trace, targets, scale, &mut grads)?;
    }
    Ok((total / n_trials, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_inputs(rng: &mut ChaCha8Rng, steps: usize, d: usize) -> Vec<Vec<f64>> {
        (0..steps)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn zero_network_outputs_bias() {
        let net = Network::zeros(6, 16, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let inputs = random_inputs(&mut rng, 30, 6);
        let out = net.predict(&inputs).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_is_cell_plus_head() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Network::init(6, 16, 1, &mut rng);
        let x = random_inputs(&mut rng, 1, 6);
        let out = net.predict(&x).unwrap();
        let cache = crate::net::cell::cell_forward(&x[0], &[0.0; 16], &[0.0; 16], &net.layers[0]).unwrap();
        let expected = dot(&net.head.w_y, &cache.h) + net.head.b_y;
        assert!((out[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn no_state_leaks_between_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Network::init(6, 8, 1, &mut rng);
        let a = random_inputs(&mut rng, 12, 6);
        let b = random_inputs(&mut rng, 7, 6);
        let first = (net.predict(&a).unwrap(), net.predict(&b).unwrap());
        let second = (net.predict(&b).unwrap(), net.predict(&a).unwrap());
        assert_eq!(first.0, second.1);
        assert_eq!(first.1, second.0);
    }

    #[test]
    fn cached_and_streaming_inference_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = Network::init(6, 8, 2, &mut rng);
        let x = random_inputs(&mut rng, 25, 6);
        let trace = net.sequence_forward(&x, 0.5, &mut rng, false).unwrap();
        assert_eq!(trace.outputs, net.predict(&x).unwrap());
        assert!(trace.masks.iter().all(|m| m.is_empty()));
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss(&[vec![1.0, 2.0]], &[vec![1.0, 2.0]]).unwrap(), 0.0);
        assert_eq!(loss(&[vec![3.0]], &[vec![1.0]]).unwrap(), 4.0);
        // per-trial MSE 1 over 10 steps and 3 over 1000 steps: not length-weighted
        let a = (vec![1.0; 10], vec![0.0; 10]);
        let b = (vec![3f64.sqrt(); 1000], vec![0.0; 1000]);
        let l = loss(&[a.0, b.0], &[a.1, b.1]).unwrap();
        assert!((l - 2.0).abs() < 1e-12);
        assert!(matches!(loss(&[], &[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn loss_ignores_trial_order() {
        let p = vec![vec![0.1, 0.5], vec![2.0], vec![-1.0, 0.0, 1.0]];
        let y = vec![vec![0.0, 0.0], vec![1.5], vec![0.0, 0.0, 0.0]];
        let mut pr = p.clone();
        let mut yr = y.clone();
        pr.reverse();
        yr.reverse();
        assert!((loss(&p, &y).unwrap() - loss(&pr, &yr).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn head_bias_gradient_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = Network::init(6, 8, 1, &mut rng);
        let x1 = random_inputs(&mut rng, 9, 6);
        let x2 = random_inputs(&mut rng, 4, 6);
        let y1: Vec<f64> = (0..9).map(|k| k as f64 * 0.1).collect();
        let y2: Vec<f64> = vec![-0.3; 4];
        let batch = [(&x1[..], &y1[..]), (&x2[..], &y2[..])];
        let (_, g) = batch_gradients(&net, &batch, 1.0, &mut rng, false).unwrap();
        let p1 = net.predict(&x1).unwrap();
        let p2 = net.predict(&x2).unwrap();
        let m1: f64 = p1.iter().zip(&y1).map(|(p, y)| 2.0 * (p - y)).sum::<f64>() / 9.0;
        let m2: f64 = p2.iter().zip(&y2).map(|(p, y)| 2.0 * (p - y)).sum::<f64>() / 4.0;
        assert!((g.head.b_y - 0.5 * (m1 + m2)).abs() < 1e-12);
    }

    #[test]
    fn zero_loss_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = Network::init(6, 8, 1, &mut rng);
        let x = random_inputs(&mut rng, 15, 6);
        let y = net.predict(&x).unwrap();
        let (l, g) = batch_gradients(&net, &[(&x[..], &y[..])], 1.0, &mut rng, false).unwrap();
        assert_eq!(l, 0.0);
        for (_, t) in g.tensors() {
            assert!(t.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn dropout_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = [0.3, -0.2, 0.9];
        assert_eq!(dropout(&h, 1.0, &mut rng, true), h.to_vec());
        assert_eq!(dropout(&h, 0.5, &mut rng, false), h.to_vec());
        let d = dropout(&h, 0.5, &mut rng, true);
        for (a, b) in d.iter().zip(&h) {
            assert!(*a == 0.0 || (*a - 2.0 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn dropout_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = [0.5, -1.0, 2.0, 0.25];
        let draws = 100_000;
        let mut mean = [0.0; 4];
        for _ in 0..draws {
            for (m, v) in mean.iter_mut().zip(dropout(&h, 0.5, &mut rng, true)) {
                *m += v / draws as f64;
            }
        }
        for (m, v) in mean.iter().zip(&h) {
            assert!((m - v).abs() <= 0.02 * v.abs(), "{m} vs {v}");
        }
    }

    #[test]
    fn tensor_names_are_unique_and_complete() {
        let net = Network::zeros(6, 16, 2);
        let names: Vec<String> = net.tensors().into_iter().map(|(n, _)| n).collect();
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), names.len());
        assert_eq!(names.len(), 2 * 11 + 2);
        assert_eq!(
            net.num_parameters(),
            4 * 16 * 22 + 4 * 16 * 32 + 2 * 7 * 16 + 16 + 1
        );
    }
}
