//! Peephole LSTM cell.
//!
//! ```text
//! i = σ(W_i·[h₋, x] + b_i + p_i ⊙ c₋)
//! f = σ(W_f·[h₋, x] + b_f + p_f ⊙ c₋)
//! g = tanh(W_g·[h₋, x] + b_g)
//! c = f ⊙ c₋ + i ⊙ g
//! o = σ(W_o·[h₋, x] + b_o + p_o ⊙ c)
//! h = o ⊙ tanh(c)
//! ```
//! Note the output gate peeks at the *new* cell state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Weights of one peephole LSTM layer. Matrices are `hidden × (hidden + input)`,
/// row-major, with the columns ordered `[h(t−1), x(t)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub hidden: usize,
    pub input: usize,
    pub w_i: Vec<f64>,
    pub w_f: Vec<f64>,
    pub w_g: Vec<f64>,
    pub w_o: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_g: Vec<f64>,
    pub b_o: Vec<f64>,
    pub p_i: Vec<f64>,
    pub p_f: Vec<f64>,
    pub p_o: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        let m = vec![0.0; hidden * (hidden + input)];
        let v = vec![0.0; hidden];
        Self {
            hidden,
            input,
            w_i: m.clone(),
            w_f: m.clone(),
            w_g: m.clone(),
            w_o: m,
            b_i: v.clone(),
            b_f: v.clone(),
            b_g: v.clone(),
            b_o: v.clone(),
            p_i: v.clone(),
            p_f: v.clone(),
            p_o: v,
        }
    }

    /// Uniform(−s, s) matrices with s = 1/√(n+d), zero biases and peepholes,
    /// forget bias +1.
    pub fn init<R: Rng>(hidden: usize, input: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(hidden, input);
        let s = 1.0 / ((hidden + input) as f64).sqrt();
        for w in [&mut p.w_i, &mut p.w_f, &mut p.w_g, &mut p.w_o] {
            for v in w.iter_mut() {
                *v = rng.random_range(-s..s);
            }
        }
        p.b_f.iter_mut().for_each(|b| *b = 1.0);
        p
    }

    pub fn cols(&self) -> usize {
        self.hidden + self.input
    }

    pub fn tensors(&self) -> [(&'static str, &[f64]); 11] {
        [
            ("w_i", &self.w_i),
            ("w_f", &self.w_f),
            ("w_g", &self.w_g),
            ("w_o", &self.w_o),
            ("b_i", &self.b_i),
            ("b_f", &self.b_f),
            ("b_g", &self.b_g),
            ("b_o", &self.b_o),
            ("p_i", &self.p_i),
            ("p_f", &self.p_f),
            ("p_o", &self.p_o),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [f64]); 11] {
        [
            ("w_i", &mut self.w_i),
            ("w_f", &mut self.w_f),
            ("w_g", &mut self.w_g),
            ("w_o", &mut self.w_o),
            ("b_i", &mut self.b_i),
            ("b_f", &mut self.b_f),
            ("b_g", &mut self.b_g),
            ("b_o", &mut self.b_o),
            ("p_i", &mut self.p_i),
            ("p_f", &mut self.p_f),
            ("p_o", &mut self.p_o),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.hidden;
        let mat = n * self.cols();
        for (name, t) in self.tensors() {
            let expected = if name.starts_with('w') { mat } else { n };
            if t.len() != expected {
                return Err(Error::Dimension(format!(
                    "{name} has {} entries, expected {expected}",
                    t.len()
                )));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("{name} has non-finite entries")));
            }
        }
        Ok(())
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Clone, Debug, PartialEq)]
pub struct CellCache {
    /// `[h(t−1), x(t)]`
    pub z: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four independent partial sums let the compiler vectorise
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in ca.by_ref().zip(cb.by_ref()) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

/// One checked step of the cell.
pub fn cell_forward(x: &[f64], h_prev: &[f64], c_prev: &[f64], params: &LstmParams) -> Result<CellCache> {
    let n = params.hidden;
    if x.len() != params.input || h_prev.len() != n || c_prev.len() != n {
        return Err(Error::Dimension(format!(
            "cell expects x[{}], h[{n}], c[{n}]; got x[{}], h[{}], c[{}]",
            params.input,
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    if params.w_i.len() != n * params.cols() {
        return Err(Error::Dimension("weight matrix shape does not match (n, d)".into()));
    }
    if x.iter().chain(h_prev).chain(c_prev).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite cell input".into()));
    }
    Ok(cell_forward_unchecked(x, h_prev, c_prev, params))
}

pub(crate) fn cell_forward_unchecked(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: &LstmParams,
) -> CellCache {
    let n = p.hidden;
    let cols = p.cols();
    let mut z = Vec::with_capacity(cols);
    z.extend_from_slice(h_prev);
    z.extend_from_slice(x);

    let mut i = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut o = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut tanh_c = vec![0.0; n];
    let mut h = vec![0.0; n];
    for j in 0..n {
        let row = j * cols..(j + 1) * cols;
        i[j] = sigmoid(dot(&p.w_i[row.clone()], &z) + p.b_i[j] + p.p_i[j] * c_prev[j]);
        f[j] = sigmoid(dot(&p.w_f[row.clone()], &z) + p.b_f[j] + p.p_f[j] * c_prev[j]);
        g[j] = (dot(&p.w_g[row.clone()], &z) + p.b_g[j]).tanh();
        c[j] = f[j] * c_prev[j] + i[j] * g[j];
        o[j] = sigmoid(dot(&p.w_o[row], &z) + p.b_o[j] + p.p_o[j] * c[j]);
        tanh_c[j] = c[j].tanh();
        h[j] = o[j] * tanh_c[j];
    }
    CellCache {
        z,
        c_prev: c_prev.to_vec(),
        i,
        f,
        g,
        o,
        c,
        tanh_c,
        h,
    }
}

/// In-place inference step without a cache.
pub(crate) fn cell_step(x: &[f64], h: &mut Vec<f64>, c: &mut Vec<f64>, p: &LstmParams, z: &mut Vec<f64>) {
    let n = p.hidden;
    let cols = p.cols();
    z.clear();
    z.extend_from_slice(h);
    z.extend_from_slice(x);
    for j in 0..n {
        let row = j * cols..(j + 1) * cols;
        let i = sigmoid(dot(&p.w_i[row.clone()], z) + p.b_i[j] + p.p_i[j] * c[j]);
        let f = sigmoid(dot(&p.w_f[row.clone()], z) + p.b_f[j] + p.p_f[j] * c[j]);
        let g = (dot(&p.w_g[row.clone()], z) + p.b_g[j]).tanh();
        let cj = f * c[j] + i * g;
        let o = sigmoid(dot(&p.w_o[row], z) + p.b_o[j] + p.p_o[j] * cj);
        c[j] = cj;
        h[j] = o * cj.tanh();
    }
}

/// Backward through one step.
///
/// `dh` and `dc` are the total gradients reaching h(t) and c(t) from above and
/// from step t+1. Parameter gradients are accumulated into `grads`; the
/// gradients w.r.t. `[h(t−1), x(t)]` and c(t−1) are written to `dz` and `dc_prev`.
pub(crate) fn cell_backward(
    cache: &CellCache,
    p: &LstmParams,
    dh: &[f64],
    dc: &[f64],
    grads: &mut LstmParams,
    dz: &mut [f64],
    dc_prev: &mut [f64],
) {
    let n = p.hidden;
    let cols = p.cols();
    dz.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..n {
        let (i, f, g, o) = (cache.i[j], cache.f[j], cache.g[j], cache.o[j]);
        let tc = cache.tanh_c[j];

        let d_o = dh[j] * tc;
        let da_o = d_o * o * (1.0 - o);
        // cell gradient: through tanh(c), through the output peephole, and from t+1
        let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc) + da_o * p.p_o[j];

        let da_i = dcj * g * i * (1.0 - i);
        let da_f = dcj * cache.c_prev[j] * f * (1.0 - f);
        let da_g = dcj * i * (1.0 - g * g);

        dc_prev[j] = dcj * f + da_i * p.p_i[j] + da_f * p.p_f[j];

        grads.b_i[j] += da_i;
        grads.b_f[j] += da_f;
        grads.b_g[j] += da_g;
        grads.b_o[j] += da_o;
        grads.p_i[j] += da_i * cache.c_prev[j];
        grads.p_f[j] += da_f * cache.c_prev[j];
        grads.p_o[j] += da_o * cache.c[j];

        let row = j * cols;
        for k in 0..cols {
            let zk = cache.z[k];
            grads.w_i[row + k] += da_i * zk;
            grads.w_f[row + k] += da_f * zk;
            grads.w_g[row + k] += da_g * zk;
            grads.w_o[row + k] += da_o * zk;
            dz[k] += p.w_i[row + k] * da_i
                + p.w_f[row + k] * da_f
                + p.w_g[row + k] * da_g
                + p.w_o[row + k] * da_o;
        }
    }
}
