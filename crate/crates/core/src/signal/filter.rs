//! Streaming causal filters applied to the force signal, and the 1 kHz → 60 Hz
//! downsampler for raw sensor captures.

use std::collections::VecDeque;

use crate::error::{Error, Result};

pub const MEDIAN_WINDOW: usize = 5;
pub const GAUSSIAN_SIGMA: f64 = 2.0;

/// Picks the sample nearest to each 60 Hz instant from a 1 kHz stream.
pub fn downsample_force(f_raw: &[f64]) -> Result<Vec<f64>> {
    if f_raw.is_empty() {
        return Err(Error::InsufficientData("cannot downsample an empty stream".into()));
    }
    let len = f_raw.len();
    let out_len = (len - 1) * 60 / 1000 + 1;
    Ok((0..out_len)
        .map(|k| f_raw[(k * 1000 + 30) / 60])
        .collect())
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median of the trailing `min(window, t)` samples.
#[derive(Clone, Debug)]
pub struct CausalMedian {
    window: usize,
    buf: VecDeque<f64>,
}

impl CausalMedian {
    pub fn new(window: usize) -> Self {
        assert!(window > 0);
        Self {
            window,
            buf: VecDeque::with_capacity(window),
        }
    }

    pub fn push(&mut self, x: f64) -> f64 {
        if self.buf.len() == self.window {
            self.buf.pop_front();
        }
        self.buf.push_back(x);
        let mut scratch = [0.0; 16];
        if self.buf.len() <= scratch.len() {
            let s = &mut scratch[..self.buf.len()];
            for (d, v) in s.iter_mut().zip(&self.buf) {
                *d = *v;
            }
            median_of(s)
        } else {
            median_of(&mut self.buf.iter().copied().collect::<Vec<_>>())
        }
    }
}

/// One-sided truncated Gaussian over the trailing 4σ+1 samples, renormalised
/// over however many samples exist so far.
#[derive(Clone, Debug)]
pub struct CausalGaussian {
    weights: Vec<f64>,
    buf: VecDeque<f64>,
}

impl CausalGaussian {
    pub fn new(sigma: f64) -> Self {
        assert!(sigma > 0.0);
        let support = (4.0 * sigma).round() as usize;
        let weights = (0..=support)
            .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
            .collect::<Vec<_>>();
        Self {
            buf: VecDeque::with_capacity(weights.len()),
            weights,
        }
    }

    pub fn push(&mut self, x: f64) -> f64 {
        if self.buf.len() == self.weights.len() {
            self.buf.pop_back();
        }
        // newest first, so buf[i] is the sample i steps back
        self.buf.push_front(x);
        let mut acc = 0.0;
        let mut norm = 0.0;
        for (w, v) in self.weights.iter().zip(&self.buf) {
            acc += w * v;
            norm += w;
        }
        acc / norm
    }
}

/// Median followed by Gaussian, fed one raw reading per sample.
#[derive(Clone, Debug)]
pub struct ForceFilter {
    median: CausalMedian,
    gaussian: CausalGaussian,
}

impl Default for ForceFilter {
    fn default() -> Self {
        Self {
            median: CausalMedian::new(MEDIAN_WINDOW),
            gaussian: CausalGaussian::new(GAUSSIAN_SIGMA),
        }
    }
}

impl ForceFilter {
    pub fn push(&mut self, raw: f64) -> f64 {
        self.gaussian.push(self.median.push(raw))
    }

    /// Filters a whole recording sample by sample.
    pub fn apply(raw: &[f64]) -> Vec<f64> {
        let mut filter = Self::default();
        raw.iter().map(|&x| filter.push(x)).collect()
    }
}

/// Latest median-filtered value of a growing prefix (window 5).
pub fn causal_median_filter(prefix: &[f64]) -> Option<f64> {
    let tail = &prefix[prefix.len().saturating_sub(MEDIAN_WINDOW)..];
    if tail.is_empty() {
        return None;
    }
    Some(median_of(&mut tail.to_vec()))
}

/// Latest Gaussian-filtered value of a growing prefix (σ = 2).
pub fn causal_gaussian_filter(prefix: &[f64]) -> Option<f64> {
    let mut g = CausalGaussian::new(GAUSSIAN_SIGMA);
    let start = prefix.len().saturating_sub(g.weights.len());
    prefix[start..].iter().map(|&x| g.push(x)).last()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn downsample_examples() {
        let flat = vec![0.3; 1000];
        let d = downsample_force(&flat).unwrap();
        assert_eq!(d.len(), 60);
        assert!(d.iter().all(|&v| v == 0.3));

        let ramp: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let d = downsample_force(&ramp).unwrap();
        assert_eq!(d[0], 0.0);
        // 1000/60 = 16.67 rounds to index 17
        assert_eq!(d[1], 17.0);
        assert_eq!(d[59], 983.0);

        assert_eq!(downsample_force(&[4.2]).unwrap(), vec![4.2]);
        assert!(matches!(downsample_force(&[]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn downsample_index_map_by_hand() {
        for len in [1usize, 2, 17, 18, 999, 1000, 1001, 4321] {
            let raw: Vec<f64> = (0..len).map(|i| i as f64).collect();
            let d = downsample_force(&raw).unwrap();
            assert_eq!(d.len(), ((len - 1) as f64 * 60.0 / 1000.0).floor() as usize + 1);
            for (k, v) in d.iter().enumerate() {
                assert_eq!(*v, (k as f64 * 1000.0 / 60.0).round());
            }
        }
    }

    #[test]
    fn median_examples() {
        assert_eq!(causal_median_filter(&[1.0, 1.0, 9.0, 1.0, 1.0]), Some(1.0));
        assert_eq!(causal_median_filter(&[2.0]), Some(2.0));
        assert_eq!(causal_median_filter(&[0.0, 1.0, 2.0, 3.0, 100.0]), Some(2.0));
        assert_eq!(causal_median_filter(&[]), None);
        // only the last five count
        assert_eq!(causal_median_filter(&[50.0, 0.0, 1.0, 2.0, 3.0, 4.0]), Some(2.0));
    }

    #[test]
    fn gaussian_examples() {
        assert!((causal_gaussian_filter(&[0.7; 20]).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(causal_gaussian_filter(&[3.5]), Some(3.5));

        let mut impulse = vec![0.0; 12];
        impulse.push(1.0);
        let norm: f64 = (0..=8).map(|i| (-(i * i) as f64 / 8.0).exp()).sum();
        let expected = 1.0 / norm;
        let got = causal_gaussian_filter(&impulse).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.33260).abs() < 1e-4, "{got}");
    }

    #[test]
    fn streaming_matches_prefix_functions() {
        let raw: Vec<f64> = (0..40).map(|i| ((i * 7919) % 13) as f64 * 0.1).collect();
        let mut med = CausalMedian::new(MEDIAN_WINDOW);
        let mut gau = CausalGaussian::new(GAUSSIAN_SIGMA);
        for t in 1..=raw.len() {
            assert_eq!(med.push(raw[t - 1]), causal_median_filter(&raw[..t]).unwrap());
            let g = gau.push(raw[t - 1]);
            assert!((g - causal_gaussian_filter(&raw[..t]).unwrap()).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn filters_are_causal(
            prefix in prop::collection::vec(-1.0f64..1.0, 1..60),
            tail_a in prop::collection::vec(-5.0f64..5.0, 0..20),
            tail_b in prop::collection::vec(-5.0f64..5.0, 0..20),
        ) {
            let mut a = prefix.clone();
            a.extend(&tail_a);
            let mut b = prefix.clone();
            b.extend(&tail_b);
            let fa = ForceFilter::apply(&a);
            let fb = ForceFilter::apply(&b);
            for t in 0..prefix.len() {
                prop_assert_eq!(fa[t], fb[t]);
            }
        }

        #[test]
        fn filters_stay_within_signal_range(raw in prop::collection::vec(-3.0f64..3.0, 1..80)) {
            let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in ForceFilter::apply(&raw) {
                // convex combinations up to rounding
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }
}
