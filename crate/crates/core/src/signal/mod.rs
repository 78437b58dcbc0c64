//! Trial ingestion, the force-filtering chain, normalisation and the
//! scripted demonstrator.

pub mod demo;
pub mod filter;
pub mod io;
pub mod normalize;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::trial::TrialRecord;

pub use demo::{demonstrate, generate_demo, DemonstratorProfile};
pub use filter::{
    causal_gaussian_filter, causal_median_filter, downsample_force, CausalGaussian, CausalMedian, ForceFilter,
    GAUSSIAN_SIGMA, MEDIAN_WINDOW,
};
pub use io::{format_trial, parse_trial, read_trial, write_trial, Manifest, Split, TRIAL_COLUMNS};
pub use normalize::{
    assemble_features, prepare_all, raw_features, NormalizerStats, PreparedSequence, INPUT_DIM, STD_FLOOR,
};

/// Train share of the demonstration set (221 of 284).
pub const TRAIN_RATIO: f64 = 221.0 / 284.0;

/// Seeded shuffle, then the first round(n·ratio) trials train.
pub fn split_dataset<R: Rng>(
    trials: &[TrialRecord],
    ratio: f64,
    rng: &mut R,
) -> Result<(Vec<TrialRecord>, Vec<TrialRecord>)> {
    if trials.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "splitting needs at least 10 trials, got {}",
            trials.len()
        )));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut order: Vec<usize> = (0..trials.len()).collect();
    order.shuffle(rng);
    let n_train = (trials.len() as f64 * ratio).round() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&k| trials[k].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::ContainerSpec;
    use crate::trial::SourceTag;
    use crate::units::PhysicalConstants;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trials(n: usize) -> Vec<TrialRecord> {
        (0..n)
            .map(|k| {
                TrialRecord::new(
                    ContainerSpec::new("cup", 100.0, 60.0).unwrap(),
                    0.5,
                    0.1 + k as f64 * 1e-3,
                    vec![0.0, 1.0],
                    vec![0.0, 0.0],
                    SourceTag::SyntheticDemo,
                    &PhysicalConstants::default(),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn split_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, b) = split_dataset(&trials(284), TRAIN_RATIO, &mut rng).unwrap();
        assert_eq!((a.len(), b.len()), (221, 63));
        let (a, b) = split_dataset(&trials(10), TRAIN_RATIO, &mut rng).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert!(split_dataset(&trials(9), TRAIN_RATIO, &mut rng).is_err());
    }

    #[test]
    fn split_is_a_seeded_partition() {
        let all = trials(40);
        let (a1, b1) = split_dataset(&all, TRAIN_RATIO, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let (a2, b2) = split_dataset(&all, TRAIN_RATIO, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!((&a1, &b1), (&a2, &b2));
        let mut goals: Vec<f64> = a1.iter().chain(&b1).map(|t| t.f_2pour_lbf).collect();
        goals.sort_by(f64::total_cmp);
        let mut want: Vec<f64> = all.iter().map(|t| t.f_2pour_lbf).collect();
        want.sort_by(f64::total_cmp);
        assert_eq!(goals, want);
    }
}
