//! Block compressed sensing and the whole-image CS ghost imaging baseline.

mod blocks;
mod dct;
mod ista;
mod measurement;

pub use blocks::{devectorize, partition, reassemble, vectorize, BlockGrid, BlockVector, ImageBlock};
pub use dct::Dct2d;
pub use ista::{IstaOutcome, IstaSolver, SensingMatrix, LIPSCHITZ_MARGIN, POWER_ITERATIONS};
pub use measurement::{
    measure, sample_measurement_matrix, second_stage_compress, MeasurementMatrix,
    MeasurementVector,
};

use crate::error::{Error, Result};
use crate::image::SceneImage;
use crate::optics::{normalize_image, BucketSeries, CorrelationImage, PatternSet};

/// Default ISTA iteration count.
pub const DEFAULT_ITERATIONS: usize = 500;

/// Sensing system for ghost-imaging data.
///
/// Rows are the patterns centred on their ensemble mean, plus one row holding
/// the mean pattern itself; the right-hand side is centred the same way. For
/// noiseless data this has exactly the solution set of `patterns · x =
/// buckets`, but without the dominant mean direction that makes raw `{0, 1}`
/// patterns badly conditioned for a fixed-step method.
pub fn cs_gi_system(
    patterns: &PatternSet,
    buckets: &BucketSeries,
) -> Result<(SensingMatrix, Vec<f64>)> {
    let n = patterns.count();
    if n == 0 {
        return Err(Error::invalid("compressed sensing needs at least one frame"));
    }
    if buckets.len() != n {
        return Err(Error::mismatch(format!("{n} bucket values"), buckets.len()));
    }
    let cols = patterns.pixel_count();
    let mut mean_pattern = vec![0.0; cols];
    for p in patterns.iter() {
        for (m, v) in mean_pattern.iter_mut().zip(p.values) {
            *m += v;
        }
    }
    mean_pattern.iter_mut().for_each(|m| *m /= n as f64);
    let mean_bucket = buckets.values.iter().sum::<f64>() / n as f64;

    let mut entries = Vec::with_capacity((n + 1) * cols);
    for p in patterns.iter() {
        entries.extend(p.values.iter().zip(&mean_pattern).map(|(v, m)| v - m));
    }
    entries.extend_from_slice(&mean_pattern);
    let mut rhs: Vec<f64> = buckets.values.iter().map(|b| b - mean_bucket).collect();
    rhs.push(mean_bucket);
    Ok((SensingMatrix::new(n + 1, cols, entries)?, rhs))
}

/// Runs ISTA on ghost-imaging data and returns the raw (unnormalized) outcome.
pub fn cs_gi_estimate(
    patterns: &PatternSet,
    buckets: &BucketSeries,
    lambda: f64,
    iterations: usize,
) -> Result<IstaOutcome> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("sparsity weight must be >= 0, got {lambda}")));
    }
    let (a, y) = cs_gi_system(patterns, buckets)?;
    IstaSolver::new(&a, patterns.width(), patterns.height())?.solve(&y, lambda, iterations)
}

/// CS ghost imaging reconstruction, normalized to `[0, 1]`.
pub fn cs_gi_reconstruct(
    patterns: &PatternSet,
    buckets: &BucketSeries,
    lambda: f64,
    iterations: usize,
) -> Result<SceneImage> {
    let outcome = cs_gi_estimate(patterns, buckets, lambda, iterations)?;
    normalize_image(&CorrelationImage {
        width: patterns.width(),
        height: patterns.height(),
        values: outcome.estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{acquire, generate_patterns, PatternKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_buckets_give_zero_estimate() {
        let p = generate_patterns(20, 6, 6, PatternKind::Binary, 1).unwrap();
        let b = BucketSeries { values: vec![0.0; 20], noise_sigma: 0.0, pattern_seed: 1 };
        let out = cs_gi_estimate(&p, &b, 0.5, 50).unwrap();
        assert!(out.estimate.iter().all(|&v| v == 0.0));
        assert_eq!(cs_gi_reconstruct(&p, &b, 0.5, 50).unwrap().pixels(), &[0.5; 36]);
    }

    #[test]
    fn rejects_negative_weight_and_empty_data() {
        let p = generate_patterns(4, 2, 2, PatternKind::Binary, 1).unwrap();
        let b = BucketSeries { values: vec![1.0; 4], noise_sigma: 0.0, pattern_seed: 1 };
        assert!(cs_gi_estimate(&p, &b, -1.0, 5).is_err());
        let empty = generate_patterns(0, 2, 2, PatternKind::Binary, 1).unwrap();
        let none = BucketSeries { values: vec![], noise_sigma: 0.0, pattern_seed: 1 };
        assert!(cs_gi_estimate(&empty, &none, 1.0, 5).is_err());
        let out = cs_gi_estimate(&p, &b, 0.1, 0).unwrap();
        assert_eq!(out.estimate, vec![0.0; 4]);
    }

    #[test]
    fn centred_system_is_consistent_with_raw_data() {
        let p = generate_patterns(10, 4, 4, PatternKind::Binary, 3).unwrap();
        let s = SceneImage::from_fn(4, 4, |x, y| ((x + y) % 2) as f64).unwrap();
        let b = acquire(&s, &p, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let (a, y) = cs_gi_system(&p, &b).unwrap();
        for (lhs, rhs) in a.apply(s.pixels()).iter().zip(&y) {
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = SceneImage::from_fn(12, 12, |_, _| 0.0).unwrap();
        let p = generate_patterns(60, 12, 12, PatternKind::Binary, 8).unwrap();
        let mut b = acquire(&s, &p, 0.0, &mut rng).unwrap();
        b.values.iter_mut().for_each(|v| *v = rng.random::<f64>() * 10.0);
        let out = cs_gi_estimate(&p, &b, 0.3, 200).unwrap();
        for w in out.objective.windows(2) {
            // monotone up to round-off in evaluating the objective
            assert!(w[1] <= w[0] * (1.0 + 1e-13), "{} > {}", w[1], w[0]);
        }
    }
}
