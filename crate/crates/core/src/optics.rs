//! Simulated computational ghost imaging: illumination patterns, bucket
//! detection and second-order intensity correlation.
//!
//! The reconstruction evaluates the correlation on the diagonal `ρ = ρ'`:
//!
//! ```text
//! G(ρ) = (1/n) Σ B_i I_i(ρ) − [(1/n) Σ B_i] · [(1/n) Σ I_i(ρ)]
//! ```
//!
//! i.e. the per-pixel population covariance between the bucket readings and
//! the pattern intensity at that pixel.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::image::SceneImage;
use crate::numeric::exact_sum;

/// Statistics of the generated illumination patterns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatternKind {
    /// Equiprobable `{0, 1}` pixels.
    Binary,
    /// `|Normal(0, 1)|` pixels.
    GaussianIntensity,
}

impl PatternKind {
    pub fn code(self) -> u8 {
        match self {
            PatternKind::Binary => 0,
            PatternKind::GaussianIntensity => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(PatternKind::Binary),
            1 => Some(PatternKind::GaussianIntensity),
            _ => None,
        }
    }
}

/// A borrowed intensity map with its dimensions.
#[derive(Clone, Copy, Debug)]
pub struct IntensityMap<'a> {
    pub width: usize,
    pub height: usize,
    pub values: &'a [f64],
}

/// `count` patterns of `width x height` pixels, stored frame-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternSet {
    kind: PatternKind,
    seed: u64,
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl PatternSet {
    /// Assembles a pattern set from raw frame-major data (e.g. after decoding).
    pub fn from_raw(
        kind: PatternKind,
        seed: u64,
        width: usize,
        height: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("pattern dimensions must be nonzero"));
        }
        if data.len() % (width * height) != 0 {
            return Err(Error::mismatch(
                format!("a multiple of {} values", width * height),
                data.len(),
            ));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("pattern intensities must be finite and >= 0"));
        }
        if kind == PatternKind::Binary && data.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("binary patterns must hold only 0 and 1"));
        }
        Ok(PatternSet {
            kind,
            seed,
            width,
            height,
            data,
        })
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.pixel_count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pattern(&self, i: usize) -> IntensityMap<'_> {
        let n = self.pixel_count();
        IntensityMap {
            width: self.width,
            height: self.height,
            values: &self.data[i * n..(i + 1) * n],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = IntensityMap<'_>> {
        (0..self.count()).map(move |i| self.pattern(i))
    }

    /// Frame-major raw intensities.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// The first `n` frames; a prefix of a seeded set is itself reproducible.
    pub fn truncated(&self, n: usize) -> PatternSet {
        let n = n.min(self.count());
        PatternSet {
            data: self.data[..n * self.pixel_count()].to_vec(),
            ..self.clone()
        }
    }

    /// Reorders frames so that frame `i` of the result is frame `order[i]` here.
    pub fn permuted(&self, order: &[usize]) -> PatternSet {
        let data = order
            .iter()
            .flat_map(|&i| self.pattern(i).values.iter().copied())
            .collect();
        PatternSet {
            data,
            ..self.clone()
        }
    }
}

/// Generates `n` patterns, bit-identically for equal `(n, width, height, kind, seed)`.
pub fn generate_patterns(
    n: usize,
    width: usize,
    height: usize,
    kind: PatternKind,
    seed: u64,
) -> Result<PatternSet> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("pattern dimensions must be nonzero"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = n * width * height;
    let data = match kind {
        PatternKind::Binary => {
            let mut data = Vec::with_capacity(len);
            // 64 independent fair bits per draw
            while data.len() < len {
                let bits = rng.next_u64();
                let take = (len - data.len()).min(64);
                data.extend((0..take).map(|b| ((bits >> b) & 1) as f64));
            }
            data
        }
        PatternKind::GaussianIntensity => (0..len)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v.abs()
            })
            .collect(),
    };
    Ok(PatternSet {
        kind,
        seed,
        width,
        height,
        data,
    })
}

/// Patterns made of `grain x grain` pixel cells sharing one random value
/// (cells at the right and bottom edges are clipped).
pub fn generate_speckle_patterns(
    n: usize,
    width: usize,
    height: usize,
    kind: PatternKind,
    grain: usize,
    seed: u64,
) -> Result<PatternSet> {
    if grain == 0 {
        return Err(Error::invalid("speckle grain must be >= 1"));
    }
    if grain == 1 {
        return generate_patterns(n, width, height, kind, seed);
    }
    let cells_w = width.div_ceil(grain);
    let cells_h = height.div_ceil(grain);
    let cells = generate_patterns(n, cells_w, cells_h, kind, seed)?;
    let mut data = Vec::with_capacity(n * width * height);
    for cell_map in cells.iter() {
        for y in 0..height {
            let row = &cell_map.values[(y / grain) * cells_w..(y / grain + 1) * cells_w];
            data.extend((0..width).map(|x| row[x / grain]));
        }
    }
    Ok(PatternSet {
        kind,
        seed,
        width,
        height,
        data,
    })
}

/// One bucket reading `Σ_ρ T(ρ) I(ρ) + η` with `η ~ Normal(0, noise_sigma²)`.
/// No noise is drawn when `noise_sigma == 0`.
pub fn simulate_bucket<R: Rng + ?Sized>(
    scene: &SceneImage,
    pattern: IntensityMap<'_>,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<f64> {
    if pattern.width != scene.width() || pattern.height != scene.height() {
        return Err(Error::mismatch(
            format!("{}x{}", scene.width(), scene.height()),
            format!("{}x{}", pattern.width, pattern.height),
        ));
    }
    let noise = noise_distribution(noise_sigma)?;
    let signal: f64 = scene
        .pixels()
        .iter()
        .zip(pattern.values)
        .map(|(t, i)| t * i)
        .sum();
    Ok(match noise {
        Some(normal) => signal + normal.sample(rng),
        None => signal,
    })
}

fn noise_distribution(noise_sigma: f64) -> Result<Option<Normal<f64>>> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "noise sigma must be finite and >= 0, got {noise_sigma}"
        )));
    }
    Ok((noise_sigma > 0.0).then(|| Normal::new(0.0, noise_sigma).expect("valid sigma")))
}

/// Per-frame bucket detector readings.
#[derive(Clone, Debug, PartialEq)]
pub struct BucketSeries {
    pub values: Vec<f64>,
    pub noise_sigma: f64,
    /// Seed of the pattern set these readings pair with.
    pub pattern_seed: u64,
}

impl BucketSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn truncated(&self, n: usize) -> BucketSeries {
        BucketSeries {
            values: self.values[..n.min(self.values.len())].to_vec(),
            ..self.clone()
        }
    }
}

/// Simulates one bucket reading per pattern, in pattern order.
pub fn acquire<R: Rng + ?Sized>(
    scene: &SceneImage,
    patterns: &PatternSet,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<BucketSeries> {
    noise_distribution(noise_sigma)?;
    let values = patterns
        .iter()
        .map(|p| simulate_bucket(scene, p, noise_sigma, rng))
        .collect::<Result<Vec<f64>>>()?;
    Ok(BucketSeries {
        values,
        noise_sigma,
        pattern_seed: patterns.seed(),
    })
}

/// Real-valued correlation image; may be negative before normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl From<SceneImage> for CorrelationImage {
    fn from(img: SceneImage) -> Self {
        CorrelationImage {
            width: img.width(),
            height: img.height(),
            values: img.into_pixels(),
        }
    }
}

/// Second-order correlation `G(ρ)` of the buckets with the patterns.
///
/// Every sum is correctly rounded, so the result depends only on the set of
/// frames and not on their order.
pub fn reconstruct_cgi(patterns: &PatternSet, buckets: &BucketSeries) -> Result<CorrelationImage> {
    let n = patterns.count();
    if buckets.len() != n {
        return Err(Error::mismatch(format!("{n} bucket values"), buckets.len()));
    }
    if n < 2 {
        return Err(Error::invalid(format!(
            "correlation needs at least 2 frames, got {n}"
        )));
    }
    if buckets.values.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite("bucket values"));
    }
    let mean_bucket = exact_sum(buckets.values.iter().copied()) / n as f64;
    let pixels = patterns.pixel_count();
    let data = patterns.as_slice();
    let mut column = vec![0.0; n];
    let mut weighted = vec![0.0; n];
    let values = (0..pixels)
        .map(|p| {
            for (i, (c, w)) in column.iter_mut().zip(weighted.iter_mut()).enumerate() {
                *c = data[i * pixels + p];
                *w = buckets.values[i] * *c;
            }
            let mean_weighted = exact_sum(weighted.iter().copied()) / n as f64;
            let mean_intensity = exact_sum(column.iter().copied()) / n as f64;
            mean_weighted - mean_bucket * mean_intensity
        })
        .collect();
    Ok(CorrelationImage {
        width: patterns.width(),
        height: patterns.height(),
        values,
    })
}

/// Affine rescale to `[0, 1]` (min to 0, max to 1); a constant image maps to 0.5.
pub fn normalize_image(image: &CorrelationImage) -> Result<SceneImage> {
    if image.values.is_empty() {
        return Err(Error::invalid("cannot normalize an empty image"));
    }
    if image.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation image"));
    }
    let (lo, hi) = image
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let pixels = if hi > lo {
        let range = hi - lo;
        image
            .values
            .iter()
            .map(|&v| ((v - lo) / range).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.5; image.values.len()]
    };
    SceneImage::new(image.width, image.height, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(w: usize, h: usize, px: &[f64]) -> SceneImage {
        SceneImage::new(w, h, px.to_vec()).unwrap()
    }

    #[test]
    fn binary_patterns_are_zero_or_one() {
        let p = generate_patterns(4, 2, 2, PatternKind::Binary, 7).unwrap();
        assert_eq!(p.count(), 4);
        assert!(p.as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn empty_pattern_set() {
        let p = generate_patterns(0, 20, 20, PatternKind::Binary, 1).unwrap();
        assert!(p.is_empty());
        assert_eq!(p.count(), 0);
        assert!(generate_patterns(3, 0, 4, PatternKind::Binary, 1).is_err());
    }

    #[test]
    fn binary_pixel_mean_within_binomial_bound() {
        let p = generate_patterns(1000, 16, 16, PatternKind::Binary, 3).unwrap();
        let draws = p.as_slice().len() as f64;
        let mean = p.as_slice().iter().sum::<f64>() / draws;
        // binomial std of the mean: sqrt(0.25 / draws)
        let bound = 4.0 * (0.25 / draws).sqrt();
        assert!((mean - 0.5).abs() < bound, "mean {mean}, bound {bound}");
    }

    #[test]
    fn gaussian_patterns_are_nonnegative_and_reproducible() {
        let a = generate_patterns(5, 3, 3, PatternKind::GaussianIntensity, 11).unwrap();
        let b = generate_patterns(5, 3, 3, PatternKind::GaussianIntensity, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn bucket_of_zero_scene_is_zero() {
        let p = generate_patterns(1, 3, 3, PatternKind::Binary, 2).unwrap();
        let s = SceneImage::filled(3, 3, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(simulate_bucket(&s, p.pattern(0), 0.0, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn bucket_full_overlap() {
        let s = SceneImage::filled(2, 2, 1.0).unwrap();
        let ones = [1.0; 4];
        let map = IntensityMap { width: 2, height: 2, values: &ones };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(simulate_bucket(&s, map, 0.0, &mut rng).unwrap(), 4.0);
    }

    #[test]
    fn bucket_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let px: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
        let pat: Vec<f64> = (0..16).map(|_| rng.random::<f64>() * 3.0).collect();
        let s = scene(4, 4, &px);
        let mut expected = 0.0;
        for i in 0..16 {
            expected += px[i] * pat[i];
        }
        let map = IntensityMap { width: 4, height: 4, values: &pat };
        assert_eq!(simulate_bucket(&s, map, 0.0, &mut rng).unwrap(), expected);
    }

    #[test]
    fn bucket_dimension_mismatch() {
        let s = SceneImage::filled(4, 4, 1.0).unwrap();
        let v = [1.0; 16];
        let map = IntensityMap { width: 2, height: 8, values: &v };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            simulate_bucket(&s, map, 0.0, &mut rng),
            Err(Error::DimensionMismatch { .. })
        ));
        let map = IntensityMap { width: 4, height: 4, values: &v };
        assert!(simulate_bucket(&s, map, -1.0, &mut rng).is_err());
    }

    #[test]
    fn acquire_matches_individual_buckets() {
        let s = scene(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        let p = generate_patterns(3, 2, 2, PatternKind::GaussianIntensity, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let series = acquire(&s, &p, 0.0, &mut rng).unwrap();
        assert_eq!(series.len(), 3);
        assert_eq!(series.pattern_seed, 5);
        for i in 0..3 {
            assert_eq!(series.values[i], simulate_bucket(&s, p.pattern(i), 0.0, &mut rng).unwrap());
        }
        let empty = generate_patterns(0, 2, 2, PatternKind::Binary, 5).unwrap();
        assert!(acquire(&s, &empty, 0.0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn noisy_acquisition_is_reproducible() {
        let s = SceneImage::from_fn(8, 8, |x, y| ((x + y) % 3) as f64 / 2.0).unwrap();
        let p = generate_patterns(100, 8, 8, PatternKind::Binary, 9).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            acquire(&s, &p, 0.1, &mut rng).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        let clean = acquire(&s, &p, 0.0, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        assert_ne!(a.values, clean.values);
    }

    #[test]
    fn identical_patterns_give_zero_image() {
        let ones = vec![1.0; 4 * 5];
        let p = PatternSet::from_raw(PatternKind::Binary, 0, 2, 2, ones).unwrap();
        let s = scene(2, 2, &[1.0, 0.5, 0.0, 0.25]);
        let b = acquire(&s, &p, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let g = reconstruct_cgi(&p, &b).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_frame_hand_covariance() {
        // P1 = [1,0;0,0], P2 = [0,0;0,1], scene = [1,0;0,0] gives B = (1, 0)
        let data = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let p = PatternSet::from_raw(PatternKind::Binary, 0, 2, 2, data).unwrap();
        let s = scene(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = acquire(&s, &p, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(b.values, vec![1.0, 0.0]);
        let g = reconstruct_cgi(&p, &b).unwrap();
        // pixel 0: mean(B*I) = 0.5, mean(B) = 0.5, mean(I) = 0.5 -> 0.25
        // pixel 3: mean(B*I) = 0,   mean(I) = 0.5            -> -0.25
        assert_eq!(g.values, vec![0.25, 0.0, 0.0, -0.25]);
        let argmax = g
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 0);
    }

    #[test]
    fn correlation_needs_two_frames() {
        let p = generate_patterns(1, 2, 2, PatternKind::Binary, 1).unwrap();
        let b = BucketSeries { values: vec![1.0], noise_sigma: 0.0, pattern_seed: 1 };
        assert!(reconstruct_cgi(&p, &b).is_err());
        let p = generate_patterns(3, 2, 2, PatternKind::Binary, 1).unwrap();
        assert!(reconstruct_cgi(&p, &b).is_err());
    }

    #[test]
    fn delta_scene_peak_is_recovered() {
        for seed in 0..10u64 {
            let bright = (seed as usize * 7) % 64;
            let s = SceneImage::from_fn(8, 8, |x, y| if y * 8 + x == bright { 1.0 } else { 0.0 })
                .unwrap();
            let p = generate_patterns(5000, 8, 8, PatternKind::Binary, seed).unwrap();
            let b = acquire(&s, &p, 0.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let g = reconstruct_cgi(&p, &b).unwrap();
            let argmax = g
                .values
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(argmax, bright, "seed {seed}");
        }
    }

    #[test]
    fn affine_bucket_rescale_scales_correlation() {
        // dyadic values and n = 16 keep every operation exact
        let p = generate_patterns(16, 3, 3, PatternKind::Binary, 21).unwrap();
        let s = SceneImage::from_fn(3, 3, |x, y| ((x + 2 * y) % 4) as f64 / 4.0).unwrap();
        let b = acquire(&s, &p, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let g = reconstruct_cgi(&p, &b).unwrap();
        let shifted = BucketSeries {
            values: b.values.iter().map(|v| 2.0 * v + 3.0).collect(),
            ..b.clone()
        };
        let g2 = reconstruct_cgi(&p, &shifted).unwrap();
        for (a, b) in g2.values.iter().zip(&g.values) {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn normalize_affine_map() {
        let img = CorrelationImage { width: 3, height: 1, values: vec![-2.0, 0.0, 2.0] };
        assert_eq!(normalize_image(&img).unwrap().pixels(), &[0.0, 0.5, 1.0]);
        let flat = CorrelationImage { width: 2, height: 2, values: vec![3.0; 4] };
        assert_eq!(normalize_image(&flat).unwrap().pixels(), &[0.5; 4]);
    }

    #[test]
    fn normalize_is_idempotent() {
        let img = CorrelationImage {
            width: 4,
            height: 2,
            values: vec![0.3, -1.7, 2.2, 9.1, -0.4, 0.0, 1.0, 3.3],
        };
        let once = normalize_image(&img).unwrap();
        let twice = normalize_image(&once.clone().into()).unwrap();
        assert_eq!(once, twice);
    }

    fn two_pass_covariance(p: &PatternSet, b: &BucketSeries) -> Vec<f64> {
        let n = b.len() as f64;
        let mean_b = b.values.iter().sum::<f64>() / n;
        (0..p.pixel_count())
            .map(|k| {
                let mean_i = p.iter().map(|m| m.values[k]).sum::<f64>() / n;
                p.iter()
                    .zip(&b.values)
                    .map(|(m, bv)| (bv - mean_b) * (m.values[k] - mean_i))
                    .sum::<f64>()
                    / n
            })
            .collect()
    }

    #[test]
    fn correlation_matches_two_pass_oracle() {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let s = SceneImage::from_fn(8, 8, |_, _| rng.random::<f64>()).unwrap();
            let kind = if seed % 2 == 0 { PatternKind::Binary } else { PatternKind::GaussianIntensity };
            let p = generate_patterns(1000, 8, 8, kind, seed).unwrap();
            let b = acquire(&s, &p, 0.0, &mut rng).unwrap();
            let g = reconstruct_cgi(&p, &b).unwrap();
            for (a, e) in g.values.iter().zip(two_pass_covariance(&p, &b)) {
                assert!((a - e).abs() < 1e-12, "seed {seed}: {a} vs {e}");
            }
        }
    }

    #[test]
    fn speckle_cells_share_one_value() {
        let p = generate_speckle_patterns(6, 7, 5, PatternKind::GaussianIntensity, 3, 8).unwrap();
        assert_eq!((p.count(), p.width(), p.height()), (6, 7, 5));
        for m in p.iter() {
            for y in 0..5 {
                for x in 0..7 {
                    assert_eq!(m.values[y * 7 + x], m.values[(y / 3 * 3) * 7 + x / 3 * 3]);
                }
            }
        }
        assert_eq!(
            generate_speckle_patterns(4, 5, 5, PatternKind::Binary, 1, 2).unwrap(),
            generate_patterns(4, 5, 5, PatternKind::Binary, 2).unwrap()
        );
        assert!(generate_speckle_patterns(4, 5, 5, PatternKind::Binary, 0, 2).is_err());
    }

}
