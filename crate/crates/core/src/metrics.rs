//! Full-reference image quality: PSNR and mean windowed SSIM.

use crate::error::{Error, Result};
use crate::image::SceneImage;
use crate::numeric::exact_sum;

/// Dynamic range of `[0, 1]` images.
pub const DYNAMIC_RANGE: f64 = 1.0;
pub const SSIM_WINDOW: usize = 8;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Mean squared error between two equally sized images.
pub fn mse(a: &SceneImage, b: &SceneImage) -> Result<f64> {
    a.same_shape(b)?;
    // correctly rounded, so any pixel permutation applied to both gives the same value
    let sum = exact_sum(
        a.pixels()
            .iter()
            .zip(b.pixels())
            .map(|(x, y)| (x - y) * (x - y)),
    );
    Ok(sum / a.len() as f64)
}

/// `10 log10(L² / MSE)` in dB with `L = 1`; identical images give `+inf`.
pub fn psnr(a: &SceneImage, b: &SceneImage) -> Result<f64> {
    let err = mse(a, b)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (DYNAMIC_RANGE * DYNAMIC_RANGE / err).log10())
}

/// SSIM with the default 8x8 uniform window, `K1 = 0.01`, `K2 = 0.03`.
pub fn ssim_default(a: &SceneImage, b: &SceneImage) -> Result<f64> {
    ssim(a, b, SSIM_WINDOW, SSIM_K1, SSIM_K2)
}

/// Mean of the local SSIM over every `window x window` position (stride 1).
///
/// Local statistics use the uniform window with population (1/N) moments.
pub fn ssim(a: &SceneImage, b: &SceneImage, window: usize, k1: f64, k2: f64) -> Result<f64> {
    a.same_shape(b)?;
    if window == 0 || window > a.width() || window > a.height() {
        return Err(Error::invalid(format!(
            "window {window} does not fit a {}x{} image",
            a.width(),
            a.height()
        )));
    }
    let c1 = (k1 * DYNAMIC_RANGE).powi(2);
    let c2 = (k2 * DYNAMIC_RANGE).powi(2);
    let (w, h) = (a.width(), a.height());
    let pa = a.pixels();
    let pb = b.pixels();
    let sa = SummedArea::new(w, h, |i| pa[i]);
    let sb = SummedArea::new(w, h, |i| pb[i]);
    let saa = SummedArea::new(w, h, |i| pa[i] * pa[i]);
    let sbb = SummedArea::new(w, h, |i| pb[i] * pb[i]);
    let sab = SummedArea::new(w, h, |i| pa[i] * pb[i]);
    let count = (window * window) as f64;
    let mut total = 0.0;
    let positions = (w - window + 1) * (h - window + 1);
    for y in 0..=h - window {
        for x in 0..=w - window {
            let mu_a = sa.window(x, y, window) / count;
            let mu_b = sb.window(x, y, window) / count;
            let var_a = sa_var(saa.window(x, y, window) / count, mu_a);
            let var_b = sa_var(sbb.window(x, y, window) / count, mu_b);
            let cov = sab.window(x, y, window) / count - mu_a * mu_b;
            total += local_ssim(mu_a, mu_b, var_a, var_b, cov, c1, c2);
        }
    }
    Ok(total / positions as f64)
}

fn sa_var(mean_sq: f64, mean: f64) -> f64 {
    mean_sq - mean * mean
}

fn local_ssim(mu_a: f64, mu_b: f64, var_a: f64, var_b: f64, cov: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
        / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
}

/// Inclusive prefix sums with a zero border row and column.
struct SummedArea {
    width: usize,
    table: Vec<f64>,
}

impl SummedArea {
    fn new(width: usize, height: usize, value: impl Fn(usize) -> f64) -> Self {
        let stride = width + 1;
        let mut table = vec![0.0; stride * (height + 1)];
        for y in 0..height {
            let mut row = 0.0;
            for x in 0..width {
                row += value(y * width + x);
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
            }
        }
        SummedArea { width, table }
    }

    fn window(&self, x: usize, y: usize, size: usize) -> f64 {
        let s = self.width + 1;
        let t = &self.table;
        t[(y + size) * s + x + size] - t[y * s + x + size] - t[(y + size) * s + x] + t[y * s + x]
    }
}

/// Quality of one reconstruction.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub frame_count: usize,
    pub algorithm: String,
}

impl MetricReport {
    pub fn evaluate(
        reference: &SceneImage,
        reconstruction: &SceneImage,
        frame_count: usize,
        algorithm: impl Into<String>,
    ) -> Result<Self> {
        Ok(MetricReport {
            psnr: psnr(reference, reconstruction)?,
            ssim: ssim_default(reference, reconstruction)?,
            frame_count,
            algorithm: algorithm.into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn random_image(w: usize, h: usize, seed: u64) -> SceneImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SceneImage::from_fn(w, h, |_, _| rng.random::<f64>()).unwrap()
    }

    fn rotate90(img: &SceneImage) -> SceneImage {
        let n = img.width();
        SceneImage::from_fn(n, n, |x, y| img.get(y, n - 1 - x)).unwrap()
    }

    #[test]
    fn psnr_analytic_values() {
        let zero = SceneImage::filled(4, 4, 0.0).unwrap();
        let one = SceneImage::filled(4, 4, 1.0).unwrap();
        let half = SceneImage::filled(4, 4, 0.5).unwrap();
        assert_eq!(psnr(&zero, &zero).unwrap(), f64::INFINITY);
        assert!((psnr(&zero, &one).unwrap() - 0.0).abs() < 1e-9);
        assert!((psnr(&zero, &half).unwrap() - 10.0 * 4f64.log10()).abs() < 1e-9);
        assert!((psnr(&zero, &half).unwrap() - 6.0206).abs() < 1e-4);
        assert!(psnr(&zero, &SceneImage::filled(4, 2, 0.0).unwrap()).is_err());
    }

    #[test]
    fn ssim_of_identical_images_is_one() {
        let a = random_image(32, 32, 1);
        assert_eq!(ssim_default(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn ssim_of_constant_images() {
        let (p, q) = (0.2, 0.7);
        let a = SceneImage::filled(16, 16, p).unwrap();
        let b = SceneImage::filled(16, 16, q).unwrap();
        let c1 = (SSIM_K1 * DYNAMIC_RANGE).powi(2);
        let expected = (2.0 * p * q + c1) / (p * p + q * q + c1);
        assert!((ssim_default(&a, &b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded() {
        let a = random_image(20, 24, 2);
        let b = random_image(20, 24, 3);
        let ab = ssim_default(&a, &b).unwrap();
        assert_eq!(ab, ssim_default(&b, &a).unwrap());
        assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn ssim_rejects_oversized_window() {
        let a = random_image(6, 6, 2);
        assert!(ssim(&a, &a, 7, SSIM_K1, SSIM_K2).is_err());
        assert!(ssim(&a, &a, 0, SSIM_K1, SSIM_K2).is_err());
    }

    #[test]
    fn metrics_survive_square_rotation() {
        let a = random_image(16, 16, 4);
        let b = random_image(16, 16, 5);
        let (ra, rb) = (rotate90(&a), rotate90(&b));
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&ra, &rb).unwrap());
        assert!((ssim_default(&a, &b).unwrap() - ssim_default(&ra, &rb).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn psnr_falls_as_noise_grows() {
        let base = SceneImage::from_fn(32, 32, |x, y| 0.25 + 0.5 * (((x / 4) + (y / 4)) % 2) as f64)
            .unwrap();
        let mean_psnr = |sigma: f64| {
            let total: f64 = (0..10u64)
                .map(|seed| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let noise = Normal::new(0.0, sigma).unwrap();
                    let noisy: Vec<f64> =
                        base.pixels().iter().map(|p| p + noise.sample(&mut rng)).collect();
                    let noisy = SceneImage::from_clamped(32, 32, noisy).unwrap();
                    psnr(&base, &noisy).unwrap()
                })
                .sum();
            total / 10.0
        };
        let values: Vec<f64> = [0.01, 0.05, 0.1].iter().map(|&s| mean_psnr(s)).collect();
        assert!(values[0] > values[1] && values[1] > values[2], "{values:?}");
    }

    fn naive_ssim(a: &SceneImage, b: &SceneImage, win: usize) -> f64 {
        let c1 = (SSIM_K1 * DYNAMIC_RANGE).powi(2);
        let c2 = (SSIM_K2 * DYNAMIC_RANGE).powi(2);
        let n = (win * win) as f64;
        let mut local = Vec::new();
        for y0 in 0..=a.height() - win {
            for x0 in 0..=a.width() - win {
                let cells: Vec<(f64, f64)> = (0..win * win)
                    .map(|k| (a.get(x0 + k % win, y0 + k / win), b.get(x0 + k % win, y0 + k / win)))
                    .collect();
                let ma = cells.iter().map(|c| c.0).sum::<f64>() / n;
                let mb = cells.iter().map(|c| c.1).sum::<f64>() / n;
                let va = cells.iter().map(|c| (c.0 - ma).powi(2)).sum::<f64>() / n;
                let vb = cells.iter().map(|c| (c.1 - mb).powi(2)).sum::<f64>() / n;
                let cov = cells.iter().map(|c| (c.0 - ma) * (c.1 - mb)).sum::<f64>() / n;
                local.push(
                    ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                        / ((ma * ma + mb * mb + c1) * (va + vb + c2)),
                );
            }
        }
        local.iter().sum::<f64>() / local.len() as f64
    }

    #[test]
    fn ssim_matches_naive_window_oracle() {
        for seed in 0..5 {
            let a = random_image(32, 32, 10 + seed);
            let b = random_image(32, 32, 20 + seed);
            let got = ssim_default(&a, &b).unwrap();
            assert!((got - naive_ssim(&a, &b, SSIM_WINDOW)).abs() < 1e-10);
            let blend = SceneImage::from_fn(32, 32, |x, y| 0.7 * a.get(x, y) + 0.3 * b.get(x, y))
                .unwrap();
            let got = ssim(&a, &blend, 5, SSIM_K1, SSIM_K2).unwrap();
            assert!((got - naive_ssim(&a, &blend, 5)).abs() < 1e-10);
        }
    }

}
