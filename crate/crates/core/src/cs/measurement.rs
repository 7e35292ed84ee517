use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::blocks::BlockVector;
use crate::error::{Error, Result};

/// Dense `rows x cols` Gaussian sensing operator, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementMatrix {
    rows: usize,
    cols: usize,
    seed: u64,
    scale: f64,
    entries: Vec<f64>,
}

/// A measurement `y = φx`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementVector {
    pub values: Vec<f64>,
}

impl MeasurementMatrix {
    /// Wraps explicit entries, e.g. decoded from disk.
    pub fn from_entries(
        rows: usize,
        cols: usize,
        seed: u64,
        scale: f64,
        entries: Vec<f64>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("measurement matrix needs nonzero dimensions"));
        }
        if entries.len() != rows * cols {
            return Err(Error::mismatch(rows * cols, entries.len()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("measurement matrix"));
        }
        Ok(MeasurementMatrix {
            rows,
            cols,
            seed,
            scale,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Standard deviation of the entries.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::mismatch(self.cols, x.len()));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// The product `self · rhs`.
    pub fn compose(&self, rhs: &MeasurementMatrix) -> Result<MeasurementMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::mismatch(self.cols, rhs.rows));
        }
        let mut entries = vec![0.0; self.rows * rhs.cols];
        crate::numeric::gemm(
            self.rows,
            self.cols,
            rhs.cols,
            1.0,
            &self.entries,
            false,
            &rhs.entries,
            false,
            0.0,
            &mut entries,
        );
        Ok(MeasurementMatrix {
            rows: self.rows,
            cols: rhs.cols,
            seed: self.seed,
            scale: self.scale * rhs.scale,
            entries,
        })
    }
}

/// `rows x cols` matrix with i.i.d. `Normal(0, 1/rows)` entries.
pub fn sample_measurement_matrix(rows: usize, cols: usize, seed: u64) -> Result<MeasurementMatrix> {
    if rows == 0 || rows > cols {
        return Err(Error::invalid(format!(
            "measurement matrix needs 1 <= M <= N, got {rows}x{cols}"
        )));
    }
    let scale = 1.0 / (rows as f64).sqrt();
    let normal = Normal::new(0.0, scale).expect("valid scale");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = (0..rows * cols).map(|_| normal.sample(&mut rng)).collect();
    Ok(MeasurementMatrix {
        rows,
        cols,
        seed,
        scale,
        entries,
    })
}

pub fn measure(phi: &MeasurementMatrix, x: &BlockVector) -> Result<MeasurementVector> {
    Ok(MeasurementVector {
        values: phi.apply(&x.values)?,
    })
}

/// Re-measures an existing measurement vector, e.g. 100 -> 50 dimensions.
pub fn second_stage_compress(
    y: &MeasurementVector,
    phi2: &MeasurementMatrix,
) -> Result<MeasurementVector> {
    Ok(MeasurementVector {
        values: phi2.apply(&y.values)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn block(values: Vec<f64>) -> BlockVector {
        BlockVector { values, block_index: (0, 0) }
    }

    fn naive(rows: usize, cols: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; rows];
        for i in 0..rows {
            for j in 0..cols {
                y[i] += a[i * cols + j] * x[j];
            }
        }
        y
    }

    #[test]
    fn standard_shape_and_determinism() {
        let a = sample_measurement_matrix(100, 400, 9).unwrap();
        assert_eq!((a.rows(), a.cols()), (100, 400));
        assert_eq!(a, sample_measurement_matrix(100, 400, 9).unwrap());
        assert!(sample_measurement_matrix(401, 400, 9).is_err());
        assert!(sample_measurement_matrix(0, 400, 9).is_err());
    }

    #[test]
    fn column_norms_are_near_one() {
        let m = 100;
        let a = sample_measurement_matrix(m, 400, 4).unwrap();
        let norms: Vec<f64> = (0..400)
            .map(|j| (0..m).map(|i| a.entries()[i * 400 + j].powi(2)).sum::<f64>().sqrt())
            .collect();
        let mean = norms.iter().sum::<f64>() / 400.0;
        // each norm is chi(M)/sqrt(M): mean ~ 1 - 1/(4M), std ~ 1/sqrt(2M)
        let expected = 1.0 - 1.0 / (4.0 * m as f64);
        let std_of_mean = (1.0 / (2.0 * m as f64)).sqrt() / (400f64).sqrt();
        assert!((mean - expected).abs() < 5.0 * std_of_mean, "mean {mean}");
    }

    #[test]
    fn zero_maps_to_zero() {
        let a = sample_measurement_matrix(100, 400, 1).unwrap();
        let y = measure(&a, &block(vec![0.0; 400])).unwrap();
        assert!(y.values.iter().all(|&v| v == 0.0));
        assert!(measure(&a, &block(vec![0.0; 399])).is_err());
    }

    #[test]
    fn matches_naive_multiply_exactly() {
        let a = sample_measurement_matrix(5, 8, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let y = measure(&a, &block(x.clone())).unwrap();
        assert_eq!(y.values, naive(5, 8, a.entries(), &x));
    }

    #[test]
    fn measurement_is_linear() {
        let a = sample_measurement_matrix(100, 400, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x1: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
        let x2: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
        let (ca, cb) = (0.7, -1.3);
        let mix: Vec<f64> = x1.iter().zip(&x2).map(|(p, q)| ca * p + cb * q).collect();
        let lhs = measure(&a, &block(mix)).unwrap();
        let y1 = measure(&a, &block(x1)).unwrap();
        let y2 = measure(&a, &block(x2)).unwrap();
        for i in 0..100 {
            assert!((lhs.values[i] - (ca * y1.values[i] + cb * y2.values[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn second_stage_reaches_fifty_dimensions() {
        let phi1 = sample_measurement_matrix(100, 400, 1).unwrap();
        let phi2 = sample_measurement_matrix(50, 100, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
        let y = measure(&phi1, &block(x.clone())).unwrap();
        let y2 = second_stage_compress(&y, &phi2).unwrap();
        assert_eq!(y2.values.len(), 50);
        let zero = second_stage_compress(&MeasurementVector { values: vec![0.0; 100] }, &phi2).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));

        // (φ2 φ1) x via a naive product, independent of `compose`
        let mut combined = vec![0.0; 50 * 400];
        for i in 0..50 {
            for j in 0..400 {
                for k in 0..100 {
                    combined[i * 400 + j] += phi2.entries()[i * 100 + k] * phi1.entries()[k * 400 + j];
                }
            }
        }
        let direct = naive(50, 400, &combined, &x);
        for (a, b) in y2.values.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10);
        }
        let composed = phi2.compose(&phi1).unwrap();
        assert_eq!((composed.rows(), composed.cols()), (50, 400));
    }
}
