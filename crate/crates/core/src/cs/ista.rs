//! Iterative shrinkage-thresholding for `½‖Ax − y‖² + λ‖Ψx‖₁` with `Ψ` the
//! orthonormal 2-D cosine transform.

use super::dct::Dct2d;
use crate::error::{Error, Result};
use crate::numeric::gemm;

/// Power-iteration steps used to estimate the Lipschitz constant `‖AᵀA‖`.
pub const POWER_ITERATIONS: usize = 50;
/// Headroom on the power-iteration estimate, which approaches `‖AᵀA‖` from below.
pub const LIPSCHITZ_MARGIN: f64 = 1.01;

/// Dense row-major sensing operator.
#[derive(Clone, Debug, PartialEq)]
pub struct SensingMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
}

impl SensingMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::mismatch(rows * cols, entries.len()));
        }
        Ok(SensingMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        gemm(self.rows, self.cols, 1, 1.0, &self.entries, false, x, false, 0.0, &mut out);
        out
    }

    pub fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        gemm(self.cols, self.rows, 1, 1.0, &self.entries, true, r, false, 0.0, &mut out);
        out
    }
}

/// Result of an ISTA run.
#[derive(Clone, Debug)]
pub struct IstaOutcome {
    /// Final estimate in the image domain, row-major.
    pub estimate: Vec<f64>,
    /// Objective at the zero start and after every iteration.
    pub objective: Vec<f64>,
    pub lipschitz: f64,
}

/// ISTA with fixed step `1/L` on a fixed sensing matrix and image shape.
pub struct IstaSolver<'a> {
    a: &'a SensingMatrix,
    dct: Dct2d,
    lipschitz: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

impl<'a> IstaSolver<'a> {
    pub fn new(a: &'a SensingMatrix, width: usize, height: usize) -> Result<Self> {
        if width * height != a.cols || a.cols == 0 {
            return Err(Error::mismatch(
                format!("{} columns ({width}x{height})", width * height),
                a.cols,
            ));
        }
        let lipschitz = estimate_lipschitz(a) * LIPSCHITZ_MARGIN;
        Ok(IstaSolver {
            a,
            dct: Dct2d::new(width, height),
            lipschitz,
        })
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Smallest `λ` for which the zero image is optimal: `‖Ψ Aᵀ y‖∞`.
    pub fn lambda_max(&self, y: &[f64]) -> f64 {
        self.dct
            .forward(&self.a.apply_transpose(y))
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn objective(&self, x: &[f64], y: &[f64], lambda: f64) -> f64 {
        let residual: Vec<f64> = self.a.apply(x).iter().zip(y).map(|(p, q)| p - q).collect();
        let l1: f64 = self.dct.forward(x).iter().map(|c| c.abs()).sum();
        0.5 * residual.iter().map(|r| r * r).sum::<f64>() + lambda * l1
    }

    /// One proximal-gradient step `x ← Ψᵀ soft(Ψ(x − Aᵀ(Ax − y)/L), λ/L)`.
    pub fn step(&self, x: &[f64], y: &[f64], lambda: f64) -> Vec<f64> {
        let residual: Vec<f64> = self.a.apply(x).iter().zip(y).map(|(p, q)| p - q).collect();
        let grad = self.a.apply_transpose(&residual);
        let moved: Vec<f64> = x
            .iter()
            .zip(&grad)
            .map(|(xi, g)| xi - g / self.lipschitz)
            .collect();
        let threshold = lambda / self.lipschitz;
        let coeffs: Vec<f64> = self
            .dct
            .forward(&moved)
            .into_iter()
            .map(|c| soft_threshold(c, threshold))
            .collect();
        self.dct.inverse(&coeffs)
    }

    /// Runs `iterations` steps from the zero image.
    pub fn solve(&self, y: &[f64], lambda: f64, iterations: usize) -> Result<IstaOutcome> {
        if y.len() != self.a.rows {
            return Err(Error::mismatch(self.a.rows, y.len()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("sparsity weight must be >= 0, got {lambda}")));
        }
        let mut x = vec![0.0; self.a.cols];
        let mut objective = Vec::with_capacity(iterations + 1);
        objective.push(self.objective(&x, y, lambda));
        for _ in 0..iterations {
            x = self.step(&x, y, lambda);
            objective.push(self.objective(&x, y, lambda));
        }
        Ok(IstaOutcome {
            estimate: x,
            objective,
            lipschitz: self.lipschitz,
        })
    }
}

/// Largest eigenvalue of `AᵀA` by power iteration from a fixed start vector.
fn estimate_lipschitz(a: &SensingMatrix) -> f64 {
    let mut v: Vec<f64> = (0..a.cols).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = a.apply_transpose(&a.apply(&v));
        estimate = norm(&w);
        if estimate == 0.0 {
            break;
        }
        v = w.into_iter().map(|x| x / estimate).collect();
    }
    // the all-zero operator still needs a positive step
    estimate.max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_zero_step_is_gradient_descent() {
        // 3 x 4 system on a 2 x 2 image
        let a = SensingMatrix::new(
            3,
            4,
            vec![1.0, 2.0, 0.0, -1.0, 0.5, 0.0, 1.0, 1.0, -1.0, 1.0, 2.0, 0.0],
        )
        .unwrap();
        let y = [1.0, -2.0, 0.5];
        let x0 = [0.2, -0.1, 0.4, 0.3];
        let solver = IstaSolver::new(&a, 2, 2).unwrap();
        let l = solver.lipschitz();
        // Ax0 = (0.2-0.2-0.3, 0.1+0.4+0.3, -0.2-0.1+0.8) = (-0.3, 0.8, 0.5)
        // r = Ax0 - y = (-1.3, 2.8, 0.0)
        // Aᵀr = (-1.3+1.4, -2.6, 2.8, 1.3+2.8) = (0.1, -2.6, 2.8, 4.1)
        let grad = [0.1, -2.6, 2.8, 4.1];
        let expected: Vec<f64> = x0.iter().zip(grad).map(|(x, g)| x - g / l).collect();
        let got = solver.step(&x0, &y, 0.0);
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn lipschitz_bounds_the_spectrum() {
        let a = SensingMatrix::new(2, 2, vec![3.0, 0.0, 0.0, 1.0]).unwrap();
        let solver = IstaSolver::new(&a, 2, 1).unwrap();
        assert!(solver.lipschitz() >= 9.0);
        assert!(solver.lipschitz() <= 9.0 * LIPSCHITZ_MARGIN + 1e-9);
    }

    #[test]
    fn zero_iterations_and_zero_data() {
        let a = SensingMatrix::new(2, 4, vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        let solver = IstaSolver::new(&a, 2, 2).unwrap();
        let out = solver.solve(&[1.0, 2.0], 0.1, 0).unwrap();
        assert_eq!(out.estimate, vec![0.0; 4]);
        let out = solver.solve(&[0.0, 0.0], 0.1, 20).unwrap();
        assert!(out.estimate.iter().all(|&v| v == 0.0));
        assert!(solver.solve(&[1.0, 2.0], -0.5, 3).is_err());
    }
}
