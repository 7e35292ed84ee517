use crate::numeric::gemm;

/// Orthonormal 2-D DCT-II on `height x width` row-major images.
#[derive(Clone, Debug)]
pub struct Dct2d {
    width: usize,
    height: usize,
    basis_w: Vec<f64>,
    basis_h: Vec<f64>,
}

/// Orthonormal DCT-II matrix, row `k` is the `k`-th cosine.
fn basis(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for k in 0..n {
        let alpha = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for i in 0..n {
            m[k * n + i] =
                alpha * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
        }
    }
    m
}

impl Dct2d {
    pub fn new(width: usize, height: usize) -> Self {
        Dct2d {
            width,
            height,
            basis_w: basis(width),
            basis_h: basis(height),
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coefficients `C_h X C_wᵀ`.
    pub fn forward(&self, image: &[f64]) -> Vec<f64> {
        let (h, w) = (self.height, self.width);
        let mut tmp = vec![0.0; h * w];
        gemm(h, h, w, 1.0, &self.basis_h, false, image, false, 0.0, &mut tmp);
        let mut out = vec![0.0; h * w];
        gemm(h, w, w, 1.0, &tmp, false, &self.basis_w, true, 0.0, &mut out);
        out
    }

    /// Image `C_hᵀ Z C_w`.
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let (h, w) = (self.height, self.width);
        let mut tmp = vec![0.0; h * w];
        gemm(h, h, w, 1.0, &self.basis_h, true, coeffs, false, 0.0, &mut tmp);
        let mut out = vec![0.0; h * w];
        gemm(h, w, w, 1.0, &tmp, false, &self.basis_w, false, 0.0, &mut out);
        out
    }
}
