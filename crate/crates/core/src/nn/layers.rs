//! Dense and same-padded convolution layers with their analytic backward passes.

use crate::numeric::gemm;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    pub(crate) fn apply(self, values: &mut [f64]) {
        if self == Activation::Relu {
            for v in values {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }

    /// Turns a gradient w.r.t. the activated output into one w.r.t. the pre-activation.
    pub(crate) fn backprop(self, output: &[f64], grad: &mut [f64]) {
        if self == Activation::Relu {
            for (g, &o) in grad.iter_mut().zip(output) {
                if o <= 0.0 {
                    *g = 0.0;
                }
            }
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Linear => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Linear),
            _ => None,
        }
    }
}

/// Fully connected layer, `weights` is `outputs x inputs` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        gemm(self.outputs, self.inputs, 1, 1.0, &self.weights, false, x, false, 1.0, &mut out);
        self.activation.apply(&mut out);
        out
    }

    /// `grad` enters as dL/d(output) and leaves as dL/d(pre-activation).
    pub(crate) fn backward(
        &self,
        x: &[f64],
        output: &[f64],
        grad: &mut [f64],
        acc: &mut DenseLayer,
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        self.activation.backprop(output, grad);
        for (b, g) in acc.bias.iter_mut().zip(grad.iter()) {
            *b += g;
        }
        gemm(self.outputs, 1, self.inputs, 1.0, grad, false, x, false, 1.0, &mut acc.weights);
        want_input_grad.then(|| {
            let mut gx = vec![0.0; self.inputs];
            gemm(self.inputs, self.outputs, 1, 1.0, &self.weights, true, grad, false, 0.0, &mut gx);
            gx
        })
    }
}

/// Square-kernel convolution with zero padding `(k - 1) / 2`, so a `side x side`
/// input yields `side x side` feature maps. `weights` is laid out
/// `out_channels x in_channels x k x k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl ConvLayer {
    pub fn zeros(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        activation: Activation,
    ) -> Self {
        ConvLayer {
            in_channels,
            out_channels,
            kernel_size,
            weights: vec![0.0; out_channels * in_channels * kernel_size * kernel_size],
            bias: vec![0.0; out_channels],
            activation,
        }
    }

    pub fn padding(&self) -> usize {
        (self.kernel_size - 1) / 2
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_size * self.kernel_size
    }

    /// Unrolls the input into a `(in_channels*k*k) x side²` patch matrix.
    /// Returns `None` for 1x1 kernels, whose patch matrix is the input itself.
    pub(crate) fn im2col(&self, side: usize, input: &[f64]) -> Option<Vec<f64>> {
        let k = self.kernel_size;
        if k == 1 {
            return None;
        }
        let p = self.padding();
        let area = side * side;
        let mut cols = vec![0.0; self.patch_len() * area];
        for c in 0..self.in_channels {
            let plane = &input[c * area..(c + 1) * area];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let dst = &mut cols[row * area..(row + 1) * area];
                    let x_lo = p.saturating_sub(kx);
                    let x_hi = (side + p).saturating_sub(kx).min(side);
                    if x_lo >= x_hi {
                        continue;
                    }
                    for y in 0..side {
                        let iy = y + ky;
                        if iy < p || iy - p >= side {
                            continue;
                        }
                        let src_row = &plane[(iy - p) * side..(iy - p + 1) * side];
                        let src_lo = x_lo + kx - p;
                        dst[y * side + x_lo..y * side + x_hi]
                            .copy_from_slice(&src_row[src_lo..src_lo + (x_hi - x_lo)]);
                    }
                }
            }
        }
        Some(cols)
    }

    fn col2im(&self, side: usize, cols: &[f64]) -> Vec<f64> {
        let k = self.kernel_size;
        let p = self.padding();
        let area = side * side;
        let mut input = vec![0.0; self.in_channels * area];
        for c in 0..self.in_channels {
            let plane = &mut input[c * area..(c + 1) * area];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let src = &cols[row * area..(row + 1) * area];
                    let x_lo = p.saturating_sub(kx);
                    let x_hi = (side + p).saturating_sub(kx).min(side);
                    if x_lo >= x_hi {
                        continue;
                    }
                    for y in 0..side {
                        let iy = y + ky;
                        if iy < p || iy - p >= side {
                            continue;
                        }
                        let dst_row = &mut plane[(iy - p) * side..(iy - p + 1) * side];
                        let dst_lo = x_lo + kx - p;
                        for (d, s) in dst_row[dst_lo..dst_lo + (x_hi - x_lo)]
                            .iter_mut()
                            .zip(&src[y * side + x_lo..y * side + x_hi])
                        {
                            *d += s;
                        }
                    }
                }
            }
        }
        input
    }

    /// Few output channels make the patch matrix pure overhead; those layers
    /// slide the kernel over a zero-padded copy of the input instead.
    fn uses_direct_path(&self) -> bool {
        self.out_channels < 4 && self.kernel_size > 1
    }

    fn pad(&self, side: usize, input: &[f64]) -> Vec<f64> {
        let p = self.padding();
        let padded = side + 2 * p;
        let mut out = vec![0.0; self.in_channels * padded * padded];
        for (src, dst) in input
            .chunks(side * side)
            .zip(out.chunks_mut(padded * padded))
        {
            for y in 0..side {
                dst[(y + p) * padded + p..(y + p) * padded + p + side]
                    .copy_from_slice(&src[y * side..(y + 1) * side]);
            }
        }
        out
    }

    fn forward_direct(&self, side: usize, padded_input: &[f64], out: &mut [f64]) {
        let k = self.kernel_size;
        let s = side + 2 * self.padding();
        let area = side * side;
        for (o, plane) in out.chunks_mut(area).enumerate() {
            for c in 0..self.in_channels {
                let src = &padded_input[c * s * s..(c + 1) * s * s];
                let kernel = &self.weights[(o * self.in_channels + c) * k * k..][..k * k];
                for ky in 0..k {
                    for kx in 0..k {
                        let w = kernel[ky * k + kx];
                        for y in 0..side {
                            let row = &src[(y + ky) * s + kx..][..side];
                            for (d, &v) in plane[y * side..(y + 1) * side].iter_mut().zip(row) {
                                *d += w * v;
                            }
                        }
                    }
                }
            }
        }
    }

    fn backward_direct(
        &self,
        side: usize,
        padded_input: &[f64],
        grad: &[f64],
        acc: &mut ConvLayer,
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        let k = self.kernel_size;
        let p = self.padding();
        let s = side + 2 * p;
        let area = side * side;
        let mut grad_padded = if want_input_grad {
            vec![0.0; self.in_channels * s * s]
        } else {
            Vec::new()
        };
        for (o, gplane) in grad.chunks(area).enumerate() {
            for c in 0..self.in_channels {
                let offset = (o * self.in_channels + c) * k * k;
                let src = &padded_input[c * s * s..(c + 1) * s * s];
                for ky in 0..k {
                    for kx in 0..k {
                        let mut dw = 0.0;
                        for y in 0..side {
                            let row = &src[(y + ky) * s + kx..][..side];
                            dw += gplane[y * side..(y + 1) * side]
                                .iter()
                                .zip(row)
                                .map(|(g, v)| g * v)
                                .sum::<f64>();
                        }
                        acc.weights[offset + ky * k + kx] += dw;
                        if want_input_grad {
                            let w = self.weights[offset + ky * k + kx];
                            let dst = &mut grad_padded[c * s * s..(c + 1) * s * s];
                            for y in 0..side {
                                let row = &mut dst[(y + ky) * s + kx..][..side];
                                for (d, &g) in row.iter_mut().zip(&gplane[y * side..(y + 1) * side]) {
                                    *d += w * g;
                                }
                            }
                        }
                    }
                }
            }
        }
        if !want_input_grad {
            return None;
        }
        let mut grad_input = vec![0.0; self.in_channels * area];
        for (src, dst) in grad_padded.chunks(s * s).zip(grad_input.chunks_mut(area)) {
            for y in 0..side {
                dst[y * side..(y + 1) * side]
                    .copy_from_slice(&src[(y + p) * s + p..(y + p) * s + p + side]);
            }
        }
        Some(grad_input)
    }

    /// Returns the activated output and the cached input transform (patch
    /// matrix or padded input) kept for backprop.
    pub(crate) fn forward(&self, side: usize, input: &[f64]) -> (Vec<f64>, Option<Vec<f64>>) {
        let area = side * side;
        if self.uses_direct_path() {
            let padded = self.pad(side, input);
            let mut out = vec![0.0; self.out_channels * area];
            for (plane, &b) in out.chunks_mut(area).zip(&self.bias) {
                plane.fill(b);
            }
            self.forward_direct(side, &padded, &mut out);
            self.activation.apply(&mut out);
            return (out, Some(padded));
        }
        let cols = self.im2col(side, input);
        let patches = cols.as_deref().unwrap_or(input);
        let mut out = vec![0.0; self.out_channels * area];
        for (plane, &b) in out.chunks_mut(area).zip(&self.bias) {
            plane.fill(b);
        }
        gemm(
            self.out_channels,
            self.patch_len(),
            area,
            1.0,
            &self.weights,
            false,
            patches,
            false,
            1.0,
            &mut out,
        );
        self.activation.apply(&mut out);
        (out, cols)
    }

    /// `grad` enters as dL/d(output) and leaves as dL/d(pre-activation).
    pub(crate) fn backward(
        &self,
        side: usize,
        cached: &[f64],
        output: &[f64],
        grad: &mut [f64],
        acc: &mut ConvLayer,
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        let area = side * side;
        self.activation.backprop(output, grad);
        for (b, plane) in acc.bias.iter_mut().zip(grad.chunks(area)) {
            *b += plane.iter().sum::<f64>();
        }
        if self.uses_direct_path() {
            return self.backward_direct(side, cached, grad, acc, want_input_grad);
        }
        gemm(
            self.out_channels,
            area,
            self.patch_len(),
            1.0,
            grad,
            false,
            cached,
            true,
            1.0,
            &mut acc.weights,
        );
        if !want_input_grad {
            return None;
        }
        let mut grad_cols = vec![0.0; self.patch_len() * area];
        gemm(
            self.patch_len(),
            self.out_channels,
            area,
            1.0,
            &self.weights,
            true,
            grad,
            false,
            0.0,
            &mut grad_cols,
        );
        if self.kernel_size == 1 {
            Some(grad_cols)
        } else {
            Some(self.col2im(side, &grad_cols))
        }
    }
}
