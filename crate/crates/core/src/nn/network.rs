//! Forward evaluation, loss and exact analytic gradients.

use super::dataset::TrainingSet;
use super::layers::Activation;
use super::params::{Gradients, NetworkParams};
use crate::error::{Error, Result};
use crate::numeric::exact_sum;

/// Every intermediate produced by one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    input: Vec<f64>,
    /// Activated outputs of the dense layers (1-4).
    pub dense: Vec<Vec<f64>>,
    /// Activated outputs of the convolution layers (5 onwards), channel-major.
    pub conv: Vec<Vec<f64>>,
    cached: Vec<Option<Vec<f64>>>,
}

impl ForwardPass {
    /// The reconstructed block, row-major.
    pub fn output(&self) -> &[f64] {
        self.conv.last().expect("at least one convolution layer")
    }

    /// Activated output of layer `layer` (1-based).
    pub fn layer_output(&self, layer: usize) -> &[f64] {
        assert!(layer >= 1, "layers are numbered from 1");
        if layer <= self.dense.len() {
            &self.dense[layer - 1]
        } else {
            &self.conv[layer - 1 - self.dense.len()]
        }
    }
}

pub fn forward(params: &NetworkParams, x: &[f64]) -> Result<ForwardPass> {
    let arch = params.architecture();
    if x.len() != arch.block_len() {
        return Err(Error::mismatch(arch.block_len(), x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("network input"));
    }
    let mut dense: Vec<Vec<f64>> = Vec::with_capacity(params.dense.len());
    for layer in &params.dense {
        let input = dense.last().map_or(x, |v| v.as_slice());
        dense.push(layer.forward(input));
    }

    let side = arch.block_side;
    let mut conv: Vec<Vec<f64>> = Vec::with_capacity(params.conv.len());
    let mut cached = Vec::with_capacity(params.conv.len());
    for layer in &params.conv {
        let input = conv.last().unwrap_or_else(|| dense.last().expect("dense stack"));
        let (out, cols) = layer.forward(side, input);
        conv.push(out);
        cached.push(cols);
    }
    Ok(ForwardPass {
        input: x.to_vec(),
        dense,
        conv,
        cached,
    })
}

/// The reconstructed block for input `x`.
pub fn reconstruct_block(params: &NetworkParams, x: &[f64]) -> Result<Vec<f64>> {
    let mut pass = forward(params, x)?;
    Ok(pass.conv.pop().expect("at least one convolution layer"))
}

/// Smallest fraction, over the ReLU layers, of units that fire for at least one
/// of `inputs`. Zero means some layer is dead on all of them.
pub fn min_live_fraction(params: &NetworkParams, inputs: &[&[f64]]) -> Result<f64> {
    let acts = params
        .dense
        .iter()
        .map(|l| l.activation)
        .chain(params.conv.iter().map(|l| l.activation));
    let relu: Vec<usize> = acts
        .enumerate()
        .filter(|(_, a)| *a == Activation::Relu)
        .map(|(i, _)| i + 1)
        .collect();
    let mut live: Vec<Vec<bool>> = Vec::with_capacity(relu.len());
    for x in inputs {
        let pass = forward(params, x)?;
        for (k, &layer) in relu.iter().enumerate() {
            let out = pass.layer_output(layer);
            if live.len() <= k {
                live.push(vec![false; out.len()]);
            }
            for (flag, v) in live[k].iter_mut().zip(out) {
                *flag |= *v > 0.0;
            }
        }
    }
    Ok(live
        .iter()
        .map(|l| l.iter().filter(|&&b| b).count() as f64 / l.len() as f64)
        .fold(if inputs.is_empty() { 0.0 } else { 1.0 }, f64::min))
}

fn squared_error(output: &[f64], target: &[f64]) -> f64 {
    output
        .iter()
        .zip(target)
        .map(|(o, t)| (o - t) * (o - t))
        .sum()
}

/// Mean over the set of the squared reconstruction error `||F(x_i) - t_i||²`.
pub fn loss(params: &NetworkParams, batch: &TrainingSet) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("loss of an empty batch"));
    }
    check_block_len(params, batch)?;
    let per_sample = (0..batch.len())
        .map(|i| Ok(squared_error(&reconstruct_block(params, batch.input(i))?, batch.target(i))))
        .collect::<Result<Vec<f64>>>()?;
    Ok(exact_sum(per_sample) / batch.len() as f64)
}

/// Loss and its exact gradient with respect to every weight and bias.
pub fn backward(params: &NetworkParams, batch: &TrainingSet) -> Result<(f64, Gradients)> {
    let indices: Vec<usize> = (0..batch.len()).collect();
    let (losses, grads) = batch_gradient(params, batch, &indices)?;
    Ok((exact_sum(losses) / batch.len() as f64, grads))
}

fn check_block_len(params: &NetworkParams, batch: &TrainingSet) -> Result<()> {
    let n = params.architecture().block_len();
    if batch.block_len() != n {
        return Err(Error::mismatch(
            format!("training blocks of length {n}"),
            batch.block_len(),
        ));
    }
    Ok(())
}

/// Per-sample losses and the gradient of their mean over `indices`, accumulated
/// sequentially in index order.
pub(crate) fn batch_gradient(
    params: &NetworkParams,
    set: &TrainingSet,
    indices: &[usize],
) -> Result<(Vec<f64>, Gradients)> {
    if indices.is_empty() {
        return Err(Error::invalid("gradient of an empty batch"));
    }
    check_block_len(params, set)?;
    let scale = 1.0 / indices.len() as f64;
    let mut grads = params.zeros_like();
    let mut losses = Vec::with_capacity(indices.len());
    for &i in indices {
        let pass = forward(params, set.input(i))?;
        let target = set.target(i);
        losses.push(squared_error(pass.output(), target));
        let seed: Vec<f64> = pass
            .output()
            .iter()
            .zip(target)
            .map(|(o, t)| 2.0 * scale * (o - t))
            .collect();
        accumulate_sample(params, &pass, seed, &mut grads);
    }
    Ok((losses, grads))
}

fn accumulate_sample(
    params: &NetworkParams,
    pass: &ForwardPass,
    mut grad: Vec<f64>,
    acc: &mut Gradients,
) {
    let side = params.architecture().block_side;
    let n_conv = params.conv.len();
    for i in (0..n_conv).rev() {
        let layer = &params.conv[i];
        let input = if i == 0 {
            pass.dense.last().expect("dense stack")
        } else {
            &pass.conv[i - 1]
        };
        let cached = pass.cached[i].as_deref().unwrap_or(input);
        grad = layer
            .backward(side, cached, &pass.conv[i], &mut grad, &mut acc.conv[i], true)
            .expect("input gradient requested");
    }
    let n_dense = params.dense.len();
    for i in (0..n_dense).rev() {
        let layer = &params.dense[i];
        let input = if i == 0 { &pass.input } else { &pass.dense[i - 1] };
        match layer.backward(input, &pass.dense[i], &mut grad, &mut acc.dense[i], i > 0) {
            Some(g) => grad = g,
            None => break,
        }
    }
}
