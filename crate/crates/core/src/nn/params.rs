use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::layers::{Activation, ConvLayer, DenseLayer};
use crate::error::{Error, Result};

/// Standard deviation of the Gaussian used for convolution kernels (variance 0.01).
pub const CONV_INIT_STD: f64 = 0.1;

/// Kernel count and square kernel size of one convolution layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernels: usize,
    pub size: usize,
}

/// Shape description of the reconstruction network.
///
/// The dense stack is `N -> C -> N -> bottleneck -> N` with `N = block_side²`;
/// its output is reshaped to a `block_side x block_side` map and passed through
/// the convolution stack, whose last layer must produce a single channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub block_side: usize,
    pub compression: usize,
    pub bottleneck: usize,
    pub conv: Vec<ConvSpec>,
}

impl Architecture {
    pub const BLOCK_SIDE: usize = 20;

    /// The ten-layer network on 20x20 blocks with first-layer width `compression`.
    pub fn standard(compression: usize) -> Self {
        Architecture {
            block_side: Self::BLOCK_SIDE,
            compression,
            bottleneck: 100,
            conv: vec![
                ConvSpec { kernels: 64, size: 11 },
                ConvSpec { kernels: 32, size: 1 },
                ConvSpec { kernels: 1, size: 7 },
                ConvSpec { kernels: 64, size: 11 },
                ConvSpec { kernels: 32, size: 1 },
                ConvSpec { kernels: 1, size: 7 },
            ],
        }
    }

    pub fn block_len(&self) -> usize {
        self.block_side * self.block_side
    }

    /// `C / N`, the fraction of the block dimension kept by the first layer.
    pub fn measurement_rate(&self) -> f64 {
        self.compression as f64 / self.block_len() as f64
    }

    pub fn layer_count(&self) -> usize {
        4 + self.conv.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.block_len();
        if n == 0 {
            return Err(Error::invalid("block side must be nonzero"));
        }
        if self.compression == 0 || self.compression > n {
            return Err(Error::invalid(format!(
                "compression width {} outside 1..={n}",
                self.compression
            )));
        }
        if self.bottleneck == 0 {
            return Err(Error::invalid("bottleneck width must be nonzero"));
        }
        if self.conv.is_empty() {
            return Err(Error::invalid("at least one convolution layer is required"));
        }
        for (i, spec) in self.conv.iter().enumerate() {
            if spec.kernels == 0 || spec.size % 2 == 0 {
                return Err(Error::invalid(format!(
                    "convolution layer {} needs >= 1 kernel of odd size, got {}@{}",
                    i + 5,
                    spec.kernels,
                    spec.size
                )));
            }
        }
        if self.conv.last().map(|s| s.kernels) != Some(1) {
            return Err(Error::invalid("the last convolution layer must have one kernel"));
        }
        Ok(())
    }
}

/// All weights and biases of the network, in declaration order: dense layers
/// 1-4, then convolution layers 5 onwards. The same type carries gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub(crate) arch: Architecture,
    pub dense: Vec<DenseLayer>,
    pub conv: Vec<ConvLayer>,
}

/// Gradient of the loss, congruent with [`NetworkParams`].
pub type Gradients = NetworkParams;

impl NetworkParams {
    /// All-zero parameters with the standard activations: ReLU everywhere except a
    /// linear final layer.
    pub fn zeros(arch: &Architecture) -> Result<Self> {
        arch.validate()?;
        let n = arch.block_len();
        let widths = [n, arch.compression, n, arch.bottleneck, n];
        let dense = widths
            .windows(2)
            .map(|w| DenseLayer::zeros(w[0], w[1], Activation::Relu))
            .collect();
        let mut in_channels = 1;
        let last = arch.conv.len() - 1;
        let conv = arch
            .conv
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let act = if i == last {
                    Activation::Linear
                } else {
                    Activation::Relu
                };
                let layer = ConvLayer::zeros(in_channels, spec.kernels, spec.size, act);
                in_channels = spec.kernels;
                layer
            })
            .collect();
        Ok(NetworkParams {
            arch: arch.clone(),
            dense,
            conv,
        })
    }

    /// Seeded initialization: dense weights uniform in `±sqrt(6 / (fan_in + fan_out))`,
    /// convolution weights `Normal(0, 0.01)`, every bias zero.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut params.dense {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        let normal = Normal::new(0.0, CONV_INIT_STD).expect("valid std");
        for layer in &mut params.conv {
            for w in &mut layer.weights {
                *w = normal.sample(&mut rng);
            }
        }
        Ok(params)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.arch).expect("architecture already validated")
    }

    /// Weight and bias slices in declaration order, two per layer.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.arch.layer_count());
        for l in &self.dense {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        for l in &self.conv {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.arch.layer_count());
        for l in &mut self.dense {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        for l in &mut self.conv {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Parameters of the standard ten-layer network for first-layer width `compression`.
pub fn init_params(compression: usize, seed: u64) -> Result<NetworkParams> {
    let n = Architecture::BLOCK_SIDE * Architecture::BLOCK_SIDE;
    if compression == 0 || compression > n {
        return Err(Error::invalid(format!(
            "compression width {compression} outside 1..={n}"
        )));
    }
    NetworkParams::init(&Architecture::standard(compression), seed)
}
