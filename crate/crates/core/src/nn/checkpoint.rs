//! `CSNN` model checkpoints.
//!
//! Layout (little-endian): magic, `u32` version, `u32` C, `u32` block side,
//! `u32` bottleneck width, `u32` convolution layer count, then for each layer in
//! declaration order its dims, an activation byte (0 ReLU, 1 linear) and its
//! `f64` weights followed by its biases. Dense layers store `inputs, outputs`;
//! convolution layers store `in_channels, out_channels, kernel_size`.

use std::io::{Read, Write};

use super::layers::Activation;
use super::params::{Architecture, ConvSpec, NetworkParams};
use crate::container::{LeReader, LeWriter};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CSNN";
pub const CHECKPOINT_VERSION: u32 = 1;

const WHAT: &str = "checkpoint";

pub fn write_checkpoint<W: Write>(params: &NetworkParams, out: W) -> Result<()> {
    let arch = params.architecture();
    let mut w = LeWriter::new(out);
    w.bytes(CHECKPOINT_MAGIC)?;
    w.u32(CHECKPOINT_VERSION as usize)?;
    w.u32(arch.compression)?;
    w.u32(arch.block_side)?;
    w.u32(arch.bottleneck)?;
    w.u32(arch.conv.len())?;
    for l in &params.dense {
        w.u32(l.inputs)?;
        w.u32(l.outputs)?;
        w.u8(l.activation.code())?;
        w.f64s(&l.weights)?;
        w.f64s(&l.bias)?;
    }
    for l in &params.conv {
        w.u32(l.in_channels)?;
        w.u32(l.out_channels)?;
        w.u32(l.kernel_size)?;
        w.u8(l.activation.code())?;
        w.f64s(&l.weights)?;
        w.f64s(&l.bias)?;
    }
    w.finish()
}

fn activation(code: u8, expected: Activation) -> Result<()> {
    match Activation::from_code(code) {
        Some(a) if a == expected => Ok(()),
        _ => Err(Error::format(WHAT, format!("unexpected activation code {code}"))),
    }
}

fn check(found: usize, expected: usize, field: &str) -> Result<()> {
    if found != expected {
        return Err(Error::format(
            WHAT,
            format!("{field} is {found}, expected {expected}"),
        ));
    }
    Ok(())
}

fn finite(values: Vec<f64>) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("checkpoint weights"));
    }
    Ok(values)
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<NetworkParams> {
    let mut r = LeReader::new(input, WHAT);
    r.magic(CHECKPOINT_MAGIC)?;
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::format(WHAT, format!("unsupported version {version}")));
    }
    let compression = r.u32()?;
    let block_side = r.u32()?;
    let bottleneck = r.u32()?;
    let conv_count = r.u32()?;
    if conv_count == 0 || conv_count > 64 || block_side == 0 || block_side > 4096 {
        return Err(Error::format(WHAT, "implausible architecture header"));
    }

    let mut dense_layers = Vec::with_capacity(4);
    let widths = [block_side * block_side, compression, block_side * block_side, bottleneck];
    for &inputs in &widths {
        let found_in = r.u32()?;
        check(found_in, inputs, "dense input width")?;
        let outputs = r.u32()?;
        let act = r.u8()?;
        let weights = finite(r.f64s(inputs * outputs)?)?;
        let bias = finite(r.f64s(outputs)?)?;
        dense_layers.push((outputs, act, weights, bias));
    }

    let mut conv_layers = Vec::with_capacity(conv_count);
    let mut specs = Vec::with_capacity(conv_count);
    let mut in_channels = 1;
    for _ in 0..conv_count {
        check(r.u32()?, in_channels, "convolution input channels")?;
        let kernels = r.u32()?;
        let size = r.u32()?;
        if kernels == 0 || kernels > 4096 || size == 0 || size > 255 {
            return Err(Error::format(WHAT, "implausible convolution shape"));
        }
        let act = r.u8()?;
        let weights = finite(r.f64s(kernels * in_channels * size * size)?)?;
        let bias = finite(r.f64s(kernels)?)?;
        conv_layers.push((act, weights, bias));
        specs.push(ConvSpec { kernels, size });
        in_channels = kernels;
    }
    r.expect_end()?;

    let arch = Architecture {
        block_side,
        compression,
        bottleneck,
        conv: specs,
    };
    let mut params = NetworkParams::zeros(&arch)
        .map_err(|e| Error::format(WHAT, format!("invalid architecture: {e}")))?;
    for (layer, (outputs, act, weights, bias)) in params.dense.iter_mut().zip(dense_layers) {
        check(outputs, layer.outputs, "dense output width")?;
        activation(act, layer.activation)?;
        layer.weights = weights;
        layer.bias = bias;
    }
    for (layer, (act, weights, bias)) in params.conv.iter_mut().zip(conv_layers) {
        activation(act, layer.activation)?;
        layer.weights = weights;
        layer.bias = bias;
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_params;

    fn small_arch() -> Architecture {
        Architecture {
            block_side: 4,
            compression: 4,
            bottleneck: 4,
            conv: vec![
                ConvSpec { kernels: 2, size: 3 },
                ConvSpec { kernels: 1, size: 1 },
            ],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let p = NetworkParams::init(&small_arch(), 5).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"CSNN");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..12], &4u32.to_le_bytes());
        assert_eq!(read_checkpoint(&buf[..]).unwrap(), p);
    }

    #[test]
    fn standard_network_size() {
        let p = init_params(100, 0).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        let headers = 24 + 4 * 9 + 6 * 13;
        assert_eq!(buf.len(), headers + 8 * p.parameter_count());
    }

    #[test]
    fn corruption_rejected() {
        let p = NetworkParams::init(&small_arch(), 5).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 3]).is_err());
        let mut v = buf.clone();
        v[4] = 9;
        assert!(read_checkpoint(&v[..]).is_err());
        let mut act = buf.clone();
        act[24 + 8] = 7;
        assert!(read_checkpoint(&act[..]).is_err());
        let mut nan = buf;
        nan[24 + 9..24 + 17].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(read_checkpoint(&nan[..]), Err(Error::NonFinite(_))));
    }
}
