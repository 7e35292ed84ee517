use crate::error::{Error, Result};

/// Where the network inputs of a [`TrainingSet`] came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Clean scene blocks; each block is its own target.
    CleanBlocks,
    /// Blocks cut from normalized correlation images, paired with clean targets.
    NoisyCgi,
}

/// Flattened blocks used for training and evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    block_len: usize,
    inputs: Vec<Vec<f64>>,
    targets: Option<Vec<Vec<f64>>>,
    provenance: Provenance,
}

impl TrainingSet {
    /// Autoencoding set: every block is both input and target.
    pub fn autoencoding(block_len: usize, blocks: Vec<Vec<f64>>) -> Result<Self> {
        check_blocks(block_len, &blocks)?;
        Ok(TrainingSet {
            block_len,
            inputs: blocks,
            targets: None,
            provenance: Provenance::CleanBlocks,
        })
    }

    /// Supervised set mapping `inputs[i]` to `targets[i]`.
    pub fn paired(
        block_len: usize,
        inputs: Vec<Vec<f64>>,
        targets: Vec<Vec<f64>>,
        provenance: Provenance,
    ) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::mismatch(
                format!("{} targets", inputs.len()),
                targets.len(),
            ));
        }
        check_blocks(block_len, &inputs)?;
        check_blocks(block_len, &targets)?;
        Ok(TrainingSet {
            block_len,
            inputs,
            targets: Some(targets),
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        match &self.targets {
            Some(t) => &t[i],
            None => &self.inputs[i],
        }
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    /// The subset at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> TrainingSet {
        TrainingSet {
            block_len: self.block_len,
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: self
                .targets
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i].clone()).collect()),
            provenance: self.provenance,
        }
    }
}

fn check_blocks(block_len: usize, blocks: &[Vec<f64>]) -> Result<()> {
    if let Some(bad) = blocks.iter().find(|b| b.len() != block_len) {
        return Err(Error::mismatch(
            format!("blocks of length {block_len}"),
            bad.len(),
        ));
    }
    if blocks.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training blocks"));
    }
    Ok(())
}
