use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::glyph::random_scene;
use crate::cs::{partition, BlockGrid};
use crate::error::{Error, Result};
use crate::nn::{Provenance, TrainingSet};
use crate::optics::{acquire, generate_speckle_patterns, normalize_image, reconstruct_cgi, PatternKind};

/// How training blocks are drawn from procedurally generated scenes.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    /// Number of blocks `T`.
    pub count: usize,
    pub grid: BlockGrid,
    /// At most this many blocks are taken from any one scene.
    pub blocks_per_scene: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(count: usize, grid: BlockGrid, seed: u64) -> Self {
        DatasetSpec {
            count,
            grid,
            blocks_per_scene: 25,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("dataset size must be >= 1"));
        }
        if self.blocks_per_scene == 0 {
            return Err(Error::invalid("blocks per scene must be >= 1"));
        }
        Ok(())
    }
}

/// Simulated acquisition settings for a noisy-input dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionSpec {
    /// Frame counts used in turn for successive scenes.
    pub frame_counts: Vec<usize>,
    pub kind: PatternKind,
    pub noise_sigma: f64,
    pub grain: usize,
}

/// Walks seeded scenes and hands each one, with its derived seed stream, to `visit`
/// until `spec.count` blocks have been collected.
fn collect_blocks(
    spec: &DatasetSpec,
    mut visit: impl FnMut(usize, &crate::image::SceneImage, &mut ChaCha8Rng) -> Result<Vec<f64>>,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    spec.validate()?;
    let grid = spec.grid;
    let mut master = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut inputs = Vec::with_capacity(spec.count);
    let mut targets = Vec::with_capacity(spec.count);
    let mut scene_index = 0;
    while inputs.len() < spec.count {
        let scene = random_scene(grid.image_width, grid.image_height, master.next_u64())?;
        let mut scene_rng = ChaCha8Rng::seed_from_u64(master.next_u64());
        let input_image = visit(scene_index, &scene, &mut scene_rng)?;
        let input_image = crate::image::SceneImage::new(
            grid.image_width,
            grid.image_height,
            input_image,
        )?;
        let (_, clean) = partition(&scene, grid.block_size)?;
        let (_, noisy) = partition(&input_image, grid.block_size)?;
        let mut order: Vec<usize> = (0..clean.len()).collect();
        order.shuffle(&mut scene_rng);
        let take = spec.blocks_per_scene.min(spec.count - inputs.len());
        for &i in order.iter().take(take) {
            inputs.push(noisy[i].pixels.clone());
            targets.push(clean[i].pixels.clone());
        }
        scene_index += 1;
    }
    Ok((inputs, targets))
}

/// `T` clean blocks for autoencoder training; deterministic in `spec.seed`.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<TrainingSet> {
    let (blocks, _) = collect_blocks(spec, |_, scene, _| Ok(scene.pixels().to_vec()))?;
    TrainingSet::autoencoding(spec.grid.block_len(), blocks)
}

/// `T` pairs of (normalized correlation-image block, clean block). Successive
/// scenes cycle through `acquisition.frame_counts`.
pub fn generate_cgi_dataset(spec: &DatasetSpec, acquisition: &AcquisitionSpec) -> Result<TrainingSet> {
    if acquisition.frame_counts.iter().any(|&n| n < 2) || acquisition.frame_counts.is_empty() {
        return Err(Error::invalid("frame counts must be >= 2"));
    }
    let grid = spec.grid;
    let (inputs, targets) = collect_blocks(spec, |i, scene, rng| {
        let n = acquisition.frame_counts[i % acquisition.frame_counts.len()];
        let patterns = generate_speckle_patterns(
            n,
            grid.image_width,
            grid.image_height,
            acquisition.kind,
            acquisition.grain,
            rng.next_u64(),
        )?;
        let buckets = acquire(scene, &patterns, acquisition.noise_sigma, rng)?;
        Ok(normalize_image(&reconstruct_cgi(&patterns, &buckets)?)?.into_pixels())
    })?;
    TrainingSet::paired(grid.block_len(), inputs, targets, Provenance::NoisyCgi)
}
