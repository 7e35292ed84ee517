use super::network::reconstruct_block;
use super::params::NetworkParams;
use crate::cs::{reassemble, BlockGrid, BlockVector, ImageBlock};
use crate::error::{Error, Result};
use crate::image::SceneImage;

/// Reconstructs every block, clamps to `[0, 1]` and reassembles the image.
/// Each block goes back to the position recorded in its `block_index`.
pub fn infer_image(
    params: &NetworkParams,
    blocks: &[BlockVector],
    grid: &BlockGrid,
) -> Result<SceneImage> {
    let side = params.architecture().block_side;
    if grid.block_size != side {
        return Err(Error::mismatch(
            format!("{side}x{side} blocks"),
            format!("{0}x{0} blocks", grid.block_size),
        ));
    }
    if blocks.len() != grid.block_count() {
        return Err(Error::mismatch(
            format!("{} blocks", grid.block_count()),
            blocks.len(),
        ));
    }
    let out = blocks
        .iter()
        .map(|b| {
            let pixels = reconstruct_block(params, &b.values)?
                .into_iter()
                .map(|v| v.clamp(0.0, 1.0))
                .collect();
            Ok(ImageBlock {
                size: side,
                index: b.block_index,
                pixels,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    reassemble(grid, &out)
}
