//! Non-overlapping block partition and row-major vectorization.

use crate::error::{Error, Result};
use crate::image::SceneImage;

/// Layout of square blocks tiling an image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockGrid {
    pub image_width: usize,
    pub image_height: usize,
    pub block_size: usize,
}

impl BlockGrid {
    pub const DEFAULT_BLOCK_SIZE: usize = 20;

    pub fn new(image_width: usize, image_height: usize, block_size: usize) -> Result<Self> {
        if block_size == 0 || image_width == 0 || image_height == 0 {
            return Err(Error::invalid("block and image sizes must be nonzero"));
        }
        if image_width % block_size != 0 || image_height % block_size != 0 {
            return Err(Error::invalid(format!(
                "block size {block_size} does not divide {image_width}x{image_height}"
            )));
        }
        Ok(BlockGrid {
            image_width,
            image_height,
            block_size,
        })
    }

    pub fn blocks_per_row(&self) -> usize {
        self.image_width / self.block_size
    }

    pub fn blocks_per_col(&self) -> usize {
        self.image_height / self.block_size
    }

    pub fn block_count(&self) -> usize {
        self.blocks_per_row() * self.blocks_per_col()
    }

    pub fn block_len(&self) -> usize {
        self.block_size * self.block_size
    }

    /// `(row, col)` block index of the `i`-th block in row-major block order.
    pub fn block_index(&self, i: usize) -> (usize, usize) {
        (i / self.blocks_per_row(), i % self.blocks_per_row())
    }
}

/// A square patch of an image.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBlock {
    pub size: usize,
    /// `(row, col)` position in block units.
    pub index: (usize, usize),
    /// Row-major pixels.
    pub pixels: Vec<f64>,
}

/// A vectorized block, `block_size²` long.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockVector {
    pub values: Vec<f64>,
    pub block_index: (usize, usize),
}

/// Splits `image` into `block_size x block_size` blocks in row-major block order.
pub fn partition(image: &SceneImage, block_size: usize) -> Result<(BlockGrid, Vec<ImageBlock>)> {
    let grid = BlockGrid::new(image.width(), image.height(), block_size)?;
    let blocks = (0..grid.block_count())
        .map(|i| {
            let (row, col) = grid.block_index(i);
            let mut pixels = Vec::with_capacity(grid.block_len());
            for y in 0..block_size {
                let start = (row * block_size + y) * image.width() + col * block_size;
                pixels.extend_from_slice(&image.pixels()[start..start + block_size]);
            }
            ImageBlock {
                size: block_size,
                index: (row, col),
                pixels,
            }
        })
        .collect();
    Ok((grid, blocks))
}

/// Inverse of [`partition`]; each block is placed at its own `index`.
pub fn reassemble(grid: &BlockGrid, blocks: &[ImageBlock]) -> Result<SceneImage> {
    if blocks.len() != grid.block_count() {
        return Err(Error::mismatch(
            format!("{} blocks", grid.block_count()),
            blocks.len(),
        ));
    }
    let b = grid.block_size;
    let mut pixels = vec![0.0; grid.image_width * grid.image_height];
    for block in blocks {
        let (row, col) = block.index;
        if block.size != b
            || block.pixels.len() != b * b
            || row >= grid.blocks_per_col()
            || col >= grid.blocks_per_row()
        {
            return Err(Error::invalid(format!(
                "block at {:?} does not fit the {}x{} grid",
                block.index,
                grid.blocks_per_row(),
                grid.blocks_per_col()
            )));
        }
        for y in 0..b {
            let start = (row * b + y) * grid.image_width + col * b;
            pixels[start..start + b].copy_from_slice(&block.pixels[y * b..(y + 1) * b]);
        }
    }
    SceneImage::new(grid.image_width, grid.image_height, pixels)
}

pub fn vectorize(block: &ImageBlock) -> BlockVector {
    BlockVector {
        values: block.pixels.clone(),
        block_index: block.index,
    }
}

pub fn devectorize(v: &BlockVector) -> Result<ImageBlock> {
    let size = (v.values.len() as f64).sqrt().round() as usize;
    if size * size != v.values.len() || size == 0 {
        return Err(Error::invalid(format!(
            "vector length {} is not a nonzero perfect square",
            v.values.len()
        )));
    }
    Ok(ImageBlock {
        size,
        index: v.block_index,
        pixels: v.values.clone(),
    })
}
