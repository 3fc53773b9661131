//! Block granularity: the unit a refinement stage relabels.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::Image;

/// Tiling of a `width x height` raster into `block x block` cells. Blocks in
/// the last column/row are clipped to the raster.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    pub width: u32,
    pub height: u32,
    pub block: u32,
    pub cols: u32,
    pub rows: u32,
}

impl BlockLayout {
    pub fn new(width: u32, height: u32, block: u32) -> Self {
        assert!(block >= 1, "block size must be >= 1");
        BlockLayout {
            width,
            height,
            block,
            cols: width.div_ceil(block),
            rows: height.div_ceil(block),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.cols as usize * self.rows as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, bx: u32, by: u32) -> usize {
        by as usize * self.cols as usize + bx as usize
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (u32, u32) {
        ((index % self.cols as usize) as u32, (index / self.cols as usize) as u32)
    }

    /// Pixel width of blocks in column `bx`.
    #[inline]
    pub fn block_width(&self, bx: u32) -> u32 {
        (self.width - bx * self.block).min(self.block)
    }

    /// Pixel height of blocks in row `by`.
    #[inline]
    pub fn block_height(&self, by: u32) -> u32 {
        (self.height - by * self.block).min(self.block)
    }

    /// Half-open pixel rectangle `(x0, y0, x1, y1)` of a block.
    #[inline]
    pub fn extent(&self, bx: u32, by: u32) -> (u32, u32, u32, u32) {
        let x0 = bx * self.block;
        let y0 = by * self.block;
        (x0, y0, x0 + self.block_width(bx), y0 + self.block_height(by))
    }
}

/// Integer aggregates of one block's pixels.
///
/// `color_sq_sum` is the sum of squared samples over all channels and pixels.
/// `chan_sq_sum` is the sum over pixels of the squared channel total, which
/// gives brightness variance without re-reading pixels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BlockAgg {
    pub count: u64,
    pub color_sum: [u64; 3],
    pub color_sq_sum: u64,
    pub chan_sq_sum: u64,
    pub pos_sum: [u64; 2],
    pub pos_sq_sum: u64,
}

impl BlockAgg {
    #[inline]
    pub fn add_pixel(&mut self, x: u32, y: u32, samples: &[u8]) {
        self.count += 1;
        let mut total = 0u64;
        for (c, &v) in samples.iter().enumerate() {
            let v = v as u64;
            self.color_sum[c] += v;
            self.color_sq_sum += v * v;
            total += v;
        }
        self.chan_sq_sum += total * total;
        let (x, y) = (x as u64, y as u64);
        self.pos_sum[0] += x;
        self.pos_sum[1] += y;
        self.pos_sq_sum += x * x + y * y;
    }

    pub fn merge(&mut self, other: &BlockAgg) {
        self.count += other.count;
        for c in 0..3 {
            self.color_sum[c] += other.color_sum[c];
        }
        self.color_sq_sum += other.color_sq_sum;
        self.chan_sq_sum += other.chan_sq_sum;
        self.pos_sum[0] += other.pos_sum[0];
        self.pos_sum[1] += other.pos_sum[1];
        self.pos_sq_sum += other.pos_sq_sum;
    }
}

/// Aggregates the pixels of block `(bx, by)`.
pub fn aggregate_at(img: &Image, layout: &BlockLayout, bx: u32, by: u32) -> BlockAgg {
    let (x0, y0, x1, y1) = layout.extent(bx, by);
    let ch = img.channels() as usize;
    let mut agg = BlockAgg::default();
    for y in y0..y1 {
        let row = img.row(y);
        for x in x0..x1 {
            let i = x as usize * ch;
            agg.add_pixel(x, y, &row[i..i + ch]);
        }
    }
    agg
}

/// All block aggregates of an image at one block size.
#[derive(Clone, Debug)]
pub struct BlockGrid {
    pub layout: BlockLayout,
    pub blocks: Vec<BlockAgg>,
}

impl BlockGrid {
    pub fn get(&self, bx: u32, by: u32) -> &BlockAgg {
        &self.blocks[self.layout.index(bx, by)]
    }
}

pub fn block_aggregate(img: &Image, block: u32) -> Result<BlockGrid> {
    if block == 0 {
        return Err(Error::Config("block size must be >= 1".into()));
    }
    let layout = BlockLayout::new(img.width(), img.height(), block);
    let mut blocks = Vec::with_capacity(layout.len());
    for by in 0..layout.rows {
        for bx in 0..layout.cols {
            blocks.push(aggregate_at(img, &layout, bx, by));
        }
    }
    Ok(BlockGrid { layout, blocks })
}
