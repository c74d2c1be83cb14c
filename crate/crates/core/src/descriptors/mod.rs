//! Block-histogram descriptors: Bi-WOOF over flow-derived fields, spatial
//! LBP, LBP on onset/probe difference images, and LBP-TOP.

mod biwoof;
mod lbp;
mod lbp_top;

pub use biwoof::{bin_index, biwoof, biwoof_from_flow};
pub use lbp::{lbp_difference_baseline, lbp_histogram, uniform_bins, LbpCoder, LbpParams};
pub use lbp_top::{lbp_top, TopRadii};

use crate::error::{Error, Result};

/// An `N x N` tiling of a `width x height` image. Every block is
/// `floor(width / N)` wide except the last column, which absorbs the
/// remainder (rows likewise).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGrid {
    blocks: usize,
    width: usize,
    height: usize,
    col_edges: Vec<usize>,
    row_edges: Vec<usize>,
    col_of: Vec<usize>,
    row_of: Vec<usize>,
}

fn edges(extent: usize, blocks: usize) -> Vec<usize> {
    let step = extent / blocks;
    let mut e: Vec<usize> = (0..blocks).map(|b| b * step).collect();
    e.push(extent);
    e
}

fn owner(edges: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(*edges.last().unwrap_or(&0));
    for (b, pair) in edges.windows(2).enumerate() {
        out.extend(std::iter::repeat(b).take(pair[1] - pair[0]));
    }
    out
}

/// Partitions a `width x height` image into `blocks x blocks` tiles.
pub fn block_partition(width: usize, height: usize, blocks: usize) -> Result<BlockGrid> {
    if blocks == 0 || blocks > width.min(height) {
        return Err(Error::Config(format!(
            "cannot split {width}x{height} into {blocks}x{blocks} blocks"
        )));
    }
    let col_edges = edges(width, blocks);
    let row_edges = edges(height, blocks);
    Ok(BlockGrid {
        blocks,
        width,
        height,
        col_of: owner(&col_edges),
        row_of: owner(&row_edges),
        col_edges,
        row_edges,
    })
}

impl BlockGrid {
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Half-open `(x0, x1, y0, y1)` bounds of block (`row`, `col`).
    pub fn bounds(&self, row: usize, col: usize) -> (usize, usize, usize, usize) {
        (
            self.col_edges[col],
            self.col_edges[col + 1],
            self.row_edges[row],
            self.row_edges[row + 1],
        )
    }

    /// Bounds of all blocks in row-major block order.
    pub fn all_bounds(&self) -> Vec<(usize, usize, usize, usize)> {
        (0..self.blocks)
            .flat_map(|r| (0..self.blocks).map(move |c| (r, c)))
            .map(|(r, c)| self.bounds(r, c))
            .collect()
    }

    /// Row-major index of the block containing pixel `(x, y)`.
    #[inline]
    pub fn block_of(&self, x: usize, y: usize) -> usize {
        self.row_of[y] * self.blocks + self.col_of[x]
    }

    pub(crate) fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        if (width, height) != (self.width, self.height) {
            return Err(Error::Shape(format!(
                "block grid is {}x{}, image is {width}x{height}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_division() {
        let g = block_partition(16, 16, 4).unwrap();
        let b = g.all_bounds();
        assert_eq!(b.len(), 16);
        assert!(b.iter().all(|&(x0, x1, y0, y1)| x1 - x0 == 4 && y1 - y0 == 4));
    }

    #[test]
    fn remainder_goes_to_last_block() {
        let g = block_partition(170, 140, 8).unwrap();
        let widths: Vec<usize> = (0..8).map(|c| g.bounds(0, c)).map(|(x0, x1, _, _)| x1 - x0).collect();
        assert_eq!(widths, vec![21, 21, 21, 21, 21, 21, 21, 23]);
        let heights: Vec<usize> = (0..8).map(|r| g.bounds(r, 0)).map(|(_, _, y0, y1)| y1 - y0).collect();
        assert_eq!(heights, vec![17, 17, 17, 17, 17, 17, 17, 21]);
    }

    #[test]
    fn single_block_covers_image() {
        let g = block_partition(13, 9, 1).unwrap();
        assert_eq!(g.all_bounds(), vec![(0, 13, 0, 9)]);
    }

    #[test]
    fn too_many_blocks_is_config_error() {
        assert!(matches!(block_partition(10, 4, 5), Err(Error::Config(_))));
        assert!(matches!(block_partition(10, 4, 0), Err(Error::Config(_))));
    }

    #[test]
    fn blocks_tile_exactly() {
        for (w, h, n) in [(17, 11, 3), (64, 64, 5), (9, 30, 9)] {
            let g = block_partition(w, h, n).unwrap();
            let mut hits = vec![0u32; w * h];
            for (k, (x0, x1, y0, y1)) in g.all_bounds().into_iter().enumerate() {
                for y in y0..y1 {
                    for x in x0..x1 {
                        hits[y * w + x] += 1;
                        assert_eq!(g.block_of(x, y), k);
                    }
                }
            }
            assert!(hits.iter().all(|&c| c == 1));
        }
    }
}
