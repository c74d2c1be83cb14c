use serde::{Deserialize, Serialize};

use super::BlockGrid;
use crate::error::{Error, Result};
use crate::types::{FeatureVector, Frame};

/// Largest neighbour count accepted; the code table has `2^P` entries.
const MAX_NEIGHBORS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbpParams {
    /// Number of circular neighbours `P`.
    pub neighbors: usize,
    /// Sampling radius `R` in pixels.
    pub radius: f64,
    /// Map codes onto the `P(P-1)+3` uniform-pattern bins.
    pub uniform: bool,
}

impl Default for LbpParams {
    fn default() -> Self {
        LbpParams {
            neighbors: 8,
            radius: 1.0,
            uniform: true,
        }
    }
}

impl LbpParams {
    pub fn validate(&self) -> Result<()> {
        if !(4..=MAX_NEIGHBORS).contains(&self.neighbors) {
            return Err(Error::Config(format!(
                "LBP neighbour count must be in 4..={MAX_NEIGHBORS}, got {}",
                self.neighbors
            )));
        }
        if !(self.radius.is_finite() && self.radius >= 1.0) {
            return Err(Error::Config(format!("LBP radius must be >= 1, got {}", self.radius)));
        }
        Ok(())
    }

    /// Histogram length per block.
    pub fn bins(&self) -> usize {
        if self.uniform {
            uniform_bins(self.neighbors)
        } else {
            1 << self.neighbors
        }
    }

    /// Pixels closer than this to the border have incomplete neighbourhoods.
    pub fn margin(&self) -> usize {
        self.radius.ceil() as usize
    }
}

/// `P(P-1) + 3`: the `P(P-1) + 2` uniform patterns plus one shared bin for
/// every non-uniform pattern.
pub fn uniform_bins(neighbors: usize) -> usize {
    neighbors * (neighbors - 1) + 3
}

fn circular_transitions(code: u32, bits: usize) -> u32 {
    let mask = (1u32 << bits) - 1;
    let rotated = ((code >> 1) | ((code & 1) << (bits - 1))) & mask;
    (code ^ rotated).count_ones()
}

/// Snaps offsets that are integers up to rounding noise, so axis-aligned
/// neighbours are read without interpolation.
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

/// Bilinear sample inside a 2-D slice. Callers guarantee in-bounds positions.
#[inline]
pub(crate) fn sample_plane(get: impl Fn(usize, usize) -> f64, x: f64, y: f64, w: usize, h: usize) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as usize, y0 as usize);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let p00 = get(x0, y0);
    if fx == 0.0 && fy == 0.0 {
        return p00;
    }
    let top = p00 + fx * (get(x1, y0) - p00);
    let bottom = get(x0, y1) + fx * (get(x1, y1) - get(x0, y1));
    top + fy * (bottom - top)
}

/// Precomputed neighbour offsets and code-to-bin table for one parameter set.
#[derive(Debug, Clone)]
pub struct LbpCoder {
    params: LbpParams,
    /// Unit-circle directions `(cos, -sin)` of neighbour `k` at angle `2 pi k / P`.
    directions: Vec<(f64, f64)>,
    table: Vec<u32>,
}

impl LbpCoder {
    pub fn new(params: LbpParams) -> Result<Self> {
        params.validate()?;
        let p = params.neighbors;
        let directions = (0..p)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / p as f64;
                (a.cos(), -a.sin())
            })
            .collect();
        let codes = 1u32 << p;
        let table = if params.uniform {
            let other = (uniform_bins(p) - 1) as u32;
            let mut next = 0u32;
            (0..codes)
                .map(|code| {
                    if circular_transitions(code, p) <= 2 {
                        next += 1;
                        next - 1
                    } else {
                        other
                    }
                })
                .collect()
        } else {
            (0..codes).collect()
        };
        Ok(LbpCoder {
            params,
            directions,
            table,
        })
    }

    pub fn params(&self) -> &LbpParams {
        &self.params
    }

    pub fn bins(&self) -> usize {
        self.params.bins()
    }

    /// Neighbour offsets `(dx, dy)` scaled by the given radii.
    pub(crate) fn offsets(&self, rx: f64, ry: f64) -> Vec<(f64, f64)> {
        self.directions.iter().map(|&(c, s)| (snap(rx * c), snap(ry * s))).collect()
    }

    /// Bin of the pattern whose bit `k` is set when `neighbor(k) >= center`.
    #[inline]
    pub fn bin_of(&self, center: f64, neighbor: impl Fn(usize) -> f64) -> usize {
        let mut code = 0u32;
        for k in 0..self.params.neighbors {
            if neighbor(k) >= center {
                code |= 1 << k;
            }
        }
        self.table[code as usize] as usize
    }

    /// Raw (unmapped) pattern code at an interior pixel.
    pub fn code_at(&self, frame: &Frame, x: usize, y: usize) -> u32 {
        let offsets = self.offsets(self.params.radius, self.params.radius);
        let (w, h) = frame.dims();
        let center = frame.at(x, y);
        let mut code = 0u32;
        for (k, &(dx, dy)) in offsets.iter().enumerate() {
            let v = sample_plane(|a, b| frame.at(a, b), x as f64 + dx, y as f64 + dy, w, h);
            if v >= center {
                code |= 1 << k;
            }
        }
        code
    }
}

/// Per-block LBP histograms, concatenated in row-major block order. Pixels
/// within the sampling radius of the border are skipped.
pub fn lbp_histogram(frame: &Frame, grid: &BlockGrid, params: &LbpParams) -> Result<FeatureVector> {
    let coder = LbpCoder::new(*params)?;
    lbp_histogram_with(&coder, frame, grid)
}

pub(crate) fn lbp_histogram_with(coder: &LbpCoder, frame: &Frame, grid: &BlockGrid) -> Result<FeatureVector> {
    let (w, h) = frame.dims();
    grid.check_dims(w, h)?;
    let m = coder.params.margin();
    if w < 2 * m + 1 || h < 2 * m + 1 {
        return Err(Error::Shape(format!(
            "LBP radius {} needs at least {}x{} pixels, got {w}x{h}",
            coder.params.radius,
            2 * m + 1,
            2 * m + 1
        )));
    }
    let bins = coder.bins();
    let offsets = coder.offsets(coder.params.radius, coder.params.radius);
    let mut out = vec![0.0; grid.blocks() * grid.blocks() * bins];
    for y in m..h - m {
        for x in m..w - m {
            let center = frame.at(x, y);
            let bin = coder.bin_of(center, |k| {
                let (dx, dy) = offsets[k];
                sample_plane(|a, b| frame.at(a, b), x as f64 + dx, y as f64 + dy, w, h)
            });
            out[grid.block_of(x, y) * bins + bin] += 1.0;
        }
    }
    FeatureVector::new(out)
}

/// LBP of the difference image `(probe - onset + 1) / 2`.
pub fn lbp_difference_baseline(
    onset: &Frame,
    probe: &Frame,
    grid: &BlockGrid,
    params: &LbpParams,
) -> Result<FeatureVector> {
    if onset.dims() != probe.dims() {
        return Err(Error::Shape(format!(
            "difference image needs equal sizes, got {:?} and {:?}",
            onset.dims(),
            probe.dims()
        )));
    }
    let diff = onset
        .data()
        .iter()
        .zip(probe.data())
        .map(|(a, b)| ((b - a + 1.0) * 0.5).clamp(0.0, 1.0))
        .collect();
    let diff = Frame::new(onset.width(), onset.height(), diff)?;
    lbp_histogram(&diff, grid, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::block_partition;

    #[test]
    fn uniform_table_sizes() {
        for p in [4usize, 8, 12, 16] {
            let coder = LbpCoder::new(LbpParams {
                neighbors: p,
                radius: 1.0,
                uniform: true,
            })
            .unwrap();
            let max = *coder.table.iter().max().unwrap() as usize;
            assert_eq!(max + 1, uniform_bins(p));
            assert_eq!(coder.bins(), p * (p - 1) + 3);
        }
        assert_eq!(uniform_bins(8), 59);
    }

    #[test]
    fn params_are_validated() {
        assert!(LbpParams { neighbors: 3, ..LbpParams::default() }.validate().is_err());
        assert!(LbpParams { neighbors: 17, ..LbpParams::default() }.validate().is_err());
        assert!(LbpParams { radius: 0.5, ..LbpParams::default() }.validate().is_err());
    }

    #[test]
    fn axis_neighbours_are_exact_offsets() {
        let coder = LbpCoder::new(LbpParams::default()).unwrap();
        let o = coder.offsets(1.0, 1.0);
        assert_eq!(o[0], (1.0, 0.0));
        assert_eq!(o[2], (0.0, -1.0));
        assert_eq!(o[4], (-1.0, 0.0));
        assert_eq!(o[6], (0.0, 1.0));
    }

    #[test]
    fn constant_image_is_all_ones() {
        let frame = Frame::filled(10, 9, 0.37).unwrap();
        let grid = block_partition(10, 9, 1).unwrap();
        let params = LbpParams::default();
        let coder = LbpCoder::new(params).unwrap();
        for y in 1..8 {
            for x in 1..9 {
                assert_eq!(coder.code_at(&frame, x, y), 0xFF);
            }
        }
        let h = lbp_histogram(&frame, &grid, &params).unwrap();
        let all_ones_bin = coder.table[0xFF] as usize;
        assert_eq!(h.values()[all_ones_bin], (8 * 7) as f64);
        assert_eq!(h.values().iter().sum::<f64>(), 56.0);
    }

    #[test]
    fn known_pattern() {
        // Only the right neighbour (bit 0) and the one below (bit 6) are >= centre.
        #[rustfmt::skip]
        let raw = [
            0, 0, 0,
            0, 5, 9,
            0, 7, 0,
        ];
        let frame = Frame::from_bytes(3, 3, &raw).unwrap();
        let coder = LbpCoder::new(LbpParams { uniform: false, ..LbpParams::default() }).unwrap();
        assert_eq!(coder.code_at(&frame, 1, 1), 0b0100_0001);
    }

    #[test]
    fn too_small_frame_is_rejected() {
        let frame = Frame::filled(2, 2, 0.5).unwrap();
        let grid = block_partition(2, 2, 1).unwrap();
        assert!(matches!(lbp_histogram(&frame, &grid, &LbpParams::default()), Err(Error::Shape(_))));
    }

    #[test]
    fn identical_onset_and_probe_match_constant_image() {
        let onset = Frame::from_fn(12, 12, |x, y| ((x * 5 + y * 3) % 7) as f64 / 7.0).unwrap();
        let grid = block_partition(12, 12, 2).unwrap();
        let p = LbpParams::default();
        let diff = lbp_difference_baseline(&onset, &onset, &grid, &p).unwrap();
        let constant = lbp_histogram(&Frame::filled(12, 12, 0.5).unwrap(), &grid, &p).unwrap();
        assert_eq!(diff, constant);
    }
}
