use serde::{Deserialize, Serialize};

use super::lbp::{sample_plane, LbpCoder, LbpParams};
use super::BlockGrid;
use crate::error::{Error, Result};
use crate::types::{FeatureVector, VideoSample};

/// Sampling radii along x, y and time for LBP-TOP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopRadii {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl Default for TopRadii {
    fn default() -> Self {
        TopRadii { x: 1.0, y: 1.0, t: 2.0 }
    }
}

/// LBP histograms on the three orthogonal planes (XY, XT, YT) through every
/// voxel whose neighbourhoods lie inside the volume, accumulated per spatial
/// block. Each block contributes `[XY | XT | YT]`, so the block stride is
/// `3 * bins`. Only `neighbors` and `uniform` are taken from `params`; the
/// radii come from `radii`.
pub fn lbp_top(video: &VideoSample, grid: &BlockGrid, params: &LbpParams, radii: TopRadii) -> Result<FeatureVector> {
    let coder = LbpCoder::new(LbpParams {
        radius: 1.0,
        ..*params
    })?;
    for r in [radii.x, radii.y, radii.t] {
        if !(r.is_finite() && r >= 1.0) {
            return Err(Error::Config(format!("LBP-TOP radii must be >= 1, got {radii:?}")));
        }
    }
    let (w, h) = video.dims();
    grid.check_dims(w, h)?;
    let frames = video.frames();
    let t_len = frames.len();
    if (t_len as f64) <= 2.0 * radii.t {
        return Err(Error::Shape(format!(
            "LBP-TOP with temporal radius {} needs more than {} frames, got {t_len}",
            radii.t,
            2.0 * radii.t
        )));
    }
    let (mx, my, mt) = (
        radii.x.ceil() as usize,
        radii.y.ceil() as usize,
        radii.t.ceil() as usize,
    );
    if w < 2 * mx + 1 || h < 2 * my + 1 || t_len < 2 * mt + 1 {
        return Err(Error::Shape(format!("volume {w}x{h}x{t_len} too small for radii {radii:?}")));
    }

    let bins = coder.bins();
    let stride = 3 * bins;
    let xy = coder.offsets(radii.x, radii.y);
    let xt = coder.offsets(radii.x, radii.t);
    let yt = coder.offsets(radii.y, radii.t);
    let mut out = vec![0.0; grid.blocks() * grid.blocks() * stride];

    for t in mt..t_len - mt {
        let frame = &frames[t];
        for y in my..h - my {
            for x in mx..w - mx {
                let center = frame.at(x, y);
                let base = grid.block_of(x, y) * stride;
                let (xf, yf, tf) = (x as f64, y as f64, t as f64);

                let b = coder.bin_of(center, |k| {
                    let (dx, dy) = xy[k];
                    sample_plane(|a, b| frame.at(a, b), xf + dx, yf + dy, w, h)
                });
                out[base + b] += 1.0;

                let b = coder.bin_of(center, |k| {
                    let (dx, dt) = xt[k];
                    sample_plane(|a, s| frames[s].at(a, y), xf + dx, tf + dt, w, t_len)
                });
                out[base + bins + b] += 1.0;

                let b = coder.bin_of(center, |k| {
                    let (dy, dt) = yt[k];
                    sample_plane(|a, s| frames[s].at(x, a), yf + dy, tf + dt, h, t_len)
                });
                out[base + 2 * bins + b] += 1.0;
            }
        }
    }
    FeatureVector::new(out)
}
