//! Apex spotting from LBP feature differences.
//!
//! Every frame is described by block LBP histograms and compared with the
//! onset frame through `1 - pearson_r`. Local maxima of that curve are then
//! narrowed down by repeatedly halving the frame range and keeping the half
//! whose peaks carry the larger summed score.

use log::warn;

use crate::descriptors::{lbp_histogram, BlockGrid, LbpParams};
use crate::error::{Error, Result};
use crate::types::VideoSample;

/// Per-frame dissimilarity to the onset frame, index-aligned with the clip.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceCurve {
    scores: Vec<f64>,
}

impl DifferenceCurve {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Input("difference curve must be finite".into()));
        }
        Ok(DifferenceCurve { scores })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Pearson correlation. If either vector has zero variance the result is 1
/// for equal vectors and 0 otherwise.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    if a == b {
        return 1.0;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// `score[j] = 1 - pearson(LBP(onset), LBP(frame j))`; the onset scores 0.
pub fn frame_difference_curve(video: &VideoSample, grid: &BlockGrid, params: &LbpParams) -> Result<DifferenceCurve> {
    let features = video
        .frames()
        .iter()
        .map(|f| lbp_histogram(f, grid, params))
        .collect::<Result<Vec<_>>>()?;
    let reference = features[video.onset_idx].values();
    let scores = features
        .iter()
        .enumerate()
        .map(|(j, f)| {
            if j == video.onset_idx {
                0.0
            } else {
                1.0 - pearson(reference, f.values())
            }
        })
        .collect();
    DifferenceCurve::new(scores)
}

/// Interior indices `j` with `s[j-1] < s[j] >= s[j+1]`. On a plateau only its
/// leftmost sample qualifies; the first and last samples never do.
pub fn detect_peaks(curve: &DifferenceCurve) -> Vec<usize> {
    let s = curve.scores();
    if s.len() < 3 {
        return Vec::new();
    }
    (1..s.len() - 1).filter(|&j| s[j - 1] < s[j] && s[j] >= s[j + 1]).collect()
}

/// Narrows `[0, len)` by halving (the left half takes the odd sample) and
/// keeping the half whose peaks have the larger summed score; ties keep the
/// left half and a half without peaks is never chosen over one with peaks.
/// Stops once at most one peak remains or the range is a single frame and
/// returns that peak, or the range's first maximal score if none is left.
pub fn divide_and_conquer(curve: &DifferenceCurve, peaks: &[usize]) -> usize {
    let s = curve.scores();
    let (mut lo, mut hi) = (0, s.len());
    loop {
        let inside: Vec<usize> = peaks.iter().copied().filter(|p| (lo..hi).contains(p)).collect();
        if inside.len() <= 1 || hi - lo <= 1 {
            return match inside.first() {
                Some(&p) => p,
                None => argmax(&s[lo..hi]) + lo,
            };
        }
        let mid = lo + (hi - lo).div_ceil(2);
        let (left, right): (Vec<usize>, Vec<usize>) = inside.iter().partition(|&&p| p < mid);
        let go_left = match (left.is_empty(), right.is_empty()) {
            (false, true) => true,
            (true, false) => false,
            _ => {
                let sum = |idx: &[usize]| idx.iter().map(|&p| s[p]).sum::<f64>();
                sum(&left) >= sum(&right)
            }
        };
        if go_left {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Result of spotting one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ApexSpot {
    pub apex: usize,
    pub curve: DifferenceCurve,
    pub peaks: Vec<usize>,
    /// The difference curve is identically zero.
    pub flat: bool,
}

pub fn spot_apex(video: &VideoSample, grid: &BlockGrid, params: &LbpParams) -> Result<ApexSpot> {
    if video.len() < 3 {
        return Err(Error::Shape(format!(
            "apex spotting needs at least 3 frames, video {} has {}",
            video.video_id,
            video.len()
        )));
    }
    let curve = frame_difference_curve(video, grid, params)?;
    let peaks = detect_peaks(&curve);
    let apex = divide_and_conquer(&curve, &peaks);
    let flat = curve.scores().iter().all(|&s| s == 0.0);
    if flat {
        warn!("video {}: flat difference curve, apex defaults to frame {apex}", video.video_id);
    }
    Ok(ApexSpot {
        apex,
        curve,
        peaks,
        flat,
    })
}
