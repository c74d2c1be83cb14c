//! Domain types shared by every stage of the pipeline.
//!
//! All types are plain owned data, immutable after construction, and
//! therefore `Send + Sync`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rec.601 luma weights used for every colour to grayscale conversion.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// A grayscale image with intensities in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("empty frame {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "frame {width}x{height} needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(bad) = data
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::Input(format!("intensity {bad} outside [0, 1]")));
        }
        Ok(Frame {
            width,
            height,
            data,
        })
    }

    /// Builds a frame from a `height`-row grid of 8-bit samples; each
    /// intensity is exactly `raw / 255`.
    pub fn from_bytes(width: usize, height: usize, raw: &[u8]) -> Result<Self> {
        if width == 0 || height == 0 || raw.is_empty() {
            return Err(Error::Shape("empty 8-bit grid".into()));
        }
        if raw.len() != width * height {
            return Err(Error::Shape(format!(
                "grid {width}x{height} needs {} bytes, got {}",
                width * height,
                raw.len()
            )));
        }
        let data = raw.iter().map(|&b| f64::from(b) / 255.0).collect();
        Ok(Frame {
            width,
            height,
            data,
        })
    }

    /// Converts interleaved 8-bit RGB samples with Rec.601 luma weights.
    pub fn from_rgb_bytes(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if width == 0 || height == 0 || rgb.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "RGB grid {width}x{height} needs {} bytes, got {}",
                width * height * 3,
                rgb.len()
            )));
        }
        let data = rgb
            .chunks_exact(3)
            .map(|px| {
                let luma = LUMA_WEIGHTS[0] * f64::from(px[0])
                    + LUMA_WEIGHTS[1] * f64::from(px[1])
                    + LUMA_WEIGHTS[2] * f64::from(px[2]);
                (luma / 255.0).clamp(0.0, 1.0)
            })
            .collect();
        Ok(Frame {
            width,
            height,
            data,
        })
    }

    /// Constant-intensity frame.
    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Frame::new(width, height, vec![value; width * height])
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Frame::new(width, height, data)
    }

    /// Re-quantizes to 8 bits (round to nearest).
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// One annotated micro-expression clip.
#[derive(Debug, Clone)]
pub struct VideoSample {
    frames: Vec<Frame>,
    pub onset_idx: usize,
    pub apex_idx: Option<usize>,
    pub offset_idx: usize,
    pub label: usize,
    pub subject_id: String,
    pub video_id: String,
}

impl VideoSample {
    pub fn new(
        frames: Vec<Frame>,
        onset_idx: usize,
        apex_idx: Option<usize>,
        offset_idx: usize,
        label: usize,
        subject_id: impl Into<String>,
        video_id: impl Into<String>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        if frames.len() < 2 {
            return Err(Error::Shape(format!(
                "video {video_id} has {} frames, need at least 2",
                frames.len()
            )));
        }
        let dims = frames[0].dims();
        if let Some(i) = frames.iter().position(|f| f.dims() != dims) {
            return Err(Error::Shape(format!(
                "video {video_id}: frame {i} is {:?}, expected {dims:?}",
                frames[i].dims()
            )));
        }
        if offset_idx >= frames.len() || onset_idx > offset_idx {
            return Err(Error::Input(format!(
                "video {video_id}: onset {onset_idx} / offset {offset_idx} invalid for {} frames",
                frames.len()
            )));
        }
        if let Some(apex) = apex_idx {
            if apex < onset_idx || apex > offset_idx {
                return Err(Error::Input(format!(
                    "video {video_id}: apex {apex} outside [{onset_idx}, {offset_idx}]"
                )));
            }
        }
        Ok(VideoSample {
            frames,
            onset_idx,
            apex_idx,
            offset_idx,
            label,
            subject_id: subject_id.into(),
            video_id,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }

    pub fn onset_frame(&self) -> &Frame {
        &self.frames[self.onset_idx]
    }
}

/// Dense displacement field; `u` is horizontal, `v` vertical, in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("empty flow {width}x{height}")));
        }
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::Shape(format!(
                "flow {width}x{height} needs {} samples per component, got {}/{}",
                width * height,
                u.len(),
                v.len()
            )));
        }
        if u.iter().chain(v.iter()).any(|c| !c.is_finite()) {
            return Err(Error::Input("non-finite flow component".into()));
        }
        Ok(FlowField {
            width,
            height,
            u,
            v,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> (f64, f64),
    ) -> Result<Self> {
        let mut u = Vec::with_capacity(width * height);
        let mut v = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                u.push(a);
                v.push(b);
            }
        }
        FlowField::new(width, height, u, v)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn into_components(self) -> (Vec<f64>, Vec<f64>) {
        (self.u, self.v)
    }
}

/// Per-pixel scalar image: magnitude, orientation or strain.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::Shape(format!(
                "scalar field {width}x{height} with {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite scalar field value".into()));
        }
        Ok(ScalarField {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Concatenated block histograms, nonnegative and finite.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Input(format!("feature entry {bad} is not a finite nonnegative value")));
        }
        Ok(FeatureVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Scales to unit L1 norm; all-zero vectors are left untouched.
    pub fn l1_normalized(&self) -> FeatureVector {
        let total: f64 = self.0.iter().sum();
        if total > 0.0 {
            FeatureVector(self.0.iter().map(|v| v / total).collect())
        } else {
            self.clone()
        }
    }
}

/// Position of bin `bin` of block (`block_row`, `block_col`) in a feature
/// vector built from an `blocks x blocks` grid with `bins` bins per block.
#[inline]
pub fn feature_index(blocks: usize, bins: usize, block_row: usize, block_col: usize, bin: usize) -> usize {
    (block_row * blocks + block_col) * bins + bin
}

/// Per-pixel (local) or per-block (global) weighting source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Unit weight.
    None,
    /// Flow magnitude.
    #[default]
    Flow,
    /// Optical strain magnitude.
    Strain,
}

impl WeightMode {
    pub const ALL: [WeightMode; 3] = [WeightMode::None, WeightMode::Flow, WeightMode::Strain];

    pub fn as_str(self) -> &'static str {
        match self {
            WeightMode::None => "none",
            WeightMode::Flow => "flow",
            WeightMode::Strain => "strain",
        }
    }
}

impl fmt::Display for WeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(WeightMode::None),
            "flow" => Ok(WeightMode::Flow),
            "strain" => Ok(WeightMode::Strain),
            other => Err(Error::Config(format!("unknown weight mode `{other}`"))),
        }
    }
}

/// Bi-WOOF layout and weighting. `(None, None)` is a plain orientation count
/// histogram (HOOF).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiwoofConfig {
    pub blocks: usize,
    pub bins: usize,
    pub local_weight: WeightMode,
    pub global_weight: WeightMode,
    pub l1_normalize: bool,
}

impl Default for BiwoofConfig {
    fn default() -> Self {
        BiwoofConfig {
            blocks: 5,
            bins: 8,
            local_weight: WeightMode::Flow,
            global_weight: WeightMode::Strain,
            l1_normalize: false,
        }
    }
}

impl BiwoofConfig {
    pub fn new(blocks: usize, bins: usize, local_weight: WeightMode, global_weight: WeightMode) -> Result<Self> {
        let cfg = BiwoofConfig {
            blocks,
            bins,
            local_weight,
            global_weight,
            l1_normalize: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.bins == 0 {
            return Err(Error::Config(format!(
                "Bi-WOOF needs blocks >= 1 and bins >= 1, got {} and {}",
                self.blocks, self.bins
            )));
        }
        Ok(())
    }

    pub fn feature_len(&self) -> usize {
        self.blocks * self.blocks * self.bins
    }
}

/// `counts[t * classes + p]` = samples of true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let classes = rows.len();
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::Shape("confusion matrix must be square".into()));
        }
        Ok(ConfusionMatrix {
            classes,
            counts: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        if self.classes == 0 {
            return Vec::new();
        }
        self.counts.chunks(self.classes).map(|r| r.to_vec()).collect()
    }

    /// Per-class (TP, FP, FN).
    pub fn class_counts(&self, class: usize) -> (u64, u64, u64) {
        let tp = self.get(class, class);
        let fp = (0..self.classes).map(|t| self.get(t, class)).sum::<u64>() - tp;
        let fn_ = (0..self.classes).map(|p| self.get(class, p)).sum::<u64>() - tp;
        (tp, fp, fn_)
    }
}
