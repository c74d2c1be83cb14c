//! Per-video feature extraction: choose the probe (apex) frame, compute the
//! onset-to-probe representation, and summarize it with the configured
//! descriptor.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{load_video, Manifest};
use crate::descriptors::{
    biwoof_from_flow, block_partition, lbp_difference_baseline, lbp_top, LbpParams, TopRadii,
};
use crate::error::{Error, Result};
use crate::eval::{Protocol, SvmParams};
use crate::flow::{estimate_tvl1, TvL1Params};
use crate::spotting::spot_apex;
use crate::types::{BiwoofConfig, FeatureVector, FlowField, VideoSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Descriptor {
    /// Bi-WOOF of the onset-to-apex flow.
    #[default]
    Biwoof,
    /// LBP of the onset/apex difference image.
    LbpDiff,
    /// LBP-TOP over the whole clip.
    LbpTop,
}

impl FromStr for Descriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "biwoof" => Ok(Descriptor::Biwoof),
            "lbpdiff" => Ok(Descriptor::LbpDiff),
            "lbptop" => Ok(Descriptor::LbpTop),
            other => Err(Error::Config(format!("unknown descriptor `{other}`"))),
        }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Descriptor::Biwoof => "biwoof",
            Descriptor::LbpDiff => "lbpdiff",
            Descriptor::LbpTop => "lbptop",
        })
    }
}

/// Where the probe frame paired with the onset comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(try_from = "String", into = "String")]
pub enum ApexSource {
    /// Annotated apex.
    #[default]
    GroundTruth,
    /// Apex spotted from LBP differences.
    Spotted,
    /// Uniformly drawn frame after the onset, reproducible from the seed.
    Random { seed: u64 },
    /// Fixed number of frames after the onset, clamped to the offset.
    FixedOffset { frames: usize },
}

impl FromStr for ApexSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let bad = || Error::Config(format!("bad apex source `{s}`"));
        match lower.split_once(':') {
            None if lower == "groundtruth" => Ok(ApexSource::GroundTruth),
            None if lower == "spotted" => Ok(ApexSource::Spotted),
            None if lower == "random" => Ok(ApexSource::Random { seed: 0 }),
            Some(("random", seed)) => Ok(ApexSource::Random {
                seed: seed.parse().map_err(|_| bad())?,
            }),
            Some(("fixed", k)) => Ok(ApexSource::FixedOffset {
                frames: k.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ApexSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApexSource::GroundTruth => f.write_str("groundtruth"),
            ApexSource::Spotted => f.write_str("spotted"),
            ApexSource::Random { seed } => write!(f, "random:{seed}"),
            ApexSource::FixedOffset { frames } => write!(f, "fixed:{frames}"),
        }
    }
}

impl TryFrom<String> for ApexSource {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ApexSource> for String {
    fn from(a: ApexSource) -> String {
        a.to_string()
    }
}

/// Everything that determines a feature set and its evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub descriptor: Descriptor,
    pub biwoof: BiwoofConfig,
    pub lbp: LbpParams,
    pub lbp_top_radii: TopRadii,
    pub flow: TvL1Params,
    pub apex: ApexSource,
    pub protocol: Protocol,
    pub svm: SvmParams,
    /// Repetitions of the random-frame control.
    pub random_repeats: usize,
    /// Block grid used by apex spotting.
    pub spotting_blocks: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            descriptor: Descriptor::Biwoof,
            biwoof: BiwoofConfig::default(),
            lbp: LbpParams::default(),
            lbp_top_radii: TopRadii::default(),
            flow: TvL1Params::default(),
            apex: ApexSource::GroundTruth,
            protocol: Protocol::Loso,
            svm: SvmParams::default(),
            random_repeats: 10,
            spotting_blocks: 5,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.biwoof.validate()?;
        self.lbp.validate()?;
        self.flow.validate()?;
        if self.spotting_blocks == 0 {
            return Err(Error::Config("spotting_blocks must be at least 1".into()));
        }
        if self.random_repeats == 0 {
            return Err(Error::Config("random_repeats must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of feature sets the evaluation averages over.
    pub fn repeats(&self) -> usize {
        match self.apex {
            ApexSource::Random { .. } => self.random_repeats,
            _ => 1,
        }
    }
}

/// Clips with their class names (indexed by label id).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<VideoSample>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(samples: Vec<VideoSample>, class_names: Vec<String>) -> Result<Self> {
        if let Some(bad) = samples.iter().find(|s| s.label >= class_names.len()) {
            return Err(Error::Data(format!(
                "video {} has label {} but only {} classes are named",
                bad.video_id,
                bad.label,
                class_names.len()
            )));
        }
        Ok(Dataset { samples, class_names })
    }

    /// Loads every manifest entry; videos load in parallel on `jobs` threads.
    pub fn from_manifest(manifest: &Manifest, resize: Option<(usize, usize)>, jobs: usize) -> Result<Self> {
        let samples = with_pool(jobs, || {
            manifest
                .entries
                .par_iter()
                .map(|e| load_video(e, manifest.label_id(e), resize))
                .collect::<Result<Vec<_>>>()
        })?;
        Dataset::new(samples, manifest.class_names())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Runs `f` on a dedicated pool of `jobs` threads (0 = rayon default).
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
        .install(f)
}

fn stable_hash(s: &str) -> u64 {
    // FNV-1a: stable across platforms and runs.
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Probe frame index for `video` under `cfg.apex`; `repeat` selects the
/// draw of the random-frame control.
pub fn resolve_apex(video: &VideoSample, cfg: &PipelineConfig, repeat: usize) -> Result<usize> {
    match cfg.apex {
        ApexSource::GroundTruth => video
            .apex_idx
            .ok_or_else(|| Error::Data(format!("video {} has no ground-truth apex", video.video_id))),
        ApexSource::Spotted => {
            let (w, h) = video.dims();
            let grid = block_partition(w, h, cfg.spotting_blocks)?;
            Ok(spot_apex(video, &grid, &cfg.lbp)?.apex)
        }
        ApexSource::Random { seed } => {
            if video.offset_idx <= video.onset_idx {
                return Err(Error::Data(format!(
                    "video {} has no frame after its onset to draw",
                    video.video_id
                )));
            }
            let mix = seed
                ^ stable_hash(&video.video_id)
                ^ (repeat as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let mut rng = ChaCha8Rng::seed_from_u64(mix);
            Ok(rng.gen_range(video.onset_idx + 1..=video.offset_idx))
        }
        ApexSource::FixedOffset { frames } => Ok((video.onset_idx + frames).min(video.offset_idx)),
    }
}

/// TV-L1 flow from the onset frame to frame `apex`.
pub fn pair_flow(video: &VideoSample, apex: usize, params: &TvL1Params) -> Result<FlowField> {
    estimate_tvl1(video.onset_frame(), &video.frames()[apex], params)
}

/// Features of one clip given its probe frame.
pub fn extract_features(video: &VideoSample, apex: usize, cfg: &PipelineConfig) -> Result<FeatureVector> {
    let (w, h) = video.dims();
    match cfg.descriptor {
        Descriptor::Biwoof => biwoof_from_flow(&pair_flow(video, apex, &cfg.flow)?, &cfg.biwoof),
        Descriptor::LbpDiff => {
            let grid = block_partition(w, h, cfg.biwoof.blocks)?;
            lbp_difference_baseline(video.onset_frame(), &video.frames()[apex], &grid, &cfg.lbp)
        }
        Descriptor::LbpTop => {
            let grid = block_partition(w, h, cfg.biwoof.blocks)?;
            lbp_top(video, &grid, &cfg.lbp, cfg.lbp_top_radii)
        }
    }
}

/// Whole-clip Bi-WOOF: the sum of the Bi-WOOF features of the flows from
/// the onset to every later frame of the clip.
pub fn biwoof_whole_sequence(video: &VideoSample, cfg: &PipelineConfig) -> Result<FeatureVector> {
    let mut acc = vec![0.0; cfg.biwoof.feature_len()];
    for j in video.onset_idx + 1..=video.offset_idx {
        let f = biwoof_from_flow(&pair_flow(video, j, &cfg.flow)?, &cfg.biwoof)?;
        acc.iter_mut().zip(f.values()).for_each(|(a, b)| *a += b);
    }
    FeatureVector::new(acc)
}

/// Apex-pair path for one clip: resolve the probe frame, then extract.
pub fn video_features(video: &VideoSample, cfg: &PipelineConfig, repeat: usize) -> Result<FeatureVector> {
    let apex = resolve_apex(video, cfg, repeat)?;
    extract_features(video, apex, cfg)
}

/// Features of every clip for one repeat, in dataset order.
pub fn dataset_features(dataset: &Dataset, cfg: &PipelineConfig, repeat: usize, jobs: usize) -> Result<Vec<FeatureVector>> {
    cfg.validate()?;
    with_pool(jobs, || {
        dataset
            .samples
            .par_iter()
            .map(|v| video_features(v, cfg, repeat))
            .collect()
    })
}

/// Onset-to-probe flows of every clip for one repeat, in dataset order.
pub fn dataset_flows(dataset: &Dataset, cfg: &PipelineConfig, repeat: usize, jobs: usize) -> Result<Vec<FlowField>> {
    cfg.validate()?;
    with_pool(jobs, || {
        dataset
            .samples
            .par_iter()
            .map(|v| pair_flow(v, resolve_apex(v, cfg, repeat)?, &cfg.flow))
            .collect()
    })
}
