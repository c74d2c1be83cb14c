//! Apex-frame micro-expression analysis.
//!
//! The recognition path takes the onset and apex frames of a clip, estimates
//! TV-L1 optical flow between them, derives flow magnitude, orientation and
//! optical strain, and summarizes them as a bi-weighted block histogram
//! (Bi-WOOF) that feeds a linear SVM evaluated leave-one-subject-out. When no
//! apex annotation is available it is spotted from LBP feature differences.

pub mod dataio;
pub mod descriptors;
pub mod error;
pub mod eval;
pub mod flow;
pub mod kinematics;
pub mod pipeline;
pub mod raster;
pub mod spotting;
pub mod synthetic;
pub mod types;

pub use error::{Error, Result};
pub use eval::{run_protocol, EvalReport, Protocol, SvmParams};
pub use flow::{estimate_tvl1, warp_bilinear, TvL1Params};
pub use pipeline::{ApexSource, Dataset, Descriptor, PipelineConfig};
pub use spotting::{spot_apex, ApexSpot};
pub use types::{
    feature_index, BiwoofConfig, ConfusionMatrix, FeatureVector, FlowField, Frame, ScalarField,
    VideoSample, WeightMode,
};
