use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use apexflow::descriptors::TopRadii;
use apexflow::{ApexSource, Descriptor, PipelineConfig, Protocol, WeightMode};
use clap::Args;
use serde::Deserialize;

/// Contents of a `--config` TOML file. Pipeline keys sit at the top level
/// (`[biwoof]`, `[flow]`, `apex = "spotted"`, ...).
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    pub resize: Option<[usize; 2]>,
    #[serde(flatten)]
    pub pipeline: PipelineConfig,
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

pub fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s
        .to_ascii_lowercase()
        .split_once('x')
        .map(|(w, h)| (w.trim().parse::<usize>(), h.trim().parse::<usize>()))
        .ok_or_else(|| format!("expected WxH, got `{s}`"))?;
    match (w, h) {
        (Ok(w), Ok(h)) if w > 0 && h > 0 => Ok((w, h)),
        _ => Err(format!("expected positive WxH, got `{s}`")),
    }
}

/// Feature-extraction flags; each overrides the config file when given.
#[derive(Debug, Clone, Args)]
pub struct FeatureArgs {
    /// TOML config file; flags take precedence over its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Blocks per side (N).
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Orientation bins (C).
    #[arg(long)]
    pub bins: Option<usize>,
    /// Per-pixel weight: none, flow or strain.
    #[arg(long)]
    pub local: Option<WeightMode>,
    /// Per-block weight: none, flow or strain.
    #[arg(long)]
    pub global: Option<WeightMode>,
    /// groundtruth, spotted, random:<seed> or fixed:<k>.
    #[arg(long)]
    pub apex: Option<ApexSource>,
    /// biwoof, lbpdiff or lbptop.
    #[arg(long)]
    pub descriptor: Option<Descriptor>,
    /// Resize every frame to WxH before processing.
    #[arg(long, value_parser = parse_size)]
    pub resize: Option<(usize, usize)>,
    /// L1-normalize Bi-WOOF features.
    #[arg(long)]
    pub l1_normalize: bool,
    /// LBP-TOP radii as X,Y,T.
    #[arg(long, value_parser = parse_radii)]
    pub top_radii: Option<TopRadii>,
    /// Repetitions of the random-frame control.
    #[arg(long)]
    pub repeats: Option<usize>,
}

fn parse_radii(s: &str) -> std::result::Result<TopRadii, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad radius `{p}`")))
        .collect::<std::result::Result<_, _>>()?;
    match parts.as_slice() {
        [x, y, t] => Ok(TopRadii { x: *x, y: *y, t: *t }),
        _ => Err(format!("expected X,Y,T, got `{s}`")),
    }
}

/// Cross-validation flags.
#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// loso or lovo.
    #[arg(long)]
    pub protocol: Option<Protocol>,
    /// SVM misclassification cost.
    #[arg(long)]
    pub svm_c: Option<f64>,
}

/// Resolved pipeline settings plus the frame size to load at.
pub struct Settings {
    pub pipeline: PipelineConfig,
    pub resize: Option<(usize, usize)>,
}

impl FeatureArgs {
    pub fn settings(&self, eval: Option<&EvalArgs>) -> Result<Settings> {
        let file = load_file_config(self.config.as_deref())?;
        let mut p = file.pipeline;
        if let Some(v) = self.blocks {
            p.biwoof.blocks = v;
        }
        if let Some(v) = self.bins {
            p.biwoof.bins = v;
        }
        if let Some(v) = self.local {
            p.biwoof.local_weight = v;
        }
        if let Some(v) = self.global {
            p.biwoof.global_weight = v;
        }
        if self.l1_normalize {
            p.biwoof.l1_normalize = true;
        }
        if let Some(v) = self.apex {
            p.apex = v;
        }
        if let Some(v) = self.descriptor {
            p.descriptor = v;
        }
        if let Some(v) = self.top_radii {
            p.lbp_top_radii = v;
        }
        if let Some(v) = self.repeats {
            p.random_repeats = v;
        }
        if let Some(e) = eval {
            if let Some(v) = e.protocol {
                p.protocol = v;
            }
            if let Some(v) = e.svm_c {
                p.svm.c = v;
            }
        }
        p.validate()?;
        if !(p.svm.c.is_finite() && p.svm.c > 0.0) {
            bail!("--svm-c must be positive, got {}", p.svm.c);
        }
        Ok(Settings {
            pipeline: p,
            resize: self.resize.or(file.resize.map(|[w, h]| (w, h))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(parse_size("64x48"), Ok((64, 48)));
        assert_eq!(parse_size("64X48"), Ok((64, 48)));
        assert!(parse_size("64").is_err());
        assert!(parse_size("0x5").is_err());
    }

    #[test]
    fn file_values_and_flag_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "apex = \"spotted\"\nresize = [32, 32]\n[biwoof]\nblocks = 8\nbins = 4\n").unwrap();
        let args = FeatureArgs {
            config: Some(path),
            blocks: None,
            bins: Some(6),
            local: None,
            global: None,
            apex: None,
            descriptor: None,
            resize: None,
            l1_normalize: false,
            top_radii: None,
            repeats: None,
        };
        let s = args.settings(None).unwrap();
        assert_eq!(s.pipeline.biwoof.blocks, 8);
        assert_eq!(s.pipeline.biwoof.bins, 6);
        assert_eq!(s.pipeline.apex, ApexSource::Spotted);
        assert_eq!(s.resize, Some((32, 32)));
    }
}
