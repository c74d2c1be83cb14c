use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptors::biwoof_from_flow;
use crate::error::{Error, Result};
use crate::pipeline::{dataset_features, dataset_flows, with_pool, Dataset, Descriptor, PipelineConfig};
use crate::types::{FeatureVector, FlowField, WeightMode};

use super::protocol::evaluate_features;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationAxis {
    /// Orientation bins 1 to 10.
    Bins,
    /// Block grids 5x5 to 8x8.
    Blocks,
    /// Every local/global weighting pair.
    Weights,
}

impl AblationAxis {
    pub const ALL: [AblationAxis; 3] = [AblationAxis::Bins, AblationAxis::Blocks, AblationAxis::Weights];
}

impl FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bins" => Ok(AblationAxis::Bins),
            "blocks" => Ok(AblationAxis::Blocks),
            "weights" => Ok(AblationAxis::Weights),
            other => Err(Error::Config(format!("unknown ablation axis `{other}`"))),
        }
    }
}

impl fmt::Display for AblationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblationAxis::Bins => "bins",
            AblationAxis::Blocks => "blocks",
            AblationAxis::Weights => "weights",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub axis: AblationAxis,
    pub setting: String,
    pub bins: usize,
    pub blocks: usize,
    pub local_weight: WeightMode,
    pub global_weight: WeightMode,
    pub f_measure: f64,
    pub accuracy: f64,
}

/// Settings swept along `axis`, each a full pipeline config derived from `base`.
/// The weights grid is row-major with the global weight as the row.
pub fn axis_settings(axis: AblationAxis, base: &PipelineConfig) -> Vec<(String, PipelineConfig)> {
    let with = |f: &dyn Fn(&mut PipelineConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    match axis {
        AblationAxis::Bins => (1..=10)
            .map(|b| (b.to_string(), with(&|c| c.biwoof.bins = b)))
            .collect(),
        AblationAxis::Blocks => (5..=8)
            .map(|n| (format!("{n}x{n}"), with(&|c| c.biwoof.blocks = n)))
            .collect(),
        AblationAxis::Weights => WeightMode::ALL
            .iter()
            .flat_map(|&g| WeightMode::ALL.iter().map(move |&l| (g, l)))
            .map(|(g, l)| {
                (
                    format!("global={g};local={l}"),
                    with(&|c| {
                        c.biwoof.global_weight = g;
                        c.biwoof.local_weight = l;
                    }),
                )
            })
            .collect(),
    }
}

fn biwoof_features(flows: &[Vec<FlowField>], cfg: &PipelineConfig, jobs: usize) -> Result<Vec<Vec<FeatureVector>>> {
    with_pool(jobs, || {
        flows
            .iter()
            .map(|rep| rep.par_iter().map(|f| biwoof_from_flow(f, &cfg.biwoof)).collect())
            .collect()
    })
}

/// Sweeps each requested axis, holding everything else at `base`. Flows are
/// estimated once and shared by every Bi-WOOF setting.
pub fn ablate(dataset: &Dataset, base: &PipelineConfig, axes: &[AblationAxis], jobs: usize) -> Result<Vec<AblationRow>> {
    base.validate()?;
    let biwoof = base.descriptor == Descriptor::Biwoof;
    if !biwoof && axes.iter().any(|a| *a != AblationAxis::Blocks) {
        return Err(Error::Config(format!(
            "only the blocks axis applies to the {} descriptor",
            base.descriptor
        )));
    }
    let flows = if biwoof {
        (0..base.repeats())
            .map(|r| dataset_flows(dataset, base, r, jobs))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let mut rows = Vec::new();
    for &axis in axes {
        for (setting, cfg) in axis_settings(axis, base) {
            cfg.validate()?;
            let features = if biwoof {
                biwoof_features(&flows, &cfg, jobs)?
            } else {
                (0..cfg.repeats())
                    .map(|r| dataset_features(dataset, &cfg, r, jobs))
                    .collect::<Result<Vec<_>>>()?
            };
            let report = evaluate_features(dataset, &features, &cfg, jobs)?;
            log::info!("ablation {axis} {setting}: F={:.4}", report.f_measure);
            rows.push(AblationRow {
                axis,
                setting,
                bins: cfg.biwoof.bins,
                blocks: cfg.biwoof.blocks,
                local_weight: cfg.biwoof.local_weight,
                global_weight: cfg.biwoof.global_weight,
                f_measure: report.f_measure,
                accuracy: report.accuracy,
            });
        }
    }
    Ok(rows)
}

pub fn write_ablation_csv(rows: &[AblationRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}
