use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{dataset_features, with_pool, Dataset, PipelineConfig};
use crate::types::{ConfusionMatrix, FeatureVector};

use super::folds::{folds_for, Fold, Protocol};
use super::metrics::metrics;
use super::svm::train_linear_svm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold_id: usize,
    pub repeat: usize,
    pub held_out: String,
    pub test_ids: Vec<String>,
    /// Ground-truth label ids, aligned with `test_ids`.
    pub truth: Vec<usize>,
    /// Predicted label ids, aligned with `test_ids`.
    pub predictions: Vec<usize>,
}

/// Outcome of a cross-validated run. The confusion matrix pools every fold
/// of every repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub config: PipelineConfig,
    pub class_names: Vec<String>,
    pub folds: Vec<FoldReport>,
    pub confusion: Vec<Vec<u64>>,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub accuracy: f64,
    /// F-measure of each repeat on its own.
    pub repeat_f_measures: Vec<f64>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }
}

fn run_fold(dataset: &Dataset, features: &[FeatureVector], fold: &Fold, repeat: usize, cfg: &PipelineConfig) -> Result<FoldReport> {
    let mut train = fold.train.clone();
    train.sort_by(|&a, &b| dataset.samples[a].video_id.cmp(&dataset.samples[b].video_id).then(a.cmp(&b)));
    let rows: Vec<&[f64]> = train.iter().map(|&i| features[i].values()).collect();
    let labels: Vec<usize> = train.iter().map(|&i| dataset.samples[i].label).collect();
    let model = train_linear_svm(&rows, &labels, &cfg.svm)
        .map_err(|e| Error::Training(format!("fold {} ({}): {e}", fold.id, fold.held_out)))?;
    let predictions = fold
        .test
        .iter()
        .map(|&i| model.predict(features[i].values()))
        .collect::<Result<Vec<_>>>()?;
    Ok(FoldReport {
        fold_id: fold.id,
        repeat,
        held_out: fold.held_out.clone(),
        test_ids: fold.test.iter().map(|&i| dataset.samples[i].video_id.clone()).collect(),
        truth: fold.test.iter().map(|&i| dataset.samples[i].label).collect(),
        predictions,
    })
}

/// Cross-validates precomputed features; `features[r][i]` is the feature of
/// sample `i` in repeat `r`.
pub fn evaluate_features(
    dataset: &Dataset,
    features: &[Vec<FeatureVector>],
    cfg: &PipelineConfig,
    jobs: usize,
) -> Result<EvalReport> {
    if features.is_empty() {
        return Err(Error::Data("no feature sets to evaluate".into()));
    }
    if let Some(bad) = features.iter().find(|f| f.len() != dataset.len()) {
        return Err(Error::Shape(format!("{} feature rows for {} samples", bad.len(), dataset.len())));
    }
    let keys: Vec<(&str, &str)> = dataset
        .samples
        .iter()
        .map(|s| (s.subject_id.as_str(), s.video_id.as_str()))
        .collect();
    let folds = folds_for(&keys, cfg.protocol)?;
    let jobs_list: Vec<(usize, &Fold)> = (0..features.len())
        .flat_map(|r| folds.iter().map(move |f| (r, f)))
        .collect();
    let reports = with_pool(jobs, || {
        jobs_list
            .par_iter()
            .map(|&(r, f)| run_fold(dataset, &features[r], f, r, cfg))
            .collect::<Result<Vec<_>>>()
    })?;

    let classes = dataset.class_names.len();
    let mut pooled = ConfusionMatrix::new(classes);
    let mut per_repeat = vec![ConfusionMatrix::new(classes); features.len()];
    for rep in &reports {
        for (&t, &p) in rep.truth.iter().zip(&rep.predictions) {
            pooled.record(t, p);
            per_repeat[rep.repeat].record(t, p);
        }
    }
    let m = metrics(&pooled)?;
    let repeat_f_measures = per_repeat
        .iter()
        .map(|c| metrics(c).map(|m| m.f_measure))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        protocol: cfg.protocol,
        config: cfg.clone(),
        class_names: dataset.class_names.clone(),
        folds: reports,
        confusion: pooled.rows(),
        precision: m.precision,
        recall: m.recall,
        f_measure: m.f_measure,
        accuracy: m.accuracy,
        repeat_f_measures,
    })
}

/// Extracts features for every repeat and cross-validates them.
pub fn run_protocol(dataset: &Dataset, cfg: &PipelineConfig, jobs: usize) -> Result<EvalReport> {
    cfg.validate()?;
    let features = (0..cfg.repeats())
        .map(|r| dataset_features(dataset, cfg, r, jobs))
        .collect::<Result<Vec<_>>>()?;
    evaluate_features(dataset, &features, cfg, jobs)
}
