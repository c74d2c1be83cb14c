//! One-vs-one linear SVM trained by dual coordinate descent.
//!
//! Each class pair solves the L2-regularized hinge-loss problem
//! `min 0.5 |w|^2 + C sum max(0, 1 - y (w.x + b))` in its dual, with the
//! bias folded in as a constant feature (so it is regularized too). Samples
//! are visited in their given order every epoch; there is no shuffling or
//! shrinking, which keeps training bit-deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    /// Misclassification cost `C`.
    pub c: f64,
    /// Stop when the primal-dual gap falls to this value.
    pub tolerance: f64,
    pub max_epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            tolerance: 1e-4,
            max_epochs: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    /// Class voted for when the decision value is positive.
    pub positive: usize,
    /// Class voted for when the decision value is negative.
    pub negative: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs: usize,
    pub gap: f64,
}

impl BinarySvm {
    #[inline]
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    dim: usize,
    classes: Vec<usize>,
    machines: Vec<BinarySvm>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn train_binary(x: &[&[f64]], y: &[f64], params: &SvmParams) -> (Vec<f64>, f64, usize, f64) {
    let dim = x[0].len();
    let n = x.len();
    let c = params.c;
    let diag: Vec<f64> = x.iter().map(|xi| dot(xi, xi) + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut gap = f64::INFINITY;
    let mut epochs = 0;

    while epochs < params.max_epochs {
        epochs += 1;
        for i in 0..n {
            let g = y[i] * (dot(&w, x[i]) + b) - 1.0;
            let projected = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            if projected != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / diag[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y[i];
                for (wj, xj) in w.iter_mut().zip(x[i]) {
                    *wj += step * xj;
                }
                b += step;
            }
        }
        let norm_sq = dot(&w, &w) + b * b;
        let hinge: f64 = (0..n).map(|i| (1.0 - y[i] * (dot(&w, x[i]) + b)).max(0.0)).sum();
        let primal = 0.5 * norm_sq + c * hinge;
        let dual = alpha.iter().sum::<f64>() - 0.5 * norm_sq;
        gap = primal - dual;
        if gap <= params.tolerance {
            break;
        }
    }
    (w, b, epochs, gap)
}

/// Trains one machine per pair of classes present in `labels`.
pub fn train_linear_svm(features: &[&[f64]], labels: &[usize], params: &SvmParams) -> Result<SvmModel> {
    if !(params.c.is_finite() && params.c > 0.0) {
        return Err(Error::Config(format!("SVM cost must be positive, got {}", params.c)));
    }
    if features.len() != labels.len() || features.is_empty() {
        return Err(Error::Shape(format!(
            "{} feature rows for {} labels",
            features.len(),
            labels.len()
        )));
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().position(|r| r.len() != dim) {
        return Err(Error::Shape(format!("row {bad} has {} features, expected {dim}", features[bad].len())));
    }
    if features.iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Input("non-finite feature value".into()));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Training(format!(
            "need at least two classes, training data only has {classes:?}"
        )));
    }

    let mut machines = Vec::new();
    for (ai, &a) in classes.iter().enumerate() {
        for &b in &classes[ai + 1..] {
            let (rows, signs): (Vec<&[f64]>, Vec<f64>) = features
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == a || l == b)
                .map(|(r, &l)| (*r, if l == a { 1.0 } else { -1.0 }))
                .unzip();
            let (weights, bias, epochs, gap) = train_binary(&rows, &signs, params);
            machines.push(BinarySvm {
                positive: a,
                negative: b,
                weights,
                bias,
                epochs,
                gap,
            });
        }
    }
    Ok(SvmModel { dim, classes, machines })
}

impl SvmModel {
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn machines(&self) -> &[BinarySvm] {
        &self.machines
    }

    /// Majority vote over the pairwise machines. A machine whose decision
    /// value is exactly zero casts no vote. Ties go to the class with the
    /// larger summed signed margin, then to the lowest class id.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!("model expects {} features, got {}", self.dim, x.len())));
        }
        let slot = |class: usize| self.classes.binary_search(&class).expect("known class");
        let mut votes = vec![0usize; self.classes.len()];
        let mut margins = vec![0.0f64; self.classes.len()];
        for m in &self.machines {
            let f = m.decision(x);
            let (p, n) = (slot(m.positive), slot(m.negative));
            if f > 0.0 {
                votes[p] += 1;
            } else if f < 0.0 {
                votes[n] += 1;
            }
            margins[p] += f;
            margins[n] -= f;
        }
        let mut best = 0;
        for k in 1..self.classes.len() {
            if votes[k] > votes[best] || (votes[k] == votes[best] && margins[k] > margins[best]) {
                best = k;
            }
        }
        Ok(self.classes[best])
    }
}

/// Predicts the class of `x`; see [`SvmModel::predict`].
pub fn predict(model: &SvmModel, x: &[f64]) -> Result<usize> {
    model.predict(x)
}
