//! Classification and cross-validated evaluation.

mod ablation;
mod folds;
mod metrics;
mod protocol;
mod svm;

pub use ablation::{ablate, axis_settings, write_ablation_csv, AblationAxis, AblationRow};
pub use folds::{folds_for, make_folds, Fold, Protocol};
pub use metrics::{f_measure, metrics, Metrics};
pub use protocol::{evaluate_features, run_protocol, EvalReport, FoldReport};
pub use svm::{predict, train_linear_svm, BinarySvm, SvmModel, SvmParams};
