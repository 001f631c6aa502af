//! Cross-validated training and evaluation, ablations, the logistic
//! regression baseline and report writers.

mod ablation;
mod folds;
mod metrics;
pub mod report;
mod train;

pub use ablation::{fam_f1_gain, run_ablation_fam, run_ablation_k, AblationRow};
pub use folds::{make_folds, FoldPlan};
pub use metrics::{auc, compute_metrics, mean_metrics, roc_curve, Metrics, THRESHOLD};
pub use train::{
    baseline_lr_tf, cross_validate, cross_validate_trained, default_plan, labels_of, train_fold,
    train_fold_lr, FoldReport, FoldResult, TrainedFold,
};
