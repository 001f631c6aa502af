use serde::{Deserialize, Serialize};

use super::folds::FoldPlan;
use super::metrics::Metrics;
use super::train::{cross_validate, FoldReport};
use crate::diffcore::TrainConfig;
use crate::error::{Error, Result};
use crate::features::SubjectFeatures;
use crate::model::ModelConfig;

/// One configuration of an ablation table with its cross-validated means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub k: usize,
    pub fam_enabled: bool,
    pub metrics: Metrics,
    pub report: FoldReport,
}

fn check_k(features: &[SubjectFeatures], k: usize) -> Result<()> {
    match features.iter().find(|f| f.k < k) {
        Some(f) => Err(Error::Config(format!(
            "k = {k} exceeds the extracted k = {} of {}",
            f.k, f.id
        ))),
        None => Ok(()),
    }
}

fn run(
    features: &[SubjectFeatures],
    plan: &FoldPlan,
    configs: impl IntoIterator<Item = ModelConfig>,
    train_cfg: &TrainConfig,
) -> Result<Vec<AblationRow>> {
    configs
        .into_iter()
        .map(|cfg| {
            check_k(features, cfg.k)?;
            let report = cross_validate(features, plan, &cfg, train_cfg)?;
            Ok(AblationRow {
                k: cfg.k,
                fam_enabled: cfg.fam_enabled,
                metrics: report.mean_best.clone(),
                report,
            })
        })
        .collect()
}

/// One cross-validated row per `k`, all on the same folds.
pub fn run_ablation_k(
    features: &[SubjectFeatures],
    plan: &FoldPlan,
    ks: &[usize],
    base: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<Vec<AblationRow>> {
    run(
        features,
        plan,
        ks.iter().map(|&k| ModelConfig { k, ..base.clone() }),
        train_cfg,
    )
}

/// Rows for each `k` with FAM enabled then disabled, all on the same folds.
pub fn run_ablation_fam(
    features: &[SubjectFeatures],
    plan: &FoldPlan,
    ks: &[usize],
    base: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<Vec<AblationRow>> {
    let configs = ks.iter().flat_map(|&k| {
        [true, false].map(|fam_enabled| ModelConfig {
            k,
            fam_enabled,
            ..base.clone()
        })
    });
    run(features, plan, configs, train_cfg)
}

/// Mean over rows of F1 with FAM minus F1 without, pairing rows by `k`.
pub fn fam_f1_gain(rows: &[AblationRow]) -> f64 {
    let diffs: Vec<f64> = rows
        .iter()
        .filter(|r| r.fam_enabled)
        .filter_map(|with| {
            rows.iter()
                .find(|r| !r.fam_enabled && r.k == with.k)
                .map(|without| with.metrics.f1 - without.metrics.f1)
        })
        .collect();
    diffs.iter().sum::<f64>() / diffs.len().max(1) as f64
}
