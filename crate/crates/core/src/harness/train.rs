use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{make_folds, FoldPlan};
use super::metrics::{compute_metrics, mean_metrics, roc_curve, Metrics};
use crate::diffcore::{adam_step, lr_at, AdamConfig, Graph, Linear, ParamStore, TrainConfig, Var};
use crate::error::{Error, Result};
use crate::features::{FoldStats, LeakageGuard, SubjectFeatures};
use crate::matrix::Matrix;
use crate::model::{Batch, Model, ModelConfig, ModelInput, PositionalTable};
use crate::signal::half_spectrum_len;

/// Outcome of training on one fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_val: usize,
    /// 0-based epoch with the highest validation F1 (first on ties).
    pub best_epoch: usize,
    pub best: Metrics,
    pub last: Metrics,
    /// ROC of the validation fold at the best epoch.
    pub roc: Vec<(f64, f64)>,
    pub train_loss: Vec<f64>,
    pub val_f1: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub folds: Vec<FoldResult>,
    pub mean_best: Metrics,
    pub mean_last: Metrics,
}

impl FoldReport {
    pub fn new(folds: Vec<FoldResult>) -> Self {
        let best: Vec<Metrics> = folds.iter().map(|f| f.best.clone()).collect();
        let last: Vec<Metrics> = folds.iter().map(|f| f.last.clone()).collect();
        Self {
            mean_best: mean_metrics(&best),
            mean_last: mean_metrics(&last),
            folds,
        }
    }
}

/// A fold's result with the parameters of its best epoch.
pub struct TrainedFold {
    pub result: FoldResult,
    pub params: ParamStore<f64>,
}

/// Something that maps a list of subjects to `n x 2` class probabilities.
trait Classifier: Sync {
    fn probs(
        &self,
        g: &mut Graph<f64>,
        store: &ParamStore<f64>,
        inputs: &[&ModelInput],
    ) -> Result<Var>;
}

struct GraphClassifier {
    model: Model,
    adjacency: Vec<[Arc<Matrix<f64>>; 2]>,
    table: PositionalTable,
}

impl Classifier for GraphClassifier {
    fn probs(
        &self,
        g: &mut Graph<f64>,
        store: &ParamStore<f64>,
        inputs: &[&ModelInput],
    ) -> Result<Var> {
        let batch = Batch::new(inputs, &self.table)?;
        self.model.forward(g, store, &batch, &self.adjacency)
    }
}

/// Logistic regression on the flattened summary statistics.
struct LinearClassifier {
    linear: Linear,
}

impl Classifier for LinearClassifier {
    fn probs(
        &self,
        g: &mut Graph<f64>,
        store: &ParamStore<f64>,
        inputs: &[&ModelInput],
    ) -> Result<Var> {
        let width = self.linear.in_dim;
        let data: Vec<f64> = inputs.iter().flat_map(|x| x.otf_flat()).collect();
        let x = g.constant_matrix(inputs.len(), width, data);
        let logits = self.linear.forward(g, store, x)?;
        Ok(g.softmax_rows(logits))
    }
}

struct Loss {
    gamma: f64,
    omega: f64,
}

fn predict(
    clf: &dyn Classifier,
    store: &ParamStore<f64>,
    inputs: &[ModelInput],
    batch: usize,
) -> Result<Vec<[f64; 2]>> {
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(batch) {
        let refs: Vec<&ModelInput> = chunk.iter().collect();
        let mut g = Graph::new();
        let p = clf.probs(&mut g, store, &refs)?;
        out.extend(g.value(p).data().chunks(2).map(|r| [r[0], r[1]]));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn fit(
    clf: &dyn Classifier,
    store: &mut ParamStore<f64>,
    train: &[ModelInput],
    val: &[ModelInput],
    cfg: &TrainConfig,
    loss: Loss,
    rng: &mut ChaCha8Rng,
    fold: usize,
) -> Result<TrainedFold> {
    let adam = AdamConfig {
        l2_lambda: cfg.l2_lambda,
        ..AdamConfig::default()
    };
    let val_labels: Vec<u8> = val.iter().map(|x| x.label).collect();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = 0u64;
    let mut best: Option<(usize, Metrics, Vec<(f64, f64)>, ParamStore<f64>)> = None;
    let mut last = Metrics::default();
    let (mut train_loss, mut val_f1) = (Vec::new(), Vec::new());
    for epoch in 0..cfg.epochs {
        let lr = lr_at(epoch, cfg);
        order.shuffle(rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let refs: Vec<&ModelInput> = chunk.iter().map(|&i| &train[i]).collect();
            let labels: Vec<usize> = refs.iter().map(|x| usize::from(x.label)).collect();
            let mut g = Graph::new();
            let p = clf.probs(&mut g, store, &refs)?;
            let l = g.focal_loss(p, &labels, loss.gamma, loss.omega)?;
            let value = g.value(l).data()[0];
            if !value.is_finite() {
                return Err(Error::Numeric(format!(
                    "fold {fold}: non-finite loss at epoch {epoch}, batch {b}"
                )));
            }
            total += value * refs.len() as f64;
            store.zero_grad();
            g.backward(l, store)?;
            step += 1;
            adam_step(store, lr, step, &adam).map_err(|e| {
                Error::Numeric(format!("fold {fold}, epoch {epoch}, batch {b}: {e}"))
            })?;
        }
        train_loss.push(total / train.len() as f64);
        let probs = predict(clf, store, val, cfg.batch_size)?;
        last = compute_metrics(&probs, &val_labels);
        val_f1.push(last.f1);
        if best.as_ref().is_none_or(|(_, m, _, _)| last.f1 > m.f1) {
            let scores: Vec<f64> = probs.iter().map(|p| p[1]).collect();
            best = Some((
                epoch,
                last.clone(),
                roc_curve(&scores, &val_labels),
                store.clone(),
            ));
        }
    }
    let (best_epoch, best_metrics, roc, params) =
        best.ok_or_else(|| Error::Config("no epochs to train".into()))?;
    Ok(TrainedFold {
        result: FoldResult {
            fold,
            n_train: train.len(),
            n_val: val.len(),
            best_epoch,
            best: best_metrics,
            last,
            roc,
            train_loss,
            val_f1,
        },
        params,
    })
}

fn split_inputs(
    features: &[SubjectFeatures],
    train: &[usize],
    val: &[usize],
    k: usize,
) -> Result<(FoldStats, Vec<ModelInput>, Vec<ModelInput>)> {
    if let Some(i) = train.iter().find(|i| val.contains(i)) {
        return Err(Error::Leakage(format!(
            "subject {} is in both training and validation",
            features[*i].id
        )));
    }
    let guard = LeakageGuard::new(val.iter().map(|&i| features[i].id.as_str()));
    let stats = FoldStats::fit(features, train, k, &guard)?;
    let make = |idx: &[usize]| {
        idx.iter()
            .map(|&i| ModelInput::new(&features[i], &stats.otf, k))
            .collect::<Result<Vec<_>>>()
    };
    let (tr, va) = (make(train)?, make(val)?);
    Ok((stats, tr, va))
}

fn fold_rng(cfg: &TrainConfig, fold: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(fold as u64))
}

/// Trains the graph model on `train` and validates on `val` (subject indices).
pub fn train_fold(
    features: &[SubjectFeatures],
    train: &[usize],
    val: &[usize],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    fold: usize,
) -> Result<TrainedFold> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    let (stats, tr, va) = split_inputs(features, train, val, model_cfg.k)?;
    if tr[0].channels != model_cfg.channels {
        return Err(Error::Config(format!(
            "model expects {} channels, data has {}",
            model_cfg.channels, tr[0].channels
        )));
    }
    let mut rng = fold_rng(train_cfg, fold);
    let mut store = ParamStore::new();
    let model = Model::new(model_cfg, &mut store, &mut rng)?;
    model.init_fam(&mut store, &stats.fam_init)?;
    let bins = features[0]
        .blocks
        .iter()
        .map(|b| half_spectrum_len(b.period_len))
        .max()
        .unwrap_or(1);
    let clf = GraphClassifier {
        model,
        adjacency: stats.adjacency,
        table: PositionalTable::new(bins, model_cfg.d_k),
    };
    let loss = Loss {
        gamma: train_cfg.focal_gamma,
        omega: train_cfg.focal_omega,
    };
    fit(&clf, &mut store, &tr, &va, train_cfg, loss, &mut rng, fold)
}

/// Logistic regression on flattened normalized summary statistics, trained
/// with cross-entropy under the same schedule.
pub fn train_fold_lr(
    features: &[SubjectFeatures],
    train: &[usize],
    val: &[usize],
    train_cfg: &TrainConfig,
    fold: usize,
) -> Result<TrainedFold> {
    train_cfg.validate()?;
    let (_, tr, va) = split_inputs(features, train, val, 1)?;
    let mut rng = fold_rng(train_cfg, fold);
    let mut store = ParamStore::new();
    let width = tr[0].otf_flat().len();
    let linear = Linear::new(&mut store, "lr", width, 2, &mut rng)?;
    fit(
        &LinearClassifier { linear },
        &mut store,
        &tr,
        &va,
        train_cfg,
        Loss {
            gamma: 0.0,
            omega: 1.0,
        },
        &mut rng,
        fold,
    )
}

fn run_folds<F>(plan: &FoldPlan, train_one: F) -> Result<Vec<TrainedFold>>
where
    F: Fn(&[usize], &[usize], usize) -> Result<TrainedFold> + Sync,
{
    (0..plan.n_folds)
        .into_par_iter()
        .map(|f| {
            let (train, val) = plan.split(f);
            train_one(&train, &val, f)
        })
        .collect()
}

fn report_of(trained: Vec<TrainedFold>) -> FoldReport {
    FoldReport::new(trained.into_iter().map(|t| t.result).collect())
}

pub fn labels_of(features: &[SubjectFeatures]) -> Vec<u8> {
    features.iter().map(|f| f.label).collect()
}

/// Stratified cross-validation of the graph model, keeping each fold's parameters.
pub fn cross_validate_trained(
    features: &[SubjectFeatures],
    plan: &FoldPlan,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<Vec<TrainedFold>> {
    run_folds(plan, |tr, va, f| {
        train_fold(features, tr, va, model_cfg, train_cfg, f)
    })
}

/// Stratified cross-validation of the graph model.
pub fn cross_validate(
    features: &[SubjectFeatures],
    plan: &FoldPlan,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<FoldReport> {
    cross_validate_trained(features, plan, model_cfg, train_cfg).map(report_of)
}

/// Logistic-regression baseline on the same folds.
pub fn baseline_lr_tf(
    features: &[SubjectFeatures],
    plan: &FoldPlan,
    train_cfg: &TrainConfig,
) -> Result<FoldReport> {
    run_folds(plan, |tr, va, f| {
        train_fold_lr(features, tr, va, train_cfg, f)
    })
    .map(report_of)
}

/// Folds from the labels with the training seed.
pub fn default_plan(
    features: &[SubjectFeatures],
    n_folds: usize,
    train_cfg: &TrainConfig,
) -> Result<FoldPlan> {
    make_folds(&labels_of(features), n_folds, train_cfg.seed)
}
