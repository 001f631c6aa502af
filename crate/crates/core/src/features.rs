//! Per-subject feature cache and the statistics fitted on a training fold.
//!
//! Extraction is independent of fold membership and runs once per subject.
//! Anything that pools across subjects (spatial priors, the OTF normalizer
//! and FAM initial weights) is fitted in [`FoldStats::fit`], which refuses
//! subjects held out for validation.

use std::collections::HashSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biostats::{self, FamInitWeights};
use crate::datamodel::{DatasetManifest, Period, SubjectRecord, Substance};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::signal::{self, Biomarker, Dft, N_OTF};
use crate::spatial::{self, NormalizedAdjacency, SpatialPrior, WelchParams};

/// Number of (period, substance) blocks, indexed `period * 3 + substance`.
pub const N_BLOCKS: usize = 9;

pub fn block_index(period: Period, substance: Substance) -> usize {
    period.index() * 3 + substance.index()
}

pub fn block_key(index: usize) -> (Period, Substance) {
    (Period::ALL[index / 3], Substance::ALL[index % 3])
}

/// Features of one (period, substance) block of one subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockFeatures {
    pub period: Period,
    pub substance: Substance,
    pub period_len: usize,
    /// channels x 6 summary statistics of the normalized series.
    pub otf_raw: Matrix<f64>,
    /// One biomarker per channel at the extraction `k`.
    pub biomarkers: Vec<Biomarker<f64>>,
    pub corr: Matrix<f64>,
    pub cohe: Matrix<f64>,
    pub constant_channels: usize,
    pub degenerate_coherence: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectFeatures {
    pub id: String,
    pub label: u8,
    pub k: usize,
    pub blocks: Vec<BlockFeatures>,
}

impl SubjectFeatures {
    pub fn block(&self, period: Period, substance: Substance) -> &BlockFeatures {
        &self.blocks[block_index(period, substance)]
    }

    pub fn channels(&self) -> usize {
        self.blocks[0].otf_raw.rows()
    }
}

/// DFT plans for the three period lengths of a manifest.
pub struct Extractor {
    manifest: DatasetManifest,
    k: usize,
    welch: WelchParams,
    plans: [Dft<f64>; 3],
}

impl Extractor {
    pub fn new(manifest: &DatasetManifest, k: usize) -> Result<Self> {
        Self::with_welch(manifest, k, WelchParams::default())
    }

    pub fn with_welch(manifest: &DatasetManifest, k: usize, welch: WelchParams) -> Result<Self> {
        manifest.validate()?;
        let half = signal::half_spectrum_len(manifest.shortest_period_len());
        if k == 0 || k > half {
            return Err(Error::Config(format!(
                "k = {k} must lie in [1, {half}], the half spectrum of the shortest period"
            )));
        }
        let plans = Period::ALL.map(|p| Dft::new(manifest.period_len(p)));
        Ok(Self {
            manifest: manifest.clone(),
            k,
            welch,
            plans,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn extract(&self, record: &SubjectRecord) -> Result<SubjectFeatures> {
        record.validate(&self.manifest)?;
        let slices = signal::slice_periods(record, &self.manifest)?;
        let fs = f64::from(self.manifest.sample_rate_hz);
        let mut blocks = Vec::with_capacity(N_BLOCKS);
        for (pi, per_period) in slices.iter().enumerate() {
            for (si, block) in per_period.iter().enumerate() {
                let t = signal::temporal_features(block, self.k, &self.plans[pi])
                    .map_err(|e| Error::data(&record.id, e.to_string()))?;
                let corr = spatial::correlation_matrix(block);
                let (cohe, degenerate_coherence) =
                    spatial::coherence_matrix_flagged(block, fs, &self.welch)
                        .map_err(|e| Error::data(&record.id, e.to_string()))?;
                blocks.push(BlockFeatures {
                    period: Period::ALL[pi],
                    substance: Substance::ALL[si],
                    period_len: block.cols(),
                    otf_raw: t.otf.raw,
                    biomarkers: t.biomarkers,
                    corr,
                    cohe,
                    constant_channels: t.constant_channels.iter().filter(|&&c| c).count(),
                    degenerate_coherence,
                });
            }
        }
        Ok(SubjectFeatures {
            id: record.id.clone(),
            label: record.label,
            k: self.k,
            blocks,
        })
    }

    /// Extracts subjects `0..n` from `load`, in parallel, keeping at most
    /// one record per worker in memory. Output order follows the index.
    pub fn extract_all<F>(&self, n: usize, load: F) -> Result<Vec<SubjectFeatures>>
    where
        F: Fn(usize) -> Result<SubjectRecord> + Sync,
    {
        (0..n)
            .into_par_iter()
            .map(|i| self.extract(&load(i)?))
            .collect()
    }
}

/// Refuses subject ids that belong to a held-out set.
#[derive(Clone, Debug, Default)]
pub struct LeakageGuard {
    forbidden: HashSet<String>,
}

impl LeakageGuard {
    pub fn new<'a>(held_out: impl IntoIterator<Item = &'a str>) -> Self {
        Self {
            forbidden: held_out.into_iter().map(str::to_owned).collect(),
        }
    }

    pub fn check(&self, id: &str, what: &str) -> Result<()> {
        if self.forbidden.contains(id) {
            Err(Error::Leakage(format!(
                "held-out subject {id} reached {what}"
            )))
        } else {
            Ok(())
        }
    }
}

/// Per (block, statistic) mean and standard deviation pooled over training
/// subjects and channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtfNormalizer {
    pub mean: Vec<[f64; N_OTF]>,
    pub std: Vec<[f64; N_OTF]>,
    /// Statistics without spread in the training data; mapped to zero.
    pub degenerate: Vec<[bool; N_OTF]>,
}

impl OtfNormalizer {
    pub fn fit(training: &[&SubjectFeatures]) -> Result<Self> {
        if training.is_empty() {
            return Err(Error::Config(
                "cannot fit the OTF normalizer on an empty training set".into(),
            ));
        }
        let mut mean = vec![[0.0; N_OTF]; N_BLOCKS];
        let mut std = vec![[0.0; N_OTF]; N_BLOCKS];
        let mut degenerate = vec![[false; N_OTF]; N_BLOCKS];
        for b in 0..N_BLOCKS {
            for j in 0..N_OTF {
                let values: Vec<f64> = training
                    .iter()
                    .flat_map(|s| {
                        let m = &s.blocks[b].otf_raw;
                        (0..m.rows()).map(move |c| m[(c, j)])
                    })
                    .collect();
                let n = values.len() as f64;
                let mu = values.iter().sum::<f64>() / n;
                let sd = if values.len() > 1 {
                    (values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1.0)).sqrt()
                } else {
                    0.0
                };
                mean[b][j] = mu;
                std[b][j] = sd;
                degenerate[b][j] = !(sd > signal::CHANNEL_SPREAD_TOL);
            }
        }
        Ok(Self {
            mean,
            std,
            degenerate,
        })
    }

    /// Normalized channels x 6 statistics of one block.
    pub fn apply(&self, block: usize, raw: &Matrix<f64>) -> Matrix<f64> {
        let mut out = raw.clone();
        for c in 0..raw.rows() {
            for j in 0..N_OTF {
                out[(c, j)] = if self.degenerate[block][j] {
                    0.0
                } else {
                    (raw[(c, j)] - self.mean[block][j]) / self.std[block][j]
                };
            }
        }
        out
    }
}

/// Everything a fold's model needs that is estimated from training subjects.
#[derive(Clone, Debug)]
pub struct FoldStats {
    pub priors: Vec<SpatialPrior<f64>>,
    /// Normalized correlation and coherence adjacency per block.
    pub adjacency: Vec<[Arc<Matrix<f64>>; 2]>,
    pub otf: OtfNormalizer,
    pub fam_init: FamInitWeights,
    pub n_training: usize,
}

impl FoldStats {
    /// Fits on `features[i]` for `i` in `train`; any id in `guard` is an error.
    pub fn fit(
        features: &[SubjectFeatures],
        train: &[usize],
        k: usize,
        guard: &LeakageGuard,
    ) -> Result<Self> {
        let training: Vec<&SubjectFeatures> = train.iter().map(|&i| &features[i]).collect();
        for s in &training {
            guard.check(&s.id, "fold statistics")?;
            if s.k < k {
                return Err(Error::Config(format!(
                    "features of {} were extracted at k = {}, need {k}",
                    s.id, s.k
                )));
            }
        }
        let per_subject: Vec<Vec<(Matrix<f64>, Matrix<f64>)>> = training
            .iter()
            .map(|s| {
                s.blocks
                    .iter()
                    .map(|b| (b.corr.clone(), b.cohe.clone()))
                    .collect()
            })
            .collect();
        let priors = spatial::average_priors(per_subject.iter().map(Vec::as_slice))?;
        let adjacency = priors
            .iter()
            .map(|p| {
                let NormalizedAdjacency(c) = spatial::normalize_adjacency(&p.corr)?;
                let NormalizedAdjacency(h) = spatial::normalize_adjacency(&p.cohe)?;
                Ok([Arc::new(c), Arc::new(h)])
            })
            .collect::<Result<_>>()?;
        let otf = OtfNormalizer::fit(&training)?;
        let maps = biostats::pb_maps(&training, k)?;
        let fam_init = biostats::fam_init(&maps);
        Ok(Self {
            priors,
            adjacency,
            otf,
            fam_init,
            n_training: training.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{SyntheticConfig, SyntheticGenerator};

    pub(crate) fn small_config(n: usize, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            n_subjects: n,
            seed,
            channels: 8,
            planted_channels: vec![0, 1, 2],
            ..SyntheticConfig::default()
        }
    }

    fn extract(cfg: &SyntheticConfig, k: usize) -> Vec<SubjectFeatures> {
        let generator = SyntheticGenerator::new(cfg.clone()).unwrap();
        let ex = Extractor::new(generator.manifest(), k).unwrap();
        ex.extract_all(generator.len(), |i| Ok(generator.subject(i)))
            .unwrap()
    }

    #[test]
    fn extraction_shapes() {
        let f = extract(&small_config(4, 1), 8);
        assert_eq!(f.len(), 4);
        for s in &f {
            assert_eq!(s.blocks.len(), N_BLOCKS);
            for (i, b) in s.blocks.iter().enumerate() {
                assert_eq!(block_key(i), (b.period, b.substance));
                assert_eq!(b.otf_raw.shape(), (8, N_OTF));
                assert_eq!(b.biomarkers.len(), 8);
                assert!(b.biomarkers.iter().all(|m| m.k() == 8));
                assert_eq!(b.corr.shape(), (8, 8));
            }
        }
    }

    #[test]
    fn k_beyond_half_spectrum_is_config_error() {
        let m = DatasetManifest {
            channels: 2,
            period_durations: [1, 1, 1],
            ..Default::default()
        };
        assert!(Extractor::new(&m, 11).is_ok());
        assert!(matches!(Extractor::new(&m, 12), Err(Error::Config(_))));
        assert!(matches!(Extractor::new(&m, 0), Err(Error::Config(_))));
    }

    #[test]
    fn guard_rejects_held_out_subject() {
        let f = extract(&small_config(8, 2), 4);
        let guard = LeakageGuard::new([f[3].id.as_str()]);
        assert!(matches!(
            FoldStats::fit(&f, &[0, 1, 2, 3], 4, &guard),
            Err(Error::Leakage(_))
        ));
        assert!(FoldStats::fit(&f, &[0, 1, 2, 4, 5, 6], 4, &guard).is_ok());
    }

    #[test]
    fn normalizer_standardizes_training_pool() {
        let f = extract(&small_config(6, 3), 4);
        let refs: Vec<&SubjectFeatures> = f.iter().collect();
        let norm = OtfNormalizer::fit(&refs).unwrap();
        for b in 0..N_BLOCKS {
            // per-channel z-scoring fixes mean and std of every series
            assert!(norm.degenerate[b][0] && norm.degenerate[b][1]);
            let pooled: Vec<f64> = f
                .iter()
                .flat_map(|s| norm.apply(b, &s.blocks[b].otf_raw).col(4))
                .collect();
            let mu = pooled.iter().sum::<f64>() / pooled.len() as f64;
            let var =
                pooled.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (pooled.len() - 1) as f64;
            assert!(mu.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        }
    }
}
