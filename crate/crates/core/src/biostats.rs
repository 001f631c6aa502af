//! Point-biserial screening of biomarker amplitudes against the label.
//!
//! Label 0 is a healthy control and label 1 a patient. The statistic is
//! signed so that a feature larger in controls is positive.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::{Period, Substance};
use crate::error::{Error, Result};
use crate::features::{block_key, SubjectFeatures, N_BLOCKS};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// `(M0 - M1) / sigma * sqrt(n0 * n1) / (n0 + n1)` with `sigma` the
/// population standard deviation over all subjects.
pub fn point_biserial<R: Real>(values: &[R], labels: &[u8]) -> Result<R> {
    if values.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} values for {} labels",
            values.len(),
            labels.len()
        )));
    }
    let (mut s0, mut s1, mut n0, mut n1) = (R::zero(), R::zero(), 0usize, 0usize);
    for (&v, &l) in values.iter().zip(labels) {
        if l == 0 {
            s0 = s0 + v;
            n0 += 1;
        } else {
            s1 = s1 + v;
            n1 += 1;
        }
    }
    if n0 == 0 || n1 == 0 {
        return Err(Error::Numeric("point-biserial needs both classes".into()));
    }
    let n = R::from_usize_lossy(n0 + n1);
    let mean = (s0 + s1) / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<R>() / n;
    if !(var > R::zero()) {
        return Err(Error::Numeric(
            "point-biserial of a constant feature".into(),
        ));
    }
    let (m0, m1) = (s0 / R::from_usize_lossy(n0), s1 / R::from_usize_lossy(n1));
    let scale = (R::from_usize_lossy(n0) * R::from_usize_lossy(n1)).sqrt() / n;
    let r = (m0 - m1) / var.sqrt() * scale;
    Ok(r.max(-R::one()).min(R::one()))
}

/// Screening of every (channel, slot) amplitude of one (period, substance).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointBiserialMap {
    pub period: Period,
    pub substance: Substance,
    /// channels x k; zero where undefined.
    pub r: Matrix<f64>,
    pub mean_normal: Matrix<f64>,
    pub mean_patient: Matrix<f64>,
    pub n_normal: usize,
    pub n_patient: usize,
    /// Cells whose feature was constant across the subjects.
    pub undefined_cells: usize,
}

/// Maps for every (period, substance) over the given subjects, block order.
pub fn pb_maps(subjects: &[&SubjectFeatures], k: usize) -> Result<Vec<PointBiserialMap>> {
    let labels: Vec<u8> = subjects.iter().map(|s| s.label).collect();
    let n_patient = labels.iter().filter(|&&l| l == 1).count();
    let n_normal = labels.len() - n_patient;
    if n_normal == 0 || n_patient == 0 {
        return Err(Error::Numeric(
            "screening needs subjects of both classes".into(),
        ));
    }
    let channels = subjects[0].channels();
    (0..N_BLOCKS)
        .map(|b| {
            let (period, substance) = block_key(b);
            let mut map = PointBiserialMap {
                period,
                substance,
                r: Matrix::zeros(channels, k),
                mean_normal: Matrix::zeros(channels, k),
                mean_patient: Matrix::zeros(channels, k),
                n_normal,
                n_patient,
                undefined_cells: 0,
            };
            let mut values = vec![0.0; subjects.len()];
            for c in 0..channels {
                for j in 0..k {
                    for (v, s) in values.iter_mut().zip(subjects) {
                        *v = s.blocks[b].biomarkers[c].amplitudes[j];
                    }
                    let mean_of = |class: u8, n: usize| {
                        values
                            .iter()
                            .zip(&labels)
                            .filter(|(_, &l)| l == class)
                            .map(|(v, _)| v)
                            .sum::<f64>()
                            / n as f64
                    };
                    map.mean_normal[(c, j)] = mean_of(0, n_normal);
                    map.mean_patient[(c, j)] = mean_of(1, n_patient);
                    match point_biserial(&values, &labels) {
                        Ok(r) => map.r[(c, j)] = r,
                        Err(_) => map.undefined_cells += 1,
                    }
                }
            }
            Ok(map)
        })
        .collect()
}

/// Maps computed on one stratified subsample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    pub proportion: f64,
    pub n_subjects: usize,
    pub maps: Vec<PointBiserialMap>,
}

/// Indices of a stratified random subsample keeping `proportion` of each
/// class, in ascending order. A proportion of 1 keeps everyone.
pub fn stratified_subsample(
    labels: &[u8],
    proportion: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    if !(proportion > 0.0 && proportion <= 1.0) {
        return Err(Error::Config(format!(
            "proportion {proportion} outside (0, 1]"
        )));
    }
    let mut chosen = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let take = (proportion * idx.len() as f64).round() as usize;
        if take == 0 {
            return Err(Error::Numeric(format!(
                "subsample at proportion {proportion} has no subjects of class {class}"
            )));
        }
        if take < idx.len() {
            idx.shuffle(rng);
            idx.truncate(take);
        }
        chosen.extend(idx);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Screens top-`k` amplitudes on a stratified subsample per proportion.
pub fn screen_features(
    features: &[SubjectFeatures],
    k: usize,
    proportions: &[f64],
    seed: u64,
) -> Result<Vec<Screening>> {
    let labels: Vec<u8> = features.iter().map(|s| s.label).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    proportions
        .iter()
        .map(|&p| {
            let idx = stratified_subsample(&labels, p, &mut rng)?;
            let subset: Vec<&SubjectFeatures> = idx.iter().map(|&i| &features[i]).collect();
            Ok(Screening {
                proportion: p,
                n_subjects: subset.len(),
                maps: pb_maps(&subset, k)?,
            })
        })
        .collect()
}

/// Initial FAM weights, `|r|` per (channel, slot), one matrix per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamInitWeights {
    pub weights: Vec<Matrix<f64>>,
}

pub fn fam_init(maps: &[PointBiserialMap]) -> FamInitWeights {
    FamInitWeights {
        weights: maps.iter().map(|m| m.r.map(f64::abs)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::{prop, prop_assert, proptest, ProptestConfig};
    use rand::Rng;

    use super::*;
    use crate::datamodel::{PlantedBins, SyntheticConfig, SyntheticGenerator};
    use crate::features::Extractor;

    /// Pearson correlation against the control indicator, by the textbook
    /// two-pass formula.
    fn pearson_oracle(values: &[f64], labels: &[u8]) -> f64 {
        let n = values.len() as f64;
        let y: Vec<f64> = labels
            .iter()
            .map(|&l| if l == 0 { 1.0 } else { 0.0 })
            .collect();
        let mx = values.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = values
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - mx) * (b - my))
            .sum();
        let sxx: f64 = values.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn perfect_separation_is_one() {
        let values = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let labels = [0, 0, 0, 1, 1, 1];
        assert_eq!(point_biserial(&values, &labels).unwrap(), 1.0);
        let swapped = [1, 1, 1, 0, 0, 0];
        assert_eq!(point_biserial(&values, &swapped).unwrap(), -1.0);
    }

    #[test]
    fn equal_means_give_zero() {
        let values = [1.0, 3.0, 2.0, 2.0];
        assert_eq!(point_biserial(&values, &[0, 0, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(point_biserial(&[1.0, 2.0], &[1, 1]).is_err());
        assert!(point_biserial(&[2.0, 2.0, 2.0], &[0, 1, 1]).is_err());
    }

    #[test]
    fn agrees_with_statrs_pearson() {
        use statrs::statistics::Statistics;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let values: Vec<f64> = (0..30).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut labels: Vec<u8> = (0..30).map(|_| rng.random_range(0..2)).collect();
            labels[0] = 0;
            labels[1] = 1;
            let y: Vec<f64> = labels.iter().map(|&l| 1.0 - f64::from(l)).collect();
            let cov = values.clone().covariance(y.clone());
            let r = cov / (values.clone().std_dev() * y.clone().std_dev());
            assert!((point_biserial(&values, &labels).unwrap() - r).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn pearson_equivalence_swap_and_affine(
            data in prop::collection::vec((-1e3f64..1e3, 0u8..2), 3..60),
            a in 0.01f64..100.0,
            b in -50.0f64..50.0,
        ) {
            let mut values: Vec<f64> = data.iter().map(|d| d.0).collect();
            let mut labels: Vec<u8> = data.iter().map(|d| d.1).collect();
            labels[0] = 0;
            labels[1] = 1;
            values[0] += 1.0;
            let r = point_biserial(&values, &labels).unwrap();
            prop_assert!((r - pearson_oracle(&values, &labels)).abs() <= 1e-12);
            let flipped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
            prop_assert!((point_biserial(&values, &flipped).unwrap() + r).abs() <= 1e-12);
            let pos: Vec<f64> = values.iter().map(|v| a * v + b).collect();
            prop_assert!((point_biserial(&pos, &labels).unwrap() - r).abs() <= 1e-12);
            let neg: Vec<f64> = values.iter().map(|v| -a * v + b).collect();
            prop_assert!((point_biserial(&neg, &labels).unwrap() + r).abs() <= 1e-12);
        }
    }

    fn planted_features(n: usize, seed: u64) -> (SyntheticConfig, Vec<SubjectFeatures>) {
        let cfg = SyntheticConfig {
            n_subjects: n,
            seed,
            channels: 10,
            planted_channels: vec![1, 4, 7],
            ..SyntheticConfig::default()
        };
        let generator = SyntheticGenerator::new(cfg.clone()).unwrap();
        let ex = Extractor::new(generator.manifest(), 8).unwrap();
        (
            cfg,
            ex.extract_all(generator.len(), |i| Ok(generator.subject(i)))
                .unwrap(),
        )
    }

    #[test]
    fn subsample_is_stratified_and_full_at_one() {
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i % 3 == 0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let idx = stratified_subsample(&labels, 0.5, &mut rng).unwrap();
        let pos = idx.iter().filter(|&&i| labels[i] == 1).count();
        assert_eq!((pos, idx.len() - pos), (7, 13));
        assert_eq!(
            stratified_subsample(&labels, 1.0, &mut rng).unwrap(),
            (0..40).collect::<Vec<_>>()
        );
        assert!(stratified_subsample(&labels, 0.01, &mut rng).is_err());
        assert!(stratified_subsample(&labels, 1.5, &mut rng).is_err());
    }

    #[test]
    fn screening_recovers_planted_channels() {
        let (cfg, features) = planted_features(40, 5);
        let screens = screen_features(&features, 8, &[0.4, 0.7, 1.0], 9).unwrap();
        let all: Vec<&SubjectFeatures> = features.iter().collect();
        assert_eq!(screens[2].maps, pb_maps(&all, 8).unwrap());
        let other = screen_features(&features, 8, &[1.0], 123).unwrap();
        assert_eq!(other[0].maps, screens[2].maps);
        for screen in &screens {
            for map in screen
                .maps
                .iter()
                .filter(|m| m.substance == Substance::HbO && m.period != Period::Silent)
            {
                assert!(map.r.as_slice().iter().all(|r| r.abs() <= 1.0));
                let (mut planted, mut rest) = (Vec::new(), Vec::new());
                for c in 0..cfg.channels {
                    let bucket = if cfg.planted_channels.contains(&c) {
                        &mut planted
                    } else {
                        &mut rest
                    };
                    bucket.extend(map.r.row(c).iter().map(|r| r.abs()));
                }
                let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                assert!(
                    mean(&planted) > mean(&rest),
                    "proportion {}",
                    screen.proportion
                );
            }
        }
    }

    #[test]
    fn fam_init_is_absolute_r() {
        let mut r = Matrix::zeros(2, 2);
        r[(0, 1)] = -0.5;
        r[(1, 0)] = 0.25;
        let map = PointBiserialMap {
            period: Period::Task,
            substance: Substance::HbO,
            r: r.clone(),
            mean_normal: Matrix::zeros(2, 2),
            mean_patient: Matrix::zeros(2, 2),
            n_normal: 1,
            n_patient: 1,
            undefined_cells: 0,
        };
        let w = fam_init(&[map.clone()]);
        assert_eq!(w.weights[0].as_slice(), &[0.0, 0.5, 0.25, 0.0]);
        let zero = PointBiserialMap {
            r: Matrix::zeros(2, 2),
            ..map
        };
        assert!(fam_init(&[zero]).weights[0]
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn fam_init_peaks_on_planted_cells() {
        let (cfg, features) = planted_features(40, 6);
        let all: Vec<&SubjectFeatures> = features.iter().collect();
        let w = fam_init(&pb_maps(&all, 8).unwrap());
        let planted = PlantedBins::default();
        for b in 0..N_BLOCKS {
            let (period, substance) = block_key(b);
            if planted.get(period).is_empty() || substance != Substance::HbO {
                continue;
            }
            let m = &w.weights[b];
            let (argmax, _) = m
                .as_slice()
                .iter()
                .enumerate()
                .fold(
                    (0, -1.0),
                    |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
                );
            let (c, slot) = (argmax / m.cols(), argmax % m.cols());
            assert!(cfg.planted_channels.contains(&c), "{period:?}: channel {c}");
            assert!(slot < planted.get(period).len(), "{period:?}: slot {slot}");
        }
    }
}
