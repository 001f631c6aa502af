use serde::{Deserialize, Serialize};

/// Binary classification metrics with the patient class as positive.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    /// A metric had a zero denominator and was reported as 0 (AUC as 0.5).
    pub degenerate: bool,
}

/// Decision threshold on the positive-class probability.
pub const THRESHOLD: f64 = 0.5;

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `probs[i][1]` is the probability that subject `i` is a patient.
pub fn compute_metrics(probs: &[[f64; 2]], labels: &[u8]) -> Metrics {
    assert_eq!(probs.len(), labels.len(), "one prediction per label");
    let mut m = Metrics::default();
    for (p, &y) in probs.iter().zip(labels) {
        match (p[1] > THRESHOLD, y == 1) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, false) => m.tn += 1,
            (false, true) => m.fn_ += 1,
        }
    }
    let precision = ratio(m.tp, m.tp + m.fp);
    let recall = ratio(m.tp, m.tp + m.fn_);
    m.degenerate = precision.is_none() || recall.is_none();
    m.precision = precision.unwrap_or(0.0);
    m.recall = recall.unwrap_or(0.0);
    m.f1 = if m.precision + m.recall > 0.0 {
        2.0 * m.precision * m.recall / (m.precision + m.recall)
    } else {
        0.0
    };
    m.accuracy = ratio(m.tp + m.tn, labels.len()).unwrap_or(0.0);
    let scores: Vec<f64> = probs.iter().map(|p| p[1]).collect();
    match auc(&scores, labels) {
        Some(a) => m.auc = a,
        None => {
            m.auc = 0.5;
            m.degenerate = true;
        }
    }
    m
}

/// ROC points from `(0, 0)` to `(1, 1)`, one per distinct score, highest
/// score first. Empty when a class is missing.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Vec<(f64, f64)> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    points
}

/// Trapezoidal area under [`roc_curve`]; `None` when a class is missing.
pub fn auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let roc = roc_curve(scores, labels);
    (!roc.is_empty()).then(|| {
        roc.windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum()
    })
}

/// Mean of each rate over several metric records; counts are summed.
pub fn mean_metrics(all: &[Metrics]) -> Metrics {
    let n = all.len().max(1) as f64;
    let avg = |f: fn(&Metrics) -> f64| all.iter().map(f).sum::<f64>() / n;
    Metrics {
        accuracy: avg(|m| m.accuracy),
        precision: avg(|m| m.precision),
        recall: avg(|m| m.recall),
        f1: avg(|m| m.f1),
        auc: avg(|m| m.auc),
        tp: all.iter().map(|m| m.tp).sum(),
        fp: all.iter().map(|m| m.fp).sum(),
        tn: all.iter().map(|m| m.tn).sum(),
        fn_: all.iter().map(|m| m.fn_).sum(),
        degenerate: all.iter().any(|m| m.degenerate),
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn probs(scores: &[f64]) -> Vec<[f64; 2]> {
        scores.iter().map(|&s| [1.0 - s, s]).collect()
    }

    #[test]
    fn perfect_predictions() {
        let m = compute_metrics(&probs(&[0.9, 0.8, 0.1, 0.2]), &[1, 1, 0, 0]);
        assert_eq!(
            (m.accuracy, m.precision, m.recall, m.f1, m.auc),
            (1.0, 1.0, 1.0, 1.0, 1.0)
        );
        assert!(!m.degenerate);
    }

    #[test]
    fn confusion_example() {
        let mut scores = vec![0.9, 0.8, 0.7, 0.3];
        let mut labels = vec![1, 1, 0, 1];
        scores.extend([0.1; 6]);
        labels.extend([0; 6]);
        let m = compute_metrics(&probs(&scores), &labels);
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (2, 1, 1, 6));
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.accuracy - 0.8).abs() < 1e-15);
    }

    #[test]
    fn anti_predictor_and_constant_scores() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[1, 1, 0, 0]), Some(0.0));
        assert_eq!(auc(&[0.5; 6], &[1, 0, 1, 0, 1, 1]), Some(0.5));
        assert_eq!(auc(&[0.5, 0.4], &[1, 1]), None);
        let m = compute_metrics(&probs(&[0.1, 0.2]), &[1, 0]);
        assert_eq!(m.precision, 0.0);
        assert!(m.degenerate);
    }

    fn brute_force(scores: &[f64], labels: &[u8]) -> (usize, usize, usize, usize) {
        let mut c = (0, 0, 0, 0);
        for i in 0..scores.len() {
            let pred = scores[i] > 0.5;
            let actual = labels[i] == 1;
            if pred && actual {
                c.0 += 1;
            }
            if pred && !actual {
                c.1 += 1;
            }
            if !pred && !actual {
                c.2 += 1;
            }
            if !pred && actual {
                c.3 += 1;
            }
        }
        c
    }

    #[test]
    fn agrees_with_brute_force_confusion() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let n = rng.random_range(1..40);
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..21) as f64) / 20.0)
                .collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let m = compute_metrics(&probs(&scores), &labels);
            let (tp, fp, tn, fn_) = brute_force(&scores, &labels);
            assert_eq!((m.tp, m.fp, m.tn, m.fn_), (tp, fp, tn, fn_));
            let p = if tp + fp > 0 {
                tp as f64 / (tp + fp) as f64
            } else {
                0.0
            };
            let r = if tp + fn_ > 0 {
                tp as f64 / (tp + fn_) as f64
            } else {
                0.0
            };
            assert_eq!((m.precision, m.recall), (p, r));
            assert_eq!(m.accuracy, (tp + tn) as f64 / n as f64);
            if p + r > 0.0 {
                assert!((m.f1 - 2.0 * p * r / (p + r)).abs() <= 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn auc_is_mann_whitney(data in prop::collection::btree_map(0u32..100_000, 0u8..2, 2..60)) {
            let scores: Vec<f64> = data.keys().map(|&k| f64::from(k) / 1e5).collect();
            let labels: Vec<u8> = data.values().copied().collect();
            let pos: Vec<f64> = scores.iter().zip(&labels).filter(|(_, &l)| l == 1).map(|(&s, _)| s).collect();
            let neg: Vec<f64> = scores.iter().zip(&labels).filter(|(_, &l)| l == 0).map(|(&s, _)| s).collect();
            let got = auc(&scores, &labels);
            if pos.is_empty() || neg.is_empty() {
                prop_assert_eq!(got, None);
            } else {
                let u = pos.iter().map(|p| neg.iter().filter(|&&n| n < *p).count()).sum::<usize>();
                let expected = u as f64 / (pos.len() * neg.len()) as f64;
                prop_assert!((got.unwrap() - expected).abs() <= 1e-9);
            }
        }

        #[test]
        fn roc_is_monotone(scores in prop::collection::vec(0.0f64..1.0, 4..40)) {
            let labels: Vec<u8> = (0..scores.len()).map(|i| (i % 2) as u8).collect();
            let roc = roc_curve(&scores, &labels);
            prop_assert_eq!(roc.first().copied(), Some((0.0, 0.0)));
            prop_assert_eq!(roc.last().copied(), Some((1.0, 1.0)));
            for w in roc.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
        }
    }
}
