//! Focal loss on the probability of the true class.

use super::tape::PROB_FLOOR;
use crate::scalar::{Flagged, Real};

/// `-omega * (1 - p)^gamma * ln p`, with `p` floored at [`PROB_FLOOR`].
/// The flag reports that the floor was applied.
pub fn focal_loss_scalar<R: Real>(p: R, gamma: R, omega: R) -> Flagged<R> {
    let floor = R::lit(PROB_FLOOR);
    let degenerate = !(p >= floor);
    let p = if degenerate { floor } else { p.min(R::one()) };
    let value = -omega * (R::one() - p).powf(gamma) * p.ln();
    Flagged { value, degenerate }
}

/// d/dp of [`focal_loss_scalar`].
pub fn focal_loss_derivative<R: Real>(p: R, gamma: R, omega: R) -> R {
    let p = p.max(R::lit(PROB_FLOOR)).min(R::one());
    let q = R::one() - p;
    let first = if q > R::zero() && gamma != R::zero() {
        gamma * q.powf(gamma - R::one()) * p.ln()
    } else {
        R::zero()
    };
    omega * (first - q.powf(gamma) / p)
}

/// Mean focal loss of a batch of probability rows against integer labels.
pub fn focal_loss<R: Real>(probs: &[Vec<R>], labels: &[usize], gamma: R, omega: R) -> Flagged<R> {
    let mut degenerate = false;
    let mut total = R::zero();
    for (row, &l) in probs.iter().zip(labels) {
        let f = focal_loss_scalar(row[l], gamma, omega);
        degenerate |= f.degenerate;
        total = total + f.value;
    }
    Flagged {
        value: total / R::from_usize_lossy(labels.len().max(1)),
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let f = focal_loss_scalar(0.7f64, 1.5, 0.5);
        let expected = -0.5 * 0.3f64.powf(1.5) * 0.7f64.ln();
        assert!((f.value - expected).abs() < 1e-15);
        assert!((f.value - 0.029_30).abs() < 1e-4);
        assert!(!f.degenerate);
        let f = focal_loss_scalar(0.5f64, 1.5, 0.5);
        assert!((f.value - 0.122_54).abs() < 1e-5);
        assert_eq!(focal_loss_scalar(1.0f64, 1.5, 0.5).value, 0.0);
    }

    #[test]
    fn zero_gamma_unit_weight_is_cross_entropy() {
        for p in [0.1f64, 0.5, 0.93] {
            assert!((focal_loss_scalar(p, 0.0, 1.0).value + p.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn floor_is_flagged() {
        let f = focal_loss_scalar(0.0f64, 1.5, 0.5);
        assert!(f.degenerate && f.value.is_finite());
        assert!((f.value - 0.5 * 1e-12f64.ln().abs()).abs() < 1e-9);
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        for &p in &[0.05f64, 0.3, 0.5, 0.77, 0.99] {
            for &(g, w) in &[(1.5, 0.5), (0.0, 1.0), (2.0, 0.25)] {
                let h = 1e-6;
                let fd = (focal_loss_scalar(p + h, g, w).value
                    - focal_loss_scalar(p - h, g, w).value)
                    / (2.0 * h);
                let an = focal_loss_derivative(p, g, w);
                assert!(
                    (fd - an).abs() < 1e-6 * an.abs().max(1.0),
                    "p={p} g={g}: {fd} vs {an}"
                );
            }
        }
    }

    #[test]
    fn loss_decreases_in_p() {
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let v = focal_loss_scalar(i as f64 / 100.0, 1.5, 0.5).value;
            assert!(v < prev);
            prev = v;
        }
    }
}
