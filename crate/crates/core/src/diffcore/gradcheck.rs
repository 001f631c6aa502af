//! Central finite-difference checks of tape gradients.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Graph, ParamStore, Var};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Denominator floor of the relative error, so that coordinates whose true
/// gradient is near zero are judged on absolute error.
pub const REL_ERROR_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub probes: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Probe index (coordinate index in coordinate mode) of the worst error.
    pub worst_probe: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

fn eval<R: Real, F>(store: &ParamStore<R>, f: &F) -> Result<f64>
where
    F: Fn(&mut Graph<R>, &ParamStore<R>) -> Result<Var>,
{
    let mut g = Graph::new();
    let out = f(&mut g, store)?;
    let t = g.value(out);
    if t.numel() != 1 {
        return Err(Error::Shape(format!(
            "gradient check needs a scalar, got {} values",
            t.numel()
        )));
    }
    Ok(t.data()[0].to_f64_lossy())
}

/// Analytic gradient of `f` at the store's current values, flattened.
pub fn analytic_gradient<R: Real, F>(store: &mut ParamStore<R>, f: &F) -> Result<Vec<R>>
where
    F: Fn(&mut Graph<R>, &ParamStore<R>) -> Result<Var>,
{
    store.zero_grad();
    let mut g = Graph::new();
    let out = f(&mut g, store)?;
    g.backward(out, store)?;
    let grads = store.flat_grads();
    store.zero_grad();
    Ok(grads)
}

/// Compares the backward pass of `f` against central differences with step
/// `step`. `probes = None` checks every coordinate; `Some(n)` checks `n`
/// random unit directions.
pub fn grad_check<R: Real, F>(
    store: &mut ParamStore<R>,
    f: F,
    step: f64,
    probes: Option<usize>,
    rng: &mut impl Rng,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<R>, &ParamStore<R>) -> Result<Var>,
{
    let analytic = analytic_gradient(store, &f)?;
    compare_gradient(store, f, &analytic, step, probes, rng)
}

/// Like [`grad_check`] but against a caller-supplied gradient.
pub fn compare_gradient<R: Real, F>(
    store: &mut ParamStore<R>,
    f: F,
    analytic: &[R],
    step: f64,
    probes: Option<usize>,
    rng: &mut impl Rng,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<R>, &ParamStore<R>) -> Result<Var>,
{
    let base = store.flat_values();
    if analytic.len() != base.len() {
        return Err(Error::Shape(format!(
            "{} gradient values for {} parameters",
            analytic.len(),
            base.len()
        )));
    }
    let directions: Vec<Option<Vec<f64>>> = match probes {
        None => (0..base.len()).map(|_| None).collect(),
        Some(n) => (0..n)
            .map(|_| {
                let v: Vec<f64> = (0..base.len())
                    .map(|_| StandardNormal.sample(rng))
                    .collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                Some(v.into_iter().map(|x| x / norm).collect())
            })
            .collect(),
    };
    let mut report = GradCheckReport {
        probes: directions.len(),
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_probe: 0,
    };
    let mut shifted = base.clone();
    for (i, dir) in directions.iter().enumerate() {
        let mut side = |sign: f64| -> Result<f64> {
            match dir {
                None => {
                    shifted.copy_from_slice(&base);
                    shifted[i] = base[i] + R::lit(sign * step);
                }
                Some(u) => {
                    for ((s, &b), &d) in shifted.iter_mut().zip(&base).zip(u) {
                        *s = b + R::lit(sign * step * d);
                    }
                }
            }
            store.set_flat_values(&shifted);
            eval(store, &f)
        };
        let numeric = (side(1.0)? - side(-1.0)?) / (2.0 * step);
        let exact = match dir {
            None => analytic[i].to_f64_lossy(),
            Some(u) => analytic
                .iter()
                .zip(u)
                .map(|(a, d)| a.to_f64_lossy() * d)
                .sum(),
        };
        let abs = (numeric - exact).abs();
        let rel = abs / numeric.abs().max(exact.abs()).max(REL_ERROR_FLOOR);
        report.max_abs_error = report.max_abs_error.max(abs);
        if rel > report.max_rel_error || !rel.is_finite() {
            report.max_rel_error = if rel.is_finite() { rel } else { f64::INFINITY };
            report.worst_probe = i;
        }
    }
    store.set_flat_values(&base);
    Ok(report)
}
