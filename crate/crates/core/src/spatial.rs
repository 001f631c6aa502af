//! Channel-pair connectivity: Pearson correlation, Welch coherence, the
//! training-set averaged priors built from them, and the symmetric
//! normalization that turns a prior into a GCN propagation matrix.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::datamodel::{DatasetManifest, Period, SubjectRecord, Substance};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{Flagged, Real};
use crate::signal::{normalize_rows, slice_periods};

/// Pearson correlation. Constant input yields 0 with the flag set.
pub fn pearson<R: Real>(x: &[R], y: &[R]) -> Flagged<R> {
    assert_eq!(x.len(), y.len(), "pearson length mismatch");
    assert!(x.len() >= 2, "pearson needs two samples");
    let n = R::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<R>() / n;
    let my = y.iter().copied().sum::<R>() / n;
    let (mut sxy, mut sxx, mut syy) = (R::zero(), R::zero(), R::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy = sxy + da * db;
        sxx = sxx + da * da;
        syy = syy + db * db;
    }
    if sxx <= R::zero() || syy <= R::zero() {
        return Flagged::degenerate(R::zero());
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Flagged::ok(r.max(-R::one()).min(R::one()))
}

/// Welch estimator settings for coherence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchParams {
    pub segment_len: usize,
    pub overlap: usize,
    /// Inclusive frequency band in Hz.
    pub band: (f64, f64),
}

impl Default for WelchParams {
    fn default() -> Self {
        Self {
            segment_len: 256,
            overlap: 128,
            band: (0.01, 0.1),
        }
    }
}

impl WelchParams {
    fn band_bins(&self, sample_rate_hz: f64) -> Vec<usize> {
        (0..=self.segment_len / 2)
            .filter(|&j| {
                let f = j as f64 * sample_rate_hz / self.segment_len as f64;
                f >= self.band.0 && f <= self.band.1
            })
            .collect()
    }

    fn segment_starts(&self, len: usize) -> Vec<usize> {
        let step = self.segment_len - self.overlap;
        (0..=(len - self.segment_len) / step)
            .map(|s| s * step)
            .collect()
    }
}

/// Windowed, detrended band-limited segment spectra of every channel, the
/// shared intermediate of all pairwise coherences in a block.
struct BandSpectra<R> {
    /// `[channel][segment * n_bins + bin]`
    spectra: Vec<Vec<Complex<R>>>,
    n_bins: usize,
}

impl<R: Real> BandSpectra<R> {
    fn compute(rows: &[&[R]], sample_rate_hz: f64, params: &WelchParams) -> Result<Self> {
        let len = rows.first().map_or(0, |r| r.len());
        let n = params.segment_len;
        if n < 2 || params.overlap >= n {
            return Err(Error::Config(format!(
                "invalid Welch segment {n} / overlap {}",
                params.overlap
            )));
        }
        if len < 2 * n {
            return Err(Error::Shape(format!(
                "coherence needs at least {} samples, got {len}",
                2 * n
            )));
        }
        let bins = params.band_bins(sample_rate_hz);
        if bins.is_empty() {
            return Err(Error::Config(format!(
                "no Welch bins inside band {:?} Hz",
                params.band
            )));
        }
        let window: Vec<R> = (0..n)
            .map(|i| R::lit(0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos()))
            .collect();
        let basis: Vec<Vec<Complex<R>>> = bins
            .iter()
            .map(|&b| {
                (0..n)
                    .map(|i| {
                        let a = -std::f64::consts::TAU * ((b * i) % n) as f64 / n as f64;
                        Complex::new(R::lit(a.cos()), R::lit(a.sin()))
                    })
                    .collect()
            })
            .collect();
        let starts = params.segment_starts(len);
        let spectra = rows
            .iter()
            .map(|row| {
                let mut out = Vec::with_capacity(starts.len() * bins.len());
                let mut seg = vec![R::zero(); n];
                for &s in &starts {
                    let chunk = &row[s..s + n];
                    let mu = chunk.iter().copied().sum::<R>() / R::from_usize_lossy(n);
                    for ((o, &v), &w) in seg.iter_mut().zip(chunk).zip(&window) {
                        *o = (v - mu) * w;
                    }
                    for b in &basis {
                        let mut acc = Complex::new(R::zero(), R::zero());
                        for (&v, &e) in seg.iter().zip(b) {
                            acc = acc + e * v;
                        }
                        out.push(acc);
                    }
                }
                out
            })
            .collect();
        Ok(Self {
            spectra,
            n_bins: bins.len(),
        })
    }

    fn auto(&self, c: usize) -> Vec<R> {
        let mut s = vec![R::zero(); self.n_bins];
        for (i, z) in self.spectra[c].iter().enumerate() {
            s[i % self.n_bins] = s[i % self.n_bins] + z.norm_sqr();
        }
        s
    }

    /// Band-mean magnitude-squared coherence of channels `a` and `b`.
    fn pair(&self, a: usize, b: usize, saa: &[R], sbb: &[R]) -> Flagged<R> {
        let mut cross = vec![Complex::new(R::zero(), R::zero()); self.n_bins];
        for (i, (x, y)) in self.spectra[a].iter().zip(&self.spectra[b]).enumerate() {
            cross[i % self.n_bins] = cross[i % self.n_bins] + x * y.conj();
        }
        let mut total = R::zero();
        let mut degenerate = false;
        for j in 0..self.n_bins {
            let denom = saa[j] * sbb[j];
            if denom <= R::zero() {
                degenerate = true;
                continue;
            }
            total = total + (cross[j].norm_sqr() / denom).min(R::one());
        }
        let value = total / R::from_usize_lossy(self.n_bins);
        if degenerate {
            Flagged::degenerate(value)
        } else {
            Flagged::ok(value)
        }
    }
}

/// Welch magnitude-squared coherence averaged over the band. A bin with a
/// zero auto-spectrum contributes 0 and sets the flag.
pub fn coherence<R: Real>(
    x: &[R],
    y: &[R],
    sample_rate_hz: f64,
    params: &WelchParams,
) -> Result<Flagged<R>> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "coherence inputs of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    let spec = BandSpectra::compute(&[x, y], sample_rate_hz, params)?;
    let (sxx, syy) = (spec.auto(0), spec.auto(1));
    Ok(spec.pair(0, 1, &sxx, &syy))
}

/// Pearson correlation of every channel pair of a `channels x L` block, with
/// a unit diagonal.
pub fn correlation_matrix<R: Real>(block: &Matrix<R>) -> Matrix<R> {
    let (z, _) = normalize_rows(block);
    let (c, l) = z.shape();
    let mut out = Matrix::zeros(c, c);
    R::gemm(
        c,
        l,
        c,
        z.as_slice(),
        false,
        z.as_slice(),
        true,
        R::zero(),
        out.as_mut_slice(),
    );
    let scale = R::from_usize_lossy(l - 1);
    for i in 0..c {
        for j in 0..c {
            out[(i, j)] = if i == j {
                R::one()
            } else {
                (out[(i, j)] / scale).max(-R::one()).min(R::one())
            };
        }
    }
    // exact symmetry
    for i in 0..c {
        for j in 0..i {
            out[(j, i)] = out[(i, j)];
        }
    }
    out
}

/// Band-mean coherence of every channel pair, with a unit diagonal.
pub fn coherence_matrix<R: Real>(
    block: &Matrix<R>,
    sample_rate_hz: f64,
    params: &WelchParams,
) -> Result<Matrix<R>> {
    coherence_matrix_flagged(block, sample_rate_hz, params).map(|(m, _)| m)
}

/// As [`coherence_matrix`], also reporting whether any pair hit a zero
/// auto-spectrum.
pub fn coherence_matrix_flagged<R: Real>(
    block: &Matrix<R>,
    sample_rate_hz: f64,
    params: &WelchParams,
) -> Result<(Matrix<R>, bool)> {
    let rows: Vec<&[R]> = (0..block.rows()).map(|r| block.row(r)).collect();
    let spec = BandSpectra::compute(&rows, sample_rate_hz, params)?;
    let autos: Vec<Vec<R>> = (0..block.rows()).map(|c| spec.auto(c)).collect();
    let c = block.rows();
    let mut out = Matrix::identity(c);
    let mut degenerate = false;
    for i in 0..c {
        for j in 0..i {
            let f = spec.pair(i, j, &autos[i], &autos[j]);
            degenerate |= f.degenerate;
            out[(i, j)] = f.value;
            out[(j, i)] = f.value;
        }
    }
    Ok((out, degenerate))
}

/// Training-set averaged connectivity for one (period, substance).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialPrior<R> {
    pub period: Period,
    pub substance: Substance,
    pub corr: Matrix<R>,
    pub cohe: Matrix<R>,
    pub n_subjects_averaged: usize,
}

/// Correlation and coherence of every (period, substance) block of one
/// subject, indexed `period * 3 + substance`.
pub fn subject_connectivity(
    record: &SubjectRecord,
    manifest: &DatasetManifest,
    params: &WelchParams,
) -> Result<Vec<(Matrix<f64>, Matrix<f64>)>> {
    let slices = slice_periods(record, manifest)?;
    let fs = f64::from(manifest.sample_rate_hz);
    let mut out = Vec::with_capacity(9);
    for period in &slices {
        for block in period {
            out.push((
                correlation_matrix(block),
                coherence_matrix(block, fs, params)?,
            ));
        }
    }
    Ok(out)
}

/// Entrywise mean of per-subject connectivity, accumulated in iteration order.
pub fn average_priors<'a>(
    per_subject: impl IntoIterator<Item = &'a [(Matrix<f64>, Matrix<f64>)]>,
) -> Result<Vec<SpatialPrior<f64>>> {
    let mut sums: Option<Vec<(Matrix<f64>, Matrix<f64>)>> = None;
    let mut n = 0usize;
    for subject in per_subject {
        if subject.len() != 9 {
            return Err(Error::Shape(format!(
                "expected 9 connectivity blocks, got {}",
                subject.len()
            )));
        }
        match &mut sums {
            None => sums = Some(subject.to_vec()),
            Some(acc) => {
                for ((sc, sh), (c, h)) in acc.iter_mut().zip(subject) {
                    *sc = sc.zip_map(c, |a, b| a + b);
                    *sh = sh.zip_map(h, |a, b| a + b);
                }
            }
        }
        n += 1;
    }
    let sums =
        sums.ok_or_else(|| Error::Config("cannot build priors from an empty training set".into()))?;
    let inv = 1.0 / n as f64;
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(i, (c, h))| SpatialPrior {
            period: Period::ALL[i / 3],
            substance: Substance::ALL[i % 3],
            corr: c.map(|v| v * inv),
            cohe: h.map(|v| v * inv),
            n_subjects_averaged: n,
        })
        .collect())
}

/// Averages correlation and coherence over the training subjects, one prior per
/// (period, substance) in period-major order.
pub fn build_priors(
    training: &[SubjectRecord],
    manifest: &DatasetManifest,
) -> Result<Vec<SpatialPrior<f64>>> {
    build_priors_with(training, manifest, &WelchParams::default())
}

pub fn build_priors_with(
    training: &[SubjectRecord],
    manifest: &DatasetManifest,
    params: &WelchParams,
) -> Result<Vec<SpatialPrior<f64>>> {
    if training.is_empty() {
        return Err(Error::Config(
            "cannot build priors from an empty training set".into(),
        ));
    }
    let per: Vec<_> = training
        .iter()
        .map(|r| subject_connectivity(r, manifest, params))
        .collect::<Result<_>>()?;
    average_priors(per.iter().map(Vec::as_slice))
}

/// `D^{-1/2} |E| D^{-1/2}` with `D` the row sums of `|E|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedAdjacency<R>(pub Matrix<R>);

impl<R> NormalizedAdjacency<R> {
    pub fn matrix(&self) -> &Matrix<R> {
        &self.0
    }
}

pub fn normalize_adjacency<R: Real>(e: &Matrix<R>) -> Result<NormalizedAdjacency<R>> {
    if !e.is_symmetric(R::lit(1e-9)) {
        return Err(Error::Shape(
            "adjacency must be square and symmetric".into(),
        ));
    }
    let abs = e.map(|v| v.abs());
    let n = abs.rows();
    let mut inv_sqrt = Vec::with_capacity(n);
    for i in 0..n {
        let d: R = abs.row(i).iter().copied().sum();
        if !(d > R::zero()) {
            return Err(Error::Numeric(format!("node {i} has zero degree")));
        }
        inv_sqrt.push(R::one() / d.sqrt());
    }
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let sym = (abs[(i, j)] + abs[(j, i)]) * R::lit(0.5);
            out[(i, j)] = (inv_sqrt[i] * inv_sqrt[j]) * sym;
        }
    }
    Ok(NormalizedAdjacency(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// Direct Pearson with squared deviations in the denominator.
    fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let dx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let dy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        num / (dx.sqrt() * dy.sqrt())
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0f64, 2.0, 3.0];
        assert!((pearson(&x, &x).value - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).value + 1.0).abs() < 1e-15);
        let r = pearson(&x, &[1.0, 2.0, 4.0]).value;
        assert!((r - 3.0 / (2.0f64 * 14.0 / 3.0).sqrt()).abs() < 1e-12);
        assert!((r - 0.98198).abs() < 1e-4);
        assert_eq!(pearson(&[2.0, 2.0], &[1.0, 3.0]), Flagged::degenerate(0.0));
    }

    #[test]
    fn pearson_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = noise(&mut rng, 37);
            let y: Vec<f64> = noise(&mut rng, 37)
                .iter()
                .zip(&x)
                .map(|(a, b)| a + 0.5 * b)
                .collect();
            assert!((pearson(&x, &y).value - pearson_oracle(&x, &y)).abs() <= 1e-12);
        }
    }

    #[test]
    fn coherence_of_identical_signals_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = noise(&mut rng, 1200);
        let c = coherence(&x, &x, 20.0, &WelchParams::default()).unwrap();
        assert!((c.value - 1.0).abs() < 1e-9 && !c.degenerate);
    }

    #[test]
    fn coherence_survives_small_circular_delay() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = noise(&mut rng, 1200);
        let d = 2;
        let y: Vec<f64> = (0..x.len())
            .map(|i| x[(i + x.len() - d) % x.len()])
            .collect();
        let c = coherence(&x, &y, 20.0, &WelchParams::default())
            .unwrap()
            .value;
        assert!(c > 0.99, "{c}");
    }

    fn white_noise_coherences(rng: &mut ChaCha8Rng, trials: usize) -> Vec<f64> {
        (0..trials)
            .map(|_| {
                let (x, y) = (noise(rng, 1200), noise(rng, 1200));
                coherence(&x, &y, 20.0, &WelchParams::default())
                    .unwrap()
                    .value
            })
            .collect()
    }

    /// At 20 Hz only one Welch bin falls in the band, so the null distribution
    /// is wide: the 99th percentile sits near 0.6.
    #[test]
    fn white_noise_coherence_respects_simulated_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut sim = white_noise_coherences(&mut rng, 1000);
        sim.sort_by(f64::total_cmp);
        let p99 = sim[989];
        assert!(sim[500] < 0.35, "median {}", sim[500]);
        assert!(p99 < 1.0, "p99 {p99}");
        let fresh = white_noise_coherences(&mut rng, 1000);
        let above = fresh.iter().filter(|&&c| c > p99).count();
        assert!(
            above <= 25,
            "{above} of 1000 fresh pairs exceed the simulated p99 {p99}"
        );
    }

    #[test]
    fn coherence_flags_zero_auto_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = noise(&mut rng, 600);
        let c = coherence(&x, &[3.0; 600], 20.0, &WelchParams::default()).unwrap();
        assert_eq!(c, Flagged::degenerate(0.0));
        assert!(coherence(&x[..300], &x[..300], 20.0, &WelchParams::default()).is_err());
    }

    #[test]
    fn matrices_are_valid_priors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = noise(&mut rng, 600);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|k| {
                noise(&mut rng, 600)
                    .iter()
                    .zip(&base)
                    .map(|(a, b)| a + k as f64 * 0.3 * b)
                    .collect()
            })
            .collect();
        let block = Matrix::from_rows(&rows);
        let corr = correlation_matrix(&block);
        let cohe = coherence_matrix(&block, 20.0, &WelchParams::default()).unwrap();
        for m in [&corr, &cohe] {
            assert!(m.is_symmetric(1e-12));
            for i in 0..5 {
                assert_eq!(m[(i, i)], 1.0);
            }
        }
        for i in 0..5 {
            for j in 0..5 {
                assert!((-1.0..=1.0).contains(&corr[(i, j)]));
                assert!((0.0..=1.0).contains(&cohe[(i, j)]));
                if i != j {
                    assert!((corr[(i, j)] - pearson_oracle(&rows[i], &rows[j])).abs() < 1e-12);
                    let c = coherence(&rows[i], &rows[j], 20.0, &WelchParams::default())
                        .unwrap()
                        .value;
                    assert!((cohe[(i, j)] - c).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn connectivity_is_invariant_to_positive_affine_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let block = Matrix::from_vec(4, 600, noise(&mut rng, 2400));
        let scaled = block.map(|v| 3.7 * v - 12.0);
        let p = WelchParams::default();
        assert!(correlation_matrix(&block).max_abs_diff(&correlation_matrix(&scaled)) <= 1e-9);
        let a = coherence_matrix(&block, 20.0, &p).unwrap();
        let b = coherence_matrix(&scaled, 20.0, &p).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-9);
    }

    #[test]
    fn connectivity_is_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let block = Matrix::from_vec(6, 600, noise(&mut rng, 3600));
        let perm = [3, 0, 5, 1, 4, 2];
        let pb = block.permute_rows(&perm);
        let p = WelchParams::default();
        let c1 = correlation_matrix(&block).permute_symmetric(&perm);
        assert!(c1.max_abs_diff(&correlation_matrix(&pb)) <= 1e-12);
        let h1 = coherence_matrix(&block, 20.0, &p)
            .unwrap()
            .permute_symmetric(&perm);
        assert!(h1.max_abs_diff(&coherence_matrix(&pb, 20.0, &p).unwrap()) <= 1e-12);
    }

    #[test]
    fn normalize_adjacency_examples() {
        let id = Matrix::<f64>::identity(4);
        assert_eq!(normalize_adjacency(&id).unwrap().0, id);
        let ones = Matrix::from_vec(2, 2, vec![1.0; 4]);
        let a = normalize_adjacency(&ones).unwrap().0;
        assert!(a.max_abs_diff(&Matrix::from_vec(2, 2, vec![0.5; 4])) < 1e-15);
        let asym = Matrix::from_vec(2, 2, vec![1.0, 0.2, 0.3, 1.0]);
        assert!(normalize_adjacency(&asym).is_err());
    }

    #[test]
    fn normalize_adjacency_recovers_degrees_and_commutes_with_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 7;
        let mut e = Matrix::identity(n);
        for i in 0..n {
            for j in 0..i {
                let v: f64 = rng.random_range(-1.0..1.0);
                e[(i, j)] = v;
                e[(j, i)] = v;
            }
        }
        let a = normalize_adjacency(&e).unwrap().0;
        assert!(a.is_symmetric(0.0));
        let deg: Vec<f64> = (0..n)
            .map(|i| e.row(i).iter().map(|v| v.abs()).sum())
            .collect();
        for i in 0..n {
            let s: f64 = (0..n)
                .map(|j| deg[i].sqrt() * a[(i, j)] * deg[j].sqrt())
                .sum();
            assert!((s - deg[i]).abs() <= 1e-12 * deg[i]);
            for j in 0..n {
                assert!((0.0..=1.0).contains(&a[(i, j)]));
            }
        }
        let perm = [6, 2, 0, 5, 1, 3, 4];
        let lhs = normalize_adjacency(&e.permute_symmetric(&perm)).unwrap().0;
        assert!(lhs.max_abs_diff(&a.permute_symmetric(&perm)) <= 1e-15);
    }

    fn tiny_manifest() -> DatasetManifest {
        DatasetManifest {
            sample_rate_hz: 20,
            channels: 3,
            period_durations: [30, 30, 30],
            subjects: vec![],
        }
    }

    fn tiny_record(seed: u64) -> SubjectRecord {
        let m = tiny_manifest();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = m.series_len();
        SubjectRecord {
            id: format!("s{seed}"),
            label: 0,
            hbo: Matrix::from_vec(3, len, noise(&mut rng, 3 * len)),
            hbr: Matrix::from_vec(3, len, noise(&mut rng, 3 * len)),
        }
    }

    #[test]
    fn priors_average_over_subjects() {
        let m = tiny_manifest();
        let (a, b, c) = (tiny_record(1), tiny_record(2), tiny_record(3));
        let pa = build_priors(std::slice::from_ref(&a), &m).unwrap();
        let pb = build_priors(std::slice::from_ref(&b), &m).unwrap();
        let pc = build_priors(std::slice::from_ref(&c), &m).unwrap();
        let direct = subject_connectivity(&a, &m, &WelchParams::default()).unwrap();
        assert_eq!(pa.len(), 9);
        assert_eq!(pa[4].corr, direct[4].0);
        assert_eq!(pa[4].period, Period::Task);
        assert_eq!(pa[4].substance, Substance::HbR);

        let pab = build_priors(&[a.clone(), b.clone()], &m).unwrap();
        for i in 0..9 {
            let avg = pa[i].corr.zip_map(&pb[i].corr, |x, y| 0.5 * (x + y));
            assert!(pab[i].corr.max_abs_diff(&avg) <= 1e-12);
            assert_eq!(pab[i].n_subjects_averaged, 2);
        }
        // union prior = count-weighted mean of group priors
        let pabc = build_priors(&[a, b, c], &m).unwrap();
        for i in 0..9 {
            let w = pab[i].cohe.zip_map(&pc[i].cohe, |x, y| (2.0 * x + y) / 3.0);
            assert!(pabc[i].cohe.max_abs_diff(&w) <= 1e-12);
        }
        assert!(build_priors(&[], &m).is_err());
    }
}
