//! Per-channel temporal features: normalization, summary statistics, the
//! DFT biomarker (top-k amplitudes, phases and bin indices) and its inverse.
//!
//! The transform uses the `+j` kernel, `T[k] = sum x[i] e^{+j 2 pi k i / N}`,
//! so phases carry the opposite sign of the usual forward FFT. Amplitudes are
//! unaffected.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::datamodel::{DatasetManifest, Period, SubjectRecord, Substance};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{Flagged, Real};

/// Number of summary statistics per channel.
pub const N_OTF: usize = 6;
pub const OTF_NAMES: [&str; N_OTF] = ["mean", "std", "min", "max", "kurtosis", "skewness"];

/// Sliced series indexed `[period][substance]`, each `channels x L`.
pub type PeriodSlices = [[Matrix<f64>; 3]; 3];

/// Splits a record at the period boundaries and derives the total series.
pub fn slice_periods(record: &SubjectRecord, manifest: &DatasetManifest) -> Result<PeriodSlices> {
    let want = manifest.series_len();
    if record.hbo.cols() != want
        || record.hbr.cols() != want
        || record.hbo.shape() != record.hbr.shape()
    {
        return Err(Error::data(
            &record.id,
            format!(
                "series length {} does not match manifest length {want}",
                record.hbo.cols()
            ),
        ));
    }
    let total = record.hbo.zip_map(&record.hbr, |a, b| a + b);
    Ok(Period::ALL.map(|p| {
        let (s, e) = manifest.period_bounds(p);
        Substance::ALL.map(|sub| match sub {
            Substance::HbO => record.hbo.col_range(s, e),
            Substance::HbR => record.hbr.col_range(s, e),
            Substance::Total => total.col_range(s, e),
        })
    }))
}

fn mean<R: Real>(x: &[R]) -> R {
    x.iter().copied().sum::<R>() / R::from_usize_lossy(x.len())
}

fn sample_sd<R: Real>(x: &[R], mu: R) -> R {
    let ss: R = x.iter().map(|&v| (v - mu) * (v - mu)).sum();
    (ss / R::from_usize_lossy(x.len() - 1)).sqrt()
}

/// Z-scores a series with its sample mean and sample standard deviation.
/// A constant series maps to zeros and is flagged.
pub fn normalize<R: Real>(series: &[R]) -> Flagged<Vec<R>> {
    assert!(series.len() >= 2, "normalize needs at least two samples");
    let mu = mean(series);
    let sd = sample_sd(series, mu);
    if sd <= R::zero() || !sd.is_finite() {
        return Flagged::degenerate(vec![R::zero(); series.len()]);
    }
    Flagged::ok(series.iter().map(|&v| (v - mu) / sd).collect())
}

/// Row-wise [`normalize`]. The flag vector marks constant channels.
pub fn normalize_rows<R: Real>(m: &Matrix<R>) -> (Matrix<R>, Vec<bool>) {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    let mut flags = Vec::with_capacity(m.rows());
    for r in 0..m.rows() {
        let n = normalize(m.row(r));
        out.row_mut(r).copy_from_slice(&n.value);
        flags.push(n.degenerate);
    }
    (out, flags)
}

/// Mean, sample std, min, max, excess kurtosis and skewness of one series.
/// Kurtosis and skewness use population moments (Fisher definitions).
pub fn channel_stats<R: Real>(x: &[R]) -> [R; N_OTF] {
    let n = R::from_usize_lossy(x.len());
    let mu = mean(x);
    let sd = sample_sd(x, mu);
    let (mut m2, mut m3, mut m4) = (R::zero(), R::zero(), R::zero());
    let (mut lo, mut hi) = (R::infinity(), R::neg_infinity());
    for &v in x {
        let d = v - mu;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let (kurt, skew) = if m2 > R::zero() {
        (m4 / (m2 * m2) - R::lit(3.0), m3 / m2.powf(R::lit(1.5)))
    } else {
        (R::zero(), R::zero())
    };
    [mu, sd, lo, hi, kurt, skew]
}

/// Summary statistics of a normalized `channels x L` block.
#[derive(Clone, Debug, PartialEq)]
pub struct OtfStats<R> {
    /// channels x 6, before the channel-axis normalization.
    pub raw: Matrix<R>,
    /// channels x 6, each column z-scored across channels.
    pub normalized: Matrix<R>,
    /// Columns with no spread across channels; set to zero in `normalized`.
    pub degenerate_columns: [bool; N_OTF],
}

/// Spread below which a statistic is treated as constant across channels.
/// After per-channel z-scoring the mean and std columns are constant up to
/// rounding, and scaling that rounding noise up to unit variance would be
/// meaningless.
pub const CHANNEL_SPREAD_TOL: f64 = 1e-9;

pub fn otf_stats<R: Real>(normalized: &Matrix<R>) -> Result<OtfStats<R>> {
    if normalized.cols() < 4 {
        return Err(Error::Shape(format!(
            "otf_stats needs at least 4 samples, got {}",
            normalized.cols()
        )));
    }
    let channels = normalized.rows();
    let mut raw = Matrix::zeros(channels, N_OTF);
    for c in 0..channels {
        raw.row_mut(c)
            .copy_from_slice(&channel_stats(normalized.row(c)));
    }
    let mut out = Matrix::zeros(channels, N_OTF);
    let mut degenerate_columns = [false; N_OTF];
    for (j, flag) in degenerate_columns.iter_mut().enumerate() {
        let col: Vec<R> = (0..channels).map(|c| raw[(c, j)]).collect();
        if channels < 2 {
            *flag = true;
            continue;
        }
        let mu = mean(&col);
        let sd = sample_sd(&col, mu);
        if !(sd > R::lit(CHANNEL_SPREAD_TOL)) {
            *flag = true;
            continue;
        }
        for c in 0..channels {
            out[(c, j)] = (col[c] - mu) / sd;
        }
    }
    Ok(OtfStats {
        raw,
        normalized: out,
        degenerate_columns,
    })
}

/// Complex coefficients with their amplitudes and phases.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<R> {
    pub coeffs: Vec<Complex<R>>,
    pub amplitudes: Vec<R>,
    /// In (-pi, pi].
    pub phases: Vec<R>,
}

impl<R: Real> Spectrum<R> {
    pub fn from_coeffs(coeffs: Vec<Complex<R>>) -> Self {
        let amplitudes = coeffs.iter().map(|c| c.norm()).collect();
        let phases = coeffs.iter().map(|c| wrap_phase(c.arg())).collect();
        Self {
            coeffs,
            amplitudes,
            phases,
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Number of distinct physical frequencies for a real signal: bins `0..=L/2`.
    pub fn half_len(&self) -> usize {
        half_spectrum_len(self.len())
    }
}

pub fn half_spectrum_len(len: usize) -> usize {
    len / 2 + 1
}

fn wrap_phase<R: Real>(p: R) -> R {
    if p <= -R::PI() {
        p + R::TAU()
    } else {
        p
    }
}

/// Reusable transform for one length.
pub struct Dft<R: Real> {
    plan: Arc<dyn Fft<R>>,
    len: usize,
}

impl<R: Real> Dft<R> {
    pub fn new(len: usize) -> Self {
        // rustfft's inverse direction is the unnormalized e^{+j...} kernel
        let plan = FftPlanner::new().plan_fft_inverse(len);
        Self { plan, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn transform(&self, series: &[R]) -> Spectrum<R> {
        assert_eq!(series.len(), self.len, "dft length");
        let mut buf: Vec<Complex<R>> = series.iter().map(|&x| Complex::new(x, R::zero())).collect();
        self.plan.process(&mut buf);
        Spectrum::from_coeffs(buf)
    }
}

/// One-shot transform; prefer [`Dft`] for repeated lengths.
pub fn dft<R: Real>(series: &[R]) -> Spectrum<R> {
    assert!(series.len() >= 2, "dft needs at least two samples");
    Dft::new(series.len()).transform(series)
}

/// Top-k DFT components of one channel.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Biomarker<R> {
    /// Non-increasing.
    pub amplitudes: Vec<R>,
    pub phases: Vec<R>,
    /// Distinct half-spectrum bin indices.
    pub freq_indices: Vec<usize>,
}

impl<R: Real> Biomarker<R> {
    pub fn k(&self) -> usize {
        self.freq_indices.len()
    }

    /// The first `k` components; top-k is a prefix of top-k' for k <= k'.
    pub fn truncate(&self, k: usize) -> Self {
        Self {
            amplitudes: self.amplitudes[..k].to_vec(),
            phases: self.phases[..k].to_vec(),
            freq_indices: self.freq_indices[..k].to_vec(),
        }
    }
}

/// Keeps the `k` half-spectrum bins of largest amplitude, ties going to the
/// lower bin index.
pub fn topk_select<R: Real>(spectrum: &Spectrum<R>, k: usize) -> Result<Biomarker<R>> {
    let half = spectrum.half_len();
    if k == 0 || k > half {
        return Err(Error::Config(format!(
            "k = {k} outside [1, {half}] for a length-{} spectrum",
            spectrum.len()
        )));
    }
    let mut idx: Vec<usize> = (0..half).collect();
    idx.sort_by(|&a, &b| {
        spectrum.amplitudes[b]
            .partial_cmp(&spectrum.amplitudes[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    Ok(Biomarker {
        amplitudes: idx.iter().map(|&i| spectrum.amplitudes[i]).collect(),
        phases: idx.iter().map(|&i| spectrum.phases[i]).collect(),
        freq_indices: idx,
    })
}

/// Synthesizes a real length-`len` series from the retained components, each
/// paired with its conjugate mirror bin.
pub fn idft_reconstruct<R: Real>(biomarker: &Biomarker<R>, len: usize) -> Result<Vec<R>> {
    let half = half_spectrum_len(len);
    if let Some(&f) = biomarker.freq_indices.iter().find(|&&f| f >= half) {
        return Err(Error::Config(format!(
            "bin {f} outside the half spectrum of length {len}"
        )));
    }
    let n = R::from_usize_lossy(len);
    let mut out = vec![R::zero(); len];
    for ((&f, &amp), &phase) in biomarker
        .freq_indices
        .iter()
        .zip(&biomarker.amplitudes)
        .zip(&biomarker.phases)
    {
        let self_paired = f == 0 || 2 * f == len;
        let scale = if self_paired {
            amp / n
        } else {
            R::lit(2.0) * amp / n
        };
        for (i, v) in out.iter_mut().enumerate() {
            let ang = R::TAU() * R::from_usize_lossy((i * f) % len) / n;
            *v = *v + scale * (ang - phase).cos();
        }
    }
    Ok(out)
}

/// Temporal features of one (period, substance) block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTemporal<R> {
    pub otf: OtfStats<R>,
    pub biomarkers: Vec<Biomarker<R>>,
    pub normalized: Matrix<R>,
    /// Channels that were constant before normalization.
    pub constant_channels: Vec<bool>,
}

/// Normalizes each channel, then computes summary statistics and top-k biomarkers.
pub fn temporal_features<R: Real>(
    block: &Matrix<R>,
    k: usize,
    dft: &Dft<R>,
) -> Result<BlockTemporal<R>> {
    let (normalized, constant_channels) = normalize_rows(block);
    let otf = otf_stats(&normalized)?;
    let biomarkers = (0..normalized.rows())
        .map(|c| topk_select(&dft.transform(normalized.row(c)), k))
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockTemporal {
        otf,
        biomarkers,
        normalized,
        constant_channels,
    })
}
