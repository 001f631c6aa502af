//! Deterministic synthetic fNIRS data with planted class-dependent rhythms.
//!
//! Every subject carries 1/f-shaped Gaussian background noise on HbO. Label-1
//! subjects additionally get sinusoids at fixed period-relative DFT bins in a
//! fixed channel set. HbR mirrors HbO with a negative coupling plus its own
//! noise. Subject `i` is generated from its own ChaCha stream, so any subject
//! can be produced independently of the others.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{DatasetManifest, Period, SubjectEntry, SubjectRecord};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Coupling of HbR to HbO in generated data.
pub const HBR_COUPLING: f64 = -0.3;

/// Planted DFT bin indices, relative to each period's own length.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedBins {
    pub silent: Vec<usize>,
    pub task: Vec<usize>,
    pub post_silent: Vec<usize>,
}

impl PlantedBins {
    pub fn get(&self, period: Period) -> &[usize] {
        match period {
            Period::Silent => &self.silent,
            Period::Task => &self.task,
            Period::PostSilent => &self.post_silent,
        }
    }
}

impl Default for PlantedBins {
    fn default() -> Self {
        // 1/30, 1/20 and 1/12 Hz on the 60 s periods: inside the 0.01-0.1 Hz band
        Self {
            silent: vec![],
            task: vec![2, 3, 5],
            post_silent: vec![2, 3, 5],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_subjects: usize,
    pub positive_fraction: f64,
    pub seed: u64,
    pub planted_channels: Vec<usize>,
    pub planted_bins: PlantedBins,
    pub effect_amplitude: f64,
    pub noise_sd: f64,
    pub sample_rate_hz: u32,
    pub channels: usize,
    pub period_durations: [u32; 3],
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let m = DatasetManifest::default();
        Self {
            n_subjects: 200,
            positive_fraction: 0.5,
            seed: 2024,
            planted_channels: vec![0, 1, 2, 9, 10, 11, 37, 38, 39, 40],
            planted_bins: PlantedBins::default(),
            effect_amplitude: 3.0,
            noise_sd: 1.0,
            sample_rate_hz: m.sample_rate_hz,
            channels: m.channels,
            period_durations: m.period_durations,
        }
    }
}

impl SyntheticConfig {
    pub fn manifest_shell(&self) -> DatasetManifest {
        DatasetManifest {
            sample_rate_hz: self.sample_rate_hz,
            channels: self.channels,
            period_durations: self.period_durations,
            subjects: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::Config(format!("{field}: {why}")));
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return bad(
                "positive_fraction",
                format!("{} is not in (0, 1)", self.positive_fraction),
            );
        }
        if !(self.effect_amplitude >= 0.0 && self.effect_amplitude.is_finite()) {
            return bad(
                "effect_amplitude",
                format!("{} must be finite and >= 0", self.effect_amplitude),
            );
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return bad(
                "noise_sd",
                format!("{} must be finite and > 0", self.noise_sd),
            );
        }
        let shell = self.manifest_shell();
        shell.validate()?;
        if let Some(&c) = self.planted_channels.iter().find(|&&c| c >= self.channels) {
            return bad(
                "planted_channels",
                format!("channel {c} outside [0, {})", self.channels),
            );
        }
        for p in Period::ALL {
            let len = shell.period_len(p);
            if let Some(&b) = self
                .planted_bins
                .get(p)
                .iter()
                .find(|&&b| b == 0 || 2 * b >= len)
            {
                return bad(
                    "planted_bins",
                    format!(
                        "bin {b} outside (0, {}) for the {} period",
                        len.div_ceil(2),
                        p.name()
                    ),
                );
            }
        }
        Ok(())
    }

    /// Number of label-1 subjects: `positive_fraction * n_subjects` rounded.
    pub fn n_positive(&self) -> usize {
        (self.positive_fraction * self.n_subjects as f64).round() as usize
    }
}

/// Streaming generator; [`generate_synthetic`] collects its output.
#[derive(Clone, Debug)]
pub struct SyntheticGenerator {
    cfg: SyntheticConfig,
    labels: Vec<u8>,
    manifest: DatasetManifest,
}

impl SyntheticGenerator {
    pub fn new(cfg: SyntheticConfig) -> Result<Self> {
        cfg.validate()?;
        let n_pos = cfg.n_positive();
        let mut labels: Vec<u8> = (0..cfg.n_subjects).map(|i| u8::from(i < n_pos)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        labels.shuffle(&mut rng);
        let mut manifest = cfg.manifest_shell();
        manifest.subjects = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| {
                let id = subject_id(i);
                SubjectEntry {
                    file: format!("{id}.csv"),
                    id,
                    label,
                }
            })
            .collect();
        Ok(Self {
            cfg,
            labels,
            manifest,
        })
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subject(&self, index: usize) -> SubjectRecord {
        let cfg = &self.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index as u64 + 1);
        let len = self.manifest.series_len();
        let channels = cfg.channels;
        let mut planner = FftPlanner::new();

        let mut hbo = Matrix::zeros(channels, len);
        for ch in 0..channels {
            hbo.row_mut(ch)
                .copy_from_slice(&pink_noise(&mut rng, &mut planner, len, cfg.noise_sd));
        }
        let label = self.labels[index];
        // phases are drawn for every subject so the noise streams do not depend
        // on label or amplitude
        for &ch in &cfg.planted_channels {
            for p in Period::ALL {
                let (start, end) = self.manifest.period_bounds(p);
                let plen = (end - start) as f64;
                for &bin in cfg.planted_bins.get(p) {
                    let phase = rng.random::<f64>() * std::f64::consts::TAU;
                    if label != 1 {
                        continue;
                    }
                    let row = hbo.row_mut(ch);
                    for (i, v) in row[start..end].iter_mut().enumerate() {
                        let angle = std::f64::consts::TAU * bin as f64 * i as f64 / plen + phase;
                        *v += cfg.effect_amplitude * angle.sin();
                    }
                }
            }
        }
        let mut hbr = Matrix::zeros(channels, len);
        for ch in 0..channels {
            let noise = pink_noise(&mut rng, &mut planner, len, cfg.noise_sd);
            for ((out, &o), n) in hbr.row_mut(ch).iter_mut().zip(hbo.row(ch)).zip(noise) {
                *out = HBR_COUPLING * o + n;
            }
        }
        SubjectRecord {
            id: subject_id(index),
            label,
            hbo,
            hbr,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = SubjectRecord> + '_ {
        (0..self.len()).map(move |i| self.subject(i))
    }
}

fn subject_id(index: usize) -> String {
    format!("sub-{index:04}")
}

/// Gaussian noise with spectral magnitude proportional to `f^(-1/2)`, zero
/// mean and population standard deviation `sd`.
fn pink_noise(
    rng: &mut ChaCha8Rng,
    planner: &mut FftPlanner<f64>,
    len: usize,
    sd: f64,
) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..len)
        .map(|_| Complex::new(rng.sample(StandardNormal), 0.0))
        .collect();
    planner.plan_fft_forward(len).process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    for (k, c) in buf.iter_mut().enumerate().skip(1) {
        let f = k.min(len - k) as f64;
        *c /= f.sqrt();
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let mut out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = out.iter().sum::<f64>() / len as f64;
    let var = out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / len as f64;
    let scale = if var > 0.0 { sd / var.sqrt() } else { 0.0 };
    for x in &mut out {
        *x = (*x - mean) * scale;
    }
    out
}

/// Generates the full dataset in memory.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<(DatasetManifest, Vec<SubjectRecord>)> {
    let gen = SyntheticGenerator::new(cfg.clone())?;
    let records = gen.iter().collect();
    Ok((gen.manifest, records))
}
