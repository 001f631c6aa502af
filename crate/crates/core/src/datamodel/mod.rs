//! Dataset schema, on-disk format and the synthetic generator.
//!
//! A dataset is a `manifest.json` plus one CSV per subject. Each CSV holds one
//! row per sample with columns `t, ch00_hbo..chNN_hbo, ch00_hbr..chNN_hbr`.
//! Total hemoglobin is never stored; it is derived as `hbo + hbr` when periods
//! are sliced.

mod io;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use io::{load_dataset, load_manifest, load_subject, write_dataset, DatasetReader};
pub use synthetic::{generate_synthetic, PlantedBins, SyntheticConfig, SyntheticGenerator};

pub const DEFAULT_CHANNELS: usize = 53;
pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 20;
pub const DEFAULT_PERIOD_DURATIONS: [u32; 3] = [30, 60, 60];

/// One of the three recording segments, in acquisition order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    Silent,
    Task,
    PostSilent,
}

impl Period {
    pub const ALL: [Period; 3] = [Period::Silent, Period::Task, Period::PostSilent];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Period::Silent => "silent",
            Period::Task => "task",
            Period::PostSilent => "post_silent",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Substance {
    #[serde(rename = "hbo")]
    HbO,
    #[serde(rename = "hbr")]
    HbR,
    #[serde(rename = "total")]
    Total,
}

impl Substance {
    pub const ALL: [Substance; 3] = [Substance::HbO, Substance::HbR, Substance::Total];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Substance::HbO => "hbo",
            Substance::HbR => "hbr",
            Substance::Total => "total",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: String,
    /// 0 = normal, 1 = depressed.
    pub label: u8,
    /// Path relative to the manifest directory.
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub sample_rate_hz: u32,
    pub channels: usize,
    /// Seconds of the silent, task and post-silent periods.
    pub period_durations: [u32; 3],
    pub subjects: Vec<SubjectEntry>,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        Self {
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            channels: DEFAULT_CHANNELS,
            period_durations: DEFAULT_PERIOD_DURATIONS,
            subjects: Vec::new(),
        }
    }
}

impl DatasetManifest {
    /// Checks the scalar fields and subject id uniqueness. File existence is
    /// checked by the loader.
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz == 0 {
            return Err(Error::Config("sample_rate_hz must be > 0".into()));
        }
        if self.channels == 0 {
            return Err(Error::Config("channels must be > 0".into()));
        }
        if self.period_durations.iter().any(|&d| d == 0) {
            return Err(Error::Config("period_durations must all be > 0".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &self.subjects {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Config(format!("duplicate subject id {}", s.id)));
            }
            if s.label > 1 {
                return Err(Error::data(
                    &s.id,
                    format!("label {} is not binary", s.label),
                ));
            }
        }
        Ok(())
    }

    pub fn period_len(&self, period: Period) -> usize {
        (self.sample_rate_hz * self.period_durations[period.index()]) as usize
    }

    /// Total samples per subject series.
    pub fn series_len(&self) -> usize {
        Period::ALL.iter().map(|&p| self.period_len(p)).sum()
    }

    /// Half-open sample range of a period inside the concatenated series.
    pub fn period_bounds(&self, period: Period) -> (usize, usize) {
        let start: usize = Period::ALL[..period.index()]
            .iter()
            .map(|&p| self.period_len(p))
            .sum();
        (start, start + self.period_len(period))
    }

    pub fn shortest_period_len(&self) -> usize {
        Period::ALL
            .iter()
            .map(|&p| self.period_len(p))
            .min()
            .unwrap_or(0)
    }
}

/// One subject's preprocessed concentration series.
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    pub label: u8,
    /// channels x T
    pub hbo: Matrix<f64>,
    /// channels x T
    pub hbr: Matrix<f64>,
}

impl SubjectRecord {
    pub fn validate(&self, manifest: &DatasetManifest) -> Result<()> {
        let want = (manifest.channels, manifest.series_len());
        for (name, m) in [("hbo", &self.hbo), ("hbr", &self.hbr)] {
            if m.shape() != want {
                return Err(Error::data(
                    &self.id,
                    format!(
                        "{name} has shape {:?}, manifest implies {:?}",
                        m.shape(),
                        want
                    ),
                ));
            }
            if let Some(pos) = m.as_slice().iter().position(|x| !x.is_finite()) {
                let (ch, t) = (pos / want.1, pos % want.1);
                return Err(Error::data(
                    &self.id,
                    format!("non-finite {name} value at channel {ch}, sample {t}"),
                ));
            }
        }
        if self.label > 1 {
            return Err(Error::data(
                &self.id,
                format!("label {} is not binary", self.label),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_periods_partition_series() {
        let m = DatasetManifest::default();
        assert_eq!(m.series_len(), 3000);
        assert_eq!(m.period_bounds(Period::Silent), (0, 600));
        assert_eq!(m.period_bounds(Period::Task), (600, 1800));
        assert_eq!(m.period_bounds(Period::PostSilent), (1800, 3000));
    }

    #[test]
    fn manifest_rejects_bad_fields() {
        let mut m = DatasetManifest::default();
        m.sample_rate_hz = 0;
        assert!(m.validate().is_err());
        let mut m = DatasetManifest::default();
        m.period_durations[1] = 0;
        assert!(m.validate().is_err());
        let mut m = DatasetManifest::default();
        for _ in 0..2 {
            m.subjects.push(SubjectEntry {
                id: "a".into(),
                label: 0,
                file: "a.csv".into(),
            });
        }
        assert!(m.validate().is_err());
    }

    #[test]
    fn record_validation_reports_non_finite_location() {
        let m = DatasetManifest {
            period_durations: [1, 1, 1],
            sample_rate_hz: 2,
            channels: 2,
            subjects: vec![],
        };
        let mut hbo = Matrix::zeros(2, 6);
        hbo[(1, 4)] = f64::NAN;
        let rec = SubjectRecord {
            id: "s1".into(),
            label: 0,
            hbo,
            hbr: Matrix::zeros(2, 6),
        };
        let msg = rec.validate(&m).unwrap_err().to_string();
        assert!(
            msg.contains("s1") && msg.contains("channel 1, sample 4"),
            "{msg}"
        );
    }
}
