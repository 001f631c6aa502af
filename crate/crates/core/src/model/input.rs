use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::features::{OtfNormalizer, SubjectFeatures, N_BLOCKS};
use crate::signal::N_OTF;

use super::positional_encoding;

/// Model-ready features of one subject under one fold's normalizer.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelInput {
    pub label: u8,
    pub channels: usize,
    pub k: usize,
    blocks: Vec<BlockInput>,
}

#[derive(Clone, Debug, PartialEq)]
struct BlockInput {
    /// channels x 6
    otf: Vec<f64>,
    /// (channels * k) x 3: scaled amplitude, sin and cos of the phase.
    dtf: Vec<f64>,
    /// channels * k bin indices.
    freq: Vec<usize>,
}

impl ModelInput {
    pub fn new(features: &SubjectFeatures, normalizer: &OtfNormalizer, k: usize) -> Result<Self> {
        if features.k < k {
            return Err(Error::Config(format!(
                "features of {} hold k = {}, model needs {k}",
                features.id, features.k
            )));
        }
        let channels = features.channels();
        let blocks = features
            .blocks
            .iter()
            .enumerate()
            .map(|(b, block)| {
                let otf = normalizer.apply(b, &block.otf_raw).into_vec();
                let scale = 2.0 / block.period_len as f64;
                let mut dtf = Vec::with_capacity(channels * k * 3);
                let mut freq = Vec::with_capacity(channels * k);
                for m in &block.biomarkers {
                    for j in 0..k {
                        let phase = m.phases[j];
                        dtf.extend_from_slice(&[scale * m.amplitudes[j], phase.sin(), phase.cos()]);
                        freq.push(m.freq_indices[j]);
                    }
                }
                BlockInput { otf, dtf, freq }
            })
            .collect();
        Ok(Self {
            label: features.label,
            channels,
            k,
            blocks,
        })
    }

    /// An input from explicit per-block arrays, in block order:
    /// `otf` is channels x 6, `dtf` (channels * k) x 3, `freq` channels * k.
    pub fn from_parts(
        label: u8,
        channels: usize,
        k: usize,
        parts: Vec<(Vec<f64>, Vec<f64>, Vec<usize>)>,
    ) -> Result<Self> {
        if parts.len() != N_BLOCKS {
            return Err(Error::Shape(format!(
                "{} blocks, expected {N_BLOCKS}",
                parts.len()
            )));
        }
        let blocks = parts
            .into_iter()
            .map(|(otf, dtf, freq)| {
                if otf.len() != channels * N_OTF
                    || dtf.len() != channels * k * 3
                    || freq.len() != channels * k
                {
                    return Err(Error::Shape(
                        "block arrays do not match channels and k".into(),
                    ));
                }
                Ok(BlockInput { otf, dtf, freq })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            label,
            channels,
            k,
            blocks,
        })
    }

    /// Reorders channels: new channel `i` is old channel `perm[i]`.
    pub fn permute_channels(&self, perm: &[usize]) -> Self {
        let k = self.k;
        let blocks = self
            .blocks
            .iter()
            .map(|b| BlockInput {
                otf: perm
                    .iter()
                    .flat_map(|&c| b.otf[c * N_OTF..(c + 1) * N_OTF].iter().copied())
                    .collect(),
                dtf: perm
                    .iter()
                    .flat_map(|&c| b.dtf[c * k * 3..(c + 1) * k * 3].iter().copied())
                    .collect(),
                freq: perm
                    .iter()
                    .flat_map(|&c| b.freq[c * k..(c + 1) * k].iter().copied())
                    .collect(),
            })
            .collect();
        Self {
            blocks,
            ..self.clone()
        }
    }

    /// Flattened normalized summary statistics over all blocks.
    pub fn otf_flat(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| b.otf.iter().copied())
            .collect()
    }
}

/// Positional encodings of bins `0..bins`, looked up by bin index.
#[derive(Clone, Debug)]
pub struct PositionalTable {
    d_k: usize,
    rows: Vec<f64>,
    bins: usize,
}

impl PositionalTable {
    pub fn new(bins: usize, d_k: usize) -> Self {
        let idx: Vec<usize> = (0..bins).collect();
        Self {
            d_k,
            rows: positional_encoding(&idx, d_k).into_vec(),
            bins,
        }
    }

    fn row(&self, bin: usize) -> &[f64] {
        assert!(
            bin < self.bins,
            "bin {bin} beyond positional table of {}",
            self.bins
        );
        &self.rows[bin * self.d_k..(bin + 1) * self.d_k]
    }
}

/// Stacked inputs of several subjects, rows grouped subject by subject.
#[derive(Clone, Debug)]
pub struct Batch {
    pub size: usize,
    pub channels: usize,
    pub k: usize,
    pub labels: Vec<usize>,
    pub(super) otf: Vec<Tensor<f64>>,
    pub(super) dtf: Vec<Tensor<f64>>,
    pub(super) pe: Vec<Tensor<f64>>,
}

impl Batch {
    pub fn new(inputs: &[&ModelInput], table: &PositionalTable) -> Result<Self> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::Shape("empty batch".into()))?;
        let (channels, k) = (first.channels, first.k);
        if inputs.iter().any(|x| x.channels != channels || x.k != k) {
            return Err(Error::Shape("batch mixes channel counts or k".into()));
        }
        let b = inputs.len();
        let d = table.d_k;
        let mut otf = Vec::with_capacity(N_BLOCKS);
        let mut dtf = Vec::with_capacity(N_BLOCKS);
        let mut pe = Vec::with_capacity(N_BLOCKS);
        for blk in 0..N_BLOCKS {
            let o: Vec<f64> = inputs
                .iter()
                .flat_map(|x| x.blocks[blk].otf.iter().copied())
                .collect();
            let t: Vec<f64> = inputs
                .iter()
                .flat_map(|x| x.blocks[blk].dtf.iter().copied())
                .collect();
            let mut p = Vec::with_capacity(b * channels * k * d);
            for x in inputs {
                for &f in &x.blocks[blk].freq {
                    p.extend_from_slice(table.row(f));
                }
            }
            otf.push(Tensor::matrix(b * channels, N_OTF, o));
            dtf.push(Tensor::matrix(b * channels * k, 3, t));
            pe.push(Tensor::matrix(b * channels * k, d, p));
        }
        Ok(Self {
            size: b,
            channels,
            k,
            labels: inputs.iter().map(|x| usize::from(x.label)).collect(),
            otf,
            dtf,
            pe,
        })
    }
}
