//! The phased classifier: a temporal fusion module per (period, substance),
//! correlation and coherence GCN stacks over the fused channel embeddings,
//! a GRU across the three periods and a two-class head.

mod input;
mod network;

use serde::{Deserialize, Serialize};

pub use input::{Batch, ModelInput, PositionalTable};
pub use network::{GcnLayer, GcnStack, Model, Tfm};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_k: usize,
    pub gcn_layers: usize,
    pub k: usize,
    pub gru_hidden: usize,
    pub gru_layers: usize,
    pub fam_enabled: bool,
    pub channels: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_k: 16,
            gcn_layers: 2,
            k: 8,
            gru_hidden: 32,
            gru_layers: 3,
            fam_enabled: true,
            channels: 53,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_k", self.d_k),
            ("gcn_layers", self.gcn_layers),
            ("k", self.k),
            ("gru_hidden", self.gru_hidden),
            ("gru_layers", self.gru_layers),
            ("channels", self.channels),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("model: {name} must be positive")));
            }
        }
        Ok(())
    }

    /// Number of trainable scalars, without building the model.
    pub fn parameter_count(&self) -> usize {
        let (d, k, h) = (self.d_k, self.k, self.gru_hidden);
        let mlp = |i: usize, o: usize| i * o + o;
        let fam = if self.fam_enabled {
            self.channels * k + mlp(d, d)
        } else {
            0
        };
        let tfm = mlp(6, d) + mlp(3, d) + fam + mlp((1 + k) * d, d);
        let gcn = self.gcn_layers * (d * d + mlp(d, d));
        let gru_layer = |i: usize| i * 3 * h + h * 2 * h + h * h + 3 * h;
        let gru = gru_layer(6 * d) + (self.gru_layers - 1) * gru_layer(h);
        9 * tfm + 18 * gcn + gru + mlp(h, 2)
    }
}

/// Frequency positional encoding, `k x d_k`:
/// `PE[i][2j] = sin(w_i / 10000^(2j / d_k))` and
/// `PE[i][2j+1] = cos(w_i / 10000^((2j+1) / d_k))`, with `w_i` the bin index.
pub fn positional_encoding(freq_indices: &[usize], d_k: usize) -> Matrix<f64> {
    let mut out = Matrix::zeros(freq_indices.len(), d_k);
    for (i, &w) in freq_indices.iter().enumerate() {
        let w = w as f64;
        for dim in 0..d_k {
            let angle = w / 10000f64.powf(dim as f64 / d_k as f64);
            out[(i, dim)] = if dim % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positional_encoding_examples() {
        let pe = positional_encoding(&[0], 6);
        assert_eq!(pe.row(0), &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        let pe = positional_encoding(&[1], 4);
        assert!((pe[(0, 0)] - 0.841_47).abs() < 1e-5);
        assert_eq!(pe[(0, 0)], 1f64.sin());
        assert_eq!(pe[(0, 1)], (1.0 / 10000f64.powf(0.25)).cos());
        assert_eq!(pe[(0, 3)], (1.0 / 10000f64.powf(0.75)).cos());
        let pe = positional_encoding(&(0..301).collect::<Vec<_>>(), 16);
        assert!(pe.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn default_parameter_count_is_frozen() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.parameter_count(), 72_666);
        assert_eq!(
            ModelConfig {
                fam_enabled: false,
                ..cfg
            }
            .parameter_count(),
            72_666 - 9 * (53 * 8 + 272)
        );
    }

    #[test]
    fn zero_sizes_are_rejected() {
        assert!(ModelConfig::default().validate().is_ok());
        assert!(ModelConfig {
            d_k: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
