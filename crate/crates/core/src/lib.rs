//! Frequency-feature fusion graph network for fNIRS binary classification.
//!
//! The pipeline slices each recording into its three periods, extracts
//! summary statistics and top-k DFT biomarkers per channel, builds
//! training-set connectivity priors, and trains a phased GCN + GRU classifier
//! whose frequency attention is seeded by point-biserial screening.

pub mod biostats;
pub mod cli;
pub mod datamodel;
pub mod diffcore;
pub mod error;
pub mod features;
pub mod fsutil;
pub mod harness;
pub mod matrix;
pub mod model;
pub mod scalar;
pub mod signal;
pub mod spatial;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::{Flagged, Real};

/// Double-precision instantiations of the generic numeric types.
pub type Matrix64 = Matrix<f64>;
pub type Tensor64 = diffcore::Tensor<f64>;
pub type ParamStore64 = diffcore::ParamStore<f64>;
pub type Graph64 = diffcore::Graph<f64>;
pub type Biomarker64 = signal::Biomarker<f64>;
