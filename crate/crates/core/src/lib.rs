//! Dialect identification from intonation patterns.
//!
//! The pipeline: pitch extraction -> contour approximation -> closed
//! sequential pattern mining -> audio segment cutting -> log-mel features ->
//! recurrent classifiers (CRNN / Res-BLSTM) -> metrics.

pub mod contour;
pub mod error;
pub mod features;
pub mod metrics;
pub mod mining;
pub mod nn;
pub mod pipeline;
pub mod pitch;
pub mod scalar;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Training/inference tensor precision.
pub type Tensor32 = nn::Tensor<f32>;
/// Gradient-check precision.
pub type Tensor64 = nn::Tensor<f64>;
