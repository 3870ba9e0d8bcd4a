//! Multi-resolution spectral graph network for multivariate medical time
//! series classification.
//!
//! A `[T×C]` recording is embedded at several temporal resolutions, each
//! resolution is treated as a graph over the `C` channels, and the resolution
//! outputs are pooled into one class distribution. Everything is generic over
//! the scalar type; the `*64` aliases fix it to `f64`.

pub mod data;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod params;
pub mod scalar;
pub mod spectral;
pub mod temporal;
pub mod tensor;
pub mod train;
pub mod transformer;

pub use data::{Dataset, SeriesSample};
pub use error::{Error, Result};
pub use metrics::EvalReport;
pub use model::{Ablation, MedGnnParams, ModelConfig};
pub use scalar::Scalar;
pub use spectral::ComplexSpectrum;
pub use tensor::Tensor;
pub use train::{Checkpoint, RunConfig};
pub use transformer::ClassProbabilities;

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type Dataset64 = Dataset<f64>;
pub type MedGnn64 = MedGnnParams<f64>;
pub type Checkpoint64 = Checkpoint<f64>;
