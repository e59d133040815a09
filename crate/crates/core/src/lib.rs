//! Discriminant distributions and Bayesian threshold tests.

pub mod approximation;
pub mod distributions;
pub mod error;
pub mod fit;
pub mod model;
pub mod optimize;
pub mod quadrature;
pub mod records;
pub mod robustness;
pub mod sampler;
pub mod special;

pub use distributions::{DiscParams, GeneralDiscParams, RefDist};
pub use error::{Error, Result};
pub use model::{CellCounts, FriskModel, Layout, ModelParams, PriorConfig, StopModel};
pub use sampler::{Diagnostics, LogDensity, PosteriorDraws, SamplerConfig};
pub use fit::FitResult;
pub use records::{AggregatedData, RawStopRecord};
