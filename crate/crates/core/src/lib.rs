//! Sensitivity-sampled coresets for binary classification, with the
//! sampling knobs exposed for tuning: deterministic inclusion of the
//! highest-probability points, three weight-handling rules, and class-wise
//! budget allocation. Coresets can be refined by uncertainty-driven active
//! sampling and the knobs grid-searched against a validation metric.

pub mod dataset;
pub mod error;
mod fsutil;
pub mod learners;
pub mod metrics;
pub mod numfmt;
pub mod refine;
pub mod rounding;
pub mod sampler;
pub mod sensitivity;
pub mod synthetic;
pub mod tuner;

pub use error::{CoreError, Result};
pub use fsutil::write_atomic;
