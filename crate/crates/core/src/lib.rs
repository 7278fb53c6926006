//! Epsilon-dodging hyperparameter optimization for software analytics.
//!
//! The crate bundles everything needed to run tuning studies end to end:
//!
//! * [`dataset`]: CSV loading, multi-class reduction, temporal splits.
//! * [`preprocess`] and [`learners`]: the tabular pipeline being tuned.
//! * [`metrics`]: recall/false-alarm based `d2h` and effort-aware `Popt(20)`.
//! * [`option_space`] and [`optimizers`]: the weighted option tree, DODGE,
//!   a tree-structured Parzen estimator, and random search.
//! * [`intrinsic_dim`]: the correlation-dimension estimator used to decide
//!   whether the simple optimizer is likely to be enough.
//! * [`stats`] and [`rigs`]: bootstrap/A12 comparisons and the study harness.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod intrinsic_dim;
pub mod learners;
pub mod matrix;
pub mod metrics;
pub mod optimizers;
pub mod option_space;
pub mod preprocess;
pub mod rigs;
pub mod seed;
pub mod stats;
pub mod synthetic;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use matrix::Matrix;
