//! Speech-production features (F0, jitter, shimmer, spectral envelope,
//! aperiodicity, power spectral entropy), a small MLP countermeasure, and
//! EER / t-DCF evaluation for spoofed and mimicked speech.

// NaN must fail validity checks, so `!(x > 0.0)` is used on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod classifier;
pub mod config;
mod dsp;
pub mod entropy;
pub mod error;
pub mod f0;
pub mod features;
pub mod metrics;
pub mod perturbation;
pub mod pipeline;
pub mod spectral;
pub mod store;
pub mod trials;

pub use audio::AudioBuffer;
pub use config::RunConfig;
pub use error::{Error, Result};
pub use features::{FeatureKind, FeatureMatrix};
