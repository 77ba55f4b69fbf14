//! Class prototype generation and activation path analysis for image
//! classifiers.
//!
//! The toolkit wraps a differentiable classifier, synthesizes class prototypes
//! by constrained input-space optimization, measures per-layer activation path
//! similarity (Spearman and L1) against natural-image activation profiles, and
//! probes model biases on curated image sets.

pub mod adapter;
pub mod error;
pub mod imageio;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod optimizer;
pub mod plot;
pub mod probe;
pub mod profiles;
pub mod sweep;
pub mod parallel;

pub use error::{Error, Result};
