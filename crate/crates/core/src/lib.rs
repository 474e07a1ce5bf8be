//! Changepoint detection with post-selection inference.
//!
//! Four detectors (binary segmentation, wild binary segmentation, circular
//! binary segmentation and the fused lasso path) each select a model whose
//! selection event is a polyhedron in data space. Conditioning on that
//! event gives exact truncated-Gaussian p-values (saturated model), MCMC
//! p-values under the piecewise-constant null (selected model), and
//! importance-sampled p-values that marginalize over added randomness.
//!
//! Locations are 1-based: a changepoint at `b` separates `y[b]` and
//! `y[b + 1]`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod contrast;
pub mod error;
pub mod linalg;
pub mod marginal;
pub mod math;
pub mod model;
pub mod pipeline;
pub mod polyhedra;
pub mod rng;
pub mod saturated;
pub mod segmentation;
pub mod selected;
pub mod sim;

pub use contrast::{bonferroni, declutter, segment_contrast, spike_contrast};
pub use error::{Error, Result};
pub use model::{Algorithm, Changepoint, ChangepointModel, Contrast, ContrastKind, Series, Sign, TestMethod, TestResult};
pub use polyhedra::Polyhedron;
pub use segmentation::IntervalSet;
