//! Multi-modal freezing-of-gait characterization and detection.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`signalio`]: recordings, annotations, file formats, resampling
//! - [`dsp`]: filtering and time-frequency kernels
//! - [`features`]: the five modality-specific feature extractors
//! - [`characterize`]: segment statistics around freezing onsets
//! - [`select`]: symmetrical uncertainty and fast correlation-based filtering
//! - [`model`]: RUSBoost epoch classifier
//! - [`evaluate`]: epoching, event-level scoring, PR curves, cross-validation,
//!   streaming detection
//! - [`synth`]: synthetic multi-modal dataset generator
//! - [`pipeline`]: glue that turns a dataset directory into epochs

pub mod characterize;
pub mod dsp;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod model;
pub mod pipeline;
pub mod select;
pub mod signalio;
pub mod synth;

pub use error::{Error, Result};

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
