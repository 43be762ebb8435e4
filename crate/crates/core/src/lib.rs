//! Quickest detection of changes in independent, periodically identically
//! distributed (i.p.i.d.) count streams.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: the periodic observation model, likelihoods, samplers and fitting.
//! - [`detect`]: CUSUM/GLR detector banks for single-batch and all-batch changes.
//! - [`eval`]: threshold calibration, Monte Carlo run lengths and efficiency reports.
//! - [`io`]: run configuration, CSV ingestion, multi-day scenarios and report output.

pub mod detect;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;

pub use detect::{
    AllBatchDetector, AnyDetector, DetectionResult, Detector, DetectorKind, PostChangeGrid,
    SingleBatchDetector,
};
pub use error::{Error, Result};
pub use model::{
    mle_fit, phase_of, sample, BatchPartition, ChangeSpec, Family, IpidModel, ObservationSequence,
};
