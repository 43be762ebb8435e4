//! Online change detectors built from banks of CUSUM recursions.
//!
//! Each cell tracks `max_{k ≤ n} Σ_{i=k}^{n} ℓ_i` for one fixed post-change
//! alternative via `w ← max(w, 0) + ℓ`, where off-batch samples contribute
//! `ℓ = 0`. Because the post-change grids are finite, the maximum over
//! change times commutes with the maximum over alternatives and the bank
//! reproduces the GLR statistics exactly.

mod all;
mod bounds;
mod grid;
mod single;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IpidModel, ObservationSequence};

pub use all::{AllBatchDetector, AllBatchOptions, DEFAULT_PRODUCT_CAP};
pub use bounds::statistic_bounds_check;
pub use grid::PostChangeGrid;
pub use single::SingleBatchDetector;

/// One step of the CUSUM recursion.
#[inline]
pub fn cusum_update(w: f64, ell: f64) -> f64 {
    w.max(0.0) + ell
}

/// Outcome of running a detector over a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub fired: bool,
    /// Global index of the alarm, `None` when the stream ran out first.
    pub stopping_time: Option<u64>,
    /// Statistic at the alarm, or after the last consumed sample.
    pub statistic: f64,
    /// Maximising batch (single-batch detector only).
    pub arg_batch: Option<usize>,
    /// Maximising alternative: one value for the single-batch detector, one
    /// per batch for the all-batch detector.
    pub arg_lambda: Vec<f64>,
    pub samples_consumed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<(u64, f64)>>,
}

/// First threshold crossing.
#[derive(Debug, Clone, PartialEq)]
pub struct Alarm {
    pub time: u64,
    pub statistic: f64,
    pub batch: Option<usize>,
    pub lambda: Vec<f64>,
}

/// A sequential stopping rule over one stream.
pub trait Detector {
    fn model(&self) -> &IpidModel;

    fn threshold(&self) -> f64;

    fn set_threshold(&mut self, threshold: f64);

    /// Global index the next observation is assigned.
    fn clock(&self) -> u64;

    /// Current statistic `W_n` (0 before any observation).
    fn statistic(&self) -> f64;

    /// Alarm of the current run, if the detector has fired.
    fn alarm(&self) -> Option<&Alarm>;

    /// Zero every cell and restart the clock at `start_index`.
    fn reset(&mut self, start_index: u64);

    /// Consume one observation. Returns the alarm when the statistic first
    /// exceeds the threshold. Once fired the detector refuses further input
    /// until [`Detector::reset`].
    fn step(&mut self, y: f64) -> Result<Option<Alarm>>;

    /// Feed `values` from the current clock until an alarm or the end.
    fn run(&mut self, values: &[f64], record_trajectory: bool) -> Result<DetectionResult> {
        let mut trajectory = record_trajectory.then(|| Vec::with_capacity(values.len()));
        let mut consumed = 0;
        for &y in values {
            let k = self.clock();
            let alarm = self.step(y)?;
            consumed += 1;
            if let Some(t) = trajectory.as_mut() {
                t.push((k, self.statistic()));
            }
            if let Some(alarm) = alarm {
                return Ok(DetectionResult {
                    fired: true,
                    stopping_time: Some(alarm.time),
                    statistic: alarm.statistic,
                    arg_batch: alarm.batch,
                    arg_lambda: alarm.lambda,
                    samples_consumed: consumed,
                    trajectory,
                });
            }
        }
        Ok(DetectionResult {
            fired: false,
            stopping_time: None,
            statistic: self.statistic(),
            arg_batch: None,
            arg_lambda: Vec::new(),
            samples_consumed: consumed,
            trajectory,
        })
    }

    /// Reset to the sequence's start index and run over it.
    fn detect(
        &mut self,
        seq: &ObservationSequence,
        record_trajectory: bool,
    ) -> Result<DetectionResult> {
        self.reset(seq.start_index);
        self.run(&seq.values, record_trajectory)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Single,
    All,
}

/// Either detector, chosen at run time.
#[derive(Debug, Clone)]
pub enum AnyDetector {
    Single(SingleBatchDetector),
    All(AllBatchDetector),
}

impl AnyDetector {
    pub fn build(
        kind: DetectorKind,
        model: &IpidModel,
        grid: &PostChangeGrid,
        threshold: f64,
        options: AllBatchOptions,
    ) -> Result<Self> {
        Ok(match kind {
            DetectorKind::Single => AnyDetector::Single(SingleBatchDetector::new(
                model.clone(),
                grid.clone(),
                threshold,
            )?),
            DetectorKind::All => AnyDetector::All(AllBatchDetector::with_options(
                model.clone(),
                grid.clone(),
                threshold,
                options,
            )?),
        })
    }

    pub fn kind(&self) -> DetectorKind {
        match self {
            AnyDetector::Single(_) => DetectorKind::Single,
            AnyDetector::All(_) => DetectorKind::All,
        }
    }
}

macro_rules! delegate {
    ($self:ident, $d:ident => $e:expr) => {
        match $self {
            AnyDetector::Single($d) => $e,
            AnyDetector::All($d) => $e,
        }
    };
}

impl Detector for AnyDetector {
    fn model(&self) -> &IpidModel {
        delegate!(self, d => d.model())
    }
    fn threshold(&self) -> f64 {
        delegate!(self, d => d.threshold())
    }
    fn set_threshold(&mut self, threshold: f64) {
        delegate!(self, d => d.set_threshold(threshold))
    }
    fn clock(&self) -> u64 {
        delegate!(self, d => d.clock())
    }
    fn statistic(&self) -> f64 {
        delegate!(self, d => d.statistic())
    }
    fn alarm(&self) -> Option<&Alarm> {
        delegate!(self, d => d.alarm())
    }
    fn reset(&mut self, start_index: u64) {
        delegate!(self, d => d.reset(start_index))
    }
    fn step(&mut self, y: f64) -> Result<Option<Alarm>> {
        delegate!(self, d => d.step(y))
    }
}

pub(crate) fn check_not_fired(alarm: &Option<Alarm>) -> Result<()> {
    match alarm {
        Some(a) => Err(Error::AlreadyFired {
            stopping_time: a.time,
        }),
        None => Ok(()),
    }
}
