//! The periodic (i.p.i.d.) observation model: families, batch partitions,
//! change-point specifications, sampling and baseline fitting.

mod family;
mod fit;
mod partition;
mod sample;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use family::{Family, LlrCoeffs, ParamSampler};
pub use fit::mle_fit;
pub use partition::{phase_of, BatchPartition};
pub use sample::{replication_rng, sample, StreamSampler};

/// Independent, periodically identically distributed model with a
/// step-wise constant parameter per batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct IpidModel {
    family: Family,
    partition: BatchPartition,
    baseline: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    family: Family,
    partition: BatchPartition,
    baseline: Vec<f64>,
}

impl TryFrom<RawModel> for IpidModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        IpidModel::new(raw.family, raw.partition, raw.baseline)
    }
}

impl From<IpidModel> for RawModel {
    fn from(m: IpidModel) -> Self {
        RawModel {
            family: m.family,
            partition: m.partition,
            baseline: m.baseline,
        }
    }
}

impl IpidModel {
    pub fn new(family: Family, partition: BatchPartition, baseline: Vec<f64>) -> Result<Self> {
        family.validate()?;
        if baseline.len() != partition.num_batches() {
            return Err(Error::validation(format!(
                "baseline has {} parameters but the partition has {} batches",
                baseline.len(),
                partition.num_batches()
            )));
        }
        for (e, &theta) in baseline.iter().enumerate() {
            if !family.is_valid_param(theta) {
                return Err(Error::domain(format!(
                    "baseline parameter {theta} of batch {e} is not valid for the {} family",
                    family.name()
                )));
            }
        }
        Ok(IpidModel {
            family,
            partition,
            baseline,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn partition(&self) -> &BatchPartition {
        &self.partition
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn period(&self) -> usize {
        self.partition.period()
    }

    pub fn num_batches(&self) -> usize {
        self.partition.num_batches()
    }

    pub fn theta(&self, batch: usize) -> f64 {
        self.baseline[batch]
    }

    /// Baseline parameter in force at global sample index `k`.
    pub fn theta_at(&self, k: u64) -> f64 {
        self.baseline[self.partition.batch_of(k)]
    }
}

/// Where and how the observation law departs from the baseline.
///
/// `gamma` is the 1-based index of the first changed sample. Post-change
/// parameters are constant within a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ChangeSpec {
    NoChange,
    SingleBatch {
        gamma: u64,
        batch: usize,
        lambda: f64,
    },
    AllBatch {
        gamma: u64,
        lambdas: Vec<f64>,
    },
}

impl ChangeSpec {
    /// `None` stands for γ = ∞.
    pub fn gamma(&self) -> Option<u64> {
        match *self {
            ChangeSpec::NoChange => None,
            ChangeSpec::SingleBatch { gamma, .. } | ChangeSpec::AllBatch { gamma, .. } => {
                Some(gamma)
            }
        }
    }

    /// Same change pattern moved to a different change point.
    pub fn with_gamma(&self, new_gamma: u64) -> ChangeSpec {
        let mut out = self.clone();
        match &mut out {
            ChangeSpec::NoChange => {}
            ChangeSpec::SingleBatch { gamma, .. } | ChangeSpec::AllBatch { gamma, .. } => {
                *gamma = new_gamma
            }
        }
        out
    }

    /// Post-change parameter of `batch`, or `None` when the batch is unaffected.
    pub fn post_change(&self, batch: usize) -> Option<f64> {
        match self {
            ChangeSpec::NoChange => None,
            ChangeSpec::SingleBatch {
                batch: b, lambda, ..
            } => (*b == batch).then_some(*lambda),
            ChangeSpec::AllBatch { lambdas, .. } => lambdas.get(batch).copied(),
        }
    }

    pub fn validate(&self, model: &IpidModel) -> Result<()> {
        let family = model.family();
        match self {
            ChangeSpec::NoChange => Ok(()),
            ChangeSpec::SingleBatch {
                gamma,
                batch,
                lambda,
            } => {
                check_gamma(*gamma)?;
                if *batch >= model.num_batches() {
                    return Err(Error::validation(format!(
                        "changed batch {batch} out of range for {} batches",
                        model.num_batches()
                    )));
                }
                check_post_change(model, family, *batch, *lambda)
            }
            ChangeSpec::AllBatch { gamma, lambdas } => {
                check_gamma(*gamma)?;
                if lambdas.len() != model.num_batches() {
                    return Err(Error::validation(format!(
                        "all-batch change needs {} post-change parameters, got {}",
                        model.num_batches(),
                        lambdas.len()
                    )));
                }
                lambdas
                    .iter()
                    .enumerate()
                    .try_for_each(|(e, &l)| check_post_change(model, family, e, l))
            }
        }
    }

    /// Parameter in force at global index `k` under this change.
    pub fn param_at(&self, model: &IpidModel, k: u64) -> f64 {
        let batch = model.partition().batch_of(k);
        match self.gamma() {
            Some(gamma) if k >= gamma => self
                .post_change(batch)
                .unwrap_or_else(|| model.theta(batch)),
            _ => model.theta(batch),
        }
    }
}

fn check_gamma(gamma: u64) -> Result<()> {
    if gamma == 0 {
        Err(Error::validation(
            "change point must be a 1-based sample index",
        ))
    } else {
        Ok(())
    }
}

fn check_post_change(model: &IpidModel, family: Family, batch: usize, lambda: f64) -> Result<()> {
    family.check_param(lambda)?;
    if lambda == model.theta(batch) {
        return Err(Error::validation(format!(
            "post-change parameter of batch {batch} equals its baseline {lambda}"
        )));
    }
    Ok(())
}

/// Observations `Y_k` for consecutive global indices starting at `start_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSequence {
    pub values: Vec<f64>,
    pub start_index: u64,
}

impl ObservationSequence {
    pub fn new(values: Vec<f64>) -> Self {
        Self::with_start(values, 1)
    }

    pub fn with_start(values: Vec<f64>, start_index: u64) -> Self {
        assert!(start_index >= 1, "sample indices are 1-based");
        ObservationSequence {
            values,
            start_index,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(k, Y_k)` pairs in global time.
    pub fn indexed(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        (self.start_index..).zip(self.values.iter().copied())
    }

    pub fn check_support(&self, family: Family) -> Result<()> {
        for (k, y) in self.indexed() {
            if !family.in_support(y) {
                return Err(Error::domain(format!(
                    "observation {y} at sample {k} is outside the support of the {} family",
                    family.name()
                )));
            }
        }
        Ok(())
    }
}
