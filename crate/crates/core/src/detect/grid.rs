use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::IpidModel;

/// Finite post-change alternatives `Λ^(e)` per batch, each at least
/// `epsilon` away from that batch's baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostChangeGrid {
    per_batch: Vec<Vec<f64>>,
    epsilon: f64,
}

impl PostChangeGrid {
    pub fn new(model: &IpidModel, per_batch: Vec<Vec<f64>>, epsilon: f64) -> Result<Self> {
        let grid = PostChangeGrid { per_batch, epsilon };
        grid.validate(model)?;
        Ok(grid)
    }

    /// `Λ^(e) = { m·θ^(e) : m ∈ multipliers }`, e.g. `[2.0]` or `[0.5, 2.0]`.
    pub fn multiplicative(model: &IpidModel, multipliers: &[f64], epsilon: f64) -> Result<Self> {
        let per_batch = model
            .baseline()
            .iter()
            .map(|&theta| multipliers.iter().map(|m| m * theta).collect())
            .collect();
        Self::new(model, per_batch, epsilon)
    }

    /// `Λ^(e) = { θ^(e) + d : d ∈ shifts }`.
    pub fn shifted(model: &IpidModel, shifts: &[f64], epsilon: f64) -> Result<Self> {
        let per_batch = model
            .baseline()
            .iter()
            .map(|&theta| shifts.iter().map(|d| theta + d).collect())
            .collect();
        Self::new(model, per_batch, epsilon)
    }

    pub fn validate(&self, model: &IpidModel) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::validation(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.per_batch.len() != model.num_batches() {
            return Err(Error::validation(format!(
                "grid has {} batches but the model has {}",
                self.per_batch.len(),
                model.num_batches()
            )));
        }
        let family = model.family();
        for (e, lambdas) in self.per_batch.iter().enumerate() {
            if lambdas.is_empty() {
                return Err(Error::validation(format!(
                    "post-change set of batch {e} is empty"
                )));
            }
            let theta = model.theta(e);
            for &lambda in lambdas {
                family.check_param(lambda)?;
                if (lambda - theta).abs() < self.epsilon {
                    return Err(Error::validation(format!(
                        "alternative {lambda} of batch {e} is closer than epsilon {} to baseline {theta}",
                        self.epsilon
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn per_batch(&self) -> &[Vec<f64>] {
        &self.per_batch
    }

    pub fn alternatives(&self, batch: usize) -> &[f64] {
        &self.per_batch[batch]
    }

    /// Number of λ-vectors in the product `∏_e Λ^(e)`, saturating.
    pub fn product_size(&self) -> usize {
        self.per_batch
            .iter()
            .fold(1usize, |acc, l| acc.saturating_mul(l.len()))
    }
}
