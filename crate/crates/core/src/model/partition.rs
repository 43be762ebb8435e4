use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fold a 1-based global sample index into its 1-based phase `1..=period`.
///
/// A multiple of the period maps to the last phase, never to 0.
#[inline]
pub fn phase_of(k: u64, period: usize) -> usize {
    debug_assert!(k >= 1 && period >= 1);
    ((k - 1) % period as u64) as usize + 1
}

/// Contiguous partition of the phases `1..=period` into batches.
///
/// Batch `e` (0-based) covers phases `boundaries[e-1]+1 ..= boundaries[e]`,
/// with an implied leading boundary of 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPartition", into = "RawPartition")]
pub struct BatchPartition {
    period: usize,
    boundaries: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawPartition {
    period: usize,
    boundaries: Vec<usize>,
}

impl TryFrom<RawPartition> for BatchPartition {
    type Error = Error;

    fn try_from(raw: RawPartition) -> Result<Self> {
        BatchPartition::new(raw.period, raw.boundaries)
    }
}

impl From<BatchPartition> for RawPartition {
    fn from(p: BatchPartition) -> Self {
        RawPartition {
            period: p.period,
            boundaries: p.boundaries,
        }
    }
}

impl BatchPartition {
    pub fn new(period: usize, boundaries: Vec<usize>) -> Result<Self> {
        if period == 0 {
            return Err(Error::validation("period must be at least 1"));
        }
        if boundaries.is_empty() {
            return Err(Error::validation("at least one batch boundary is required"));
        }
        let mut prev = 0;
        for (i, &n) in boundaries.iter().enumerate() {
            if n <= prev {
                return Err(Error::validation(format!(
                    "batch boundaries must be strictly increasing and positive; boundary {} is {n} after {prev}",
                    i + 1
                )));
            }
            prev = n;
        }
        if prev != period {
            return Err(Error::validation(format!(
                "last batch boundary must equal the period {period}, got {prev}"
            )));
        }
        Ok(BatchPartition { period, boundaries })
    }

    /// A single batch spanning the whole cycle.
    pub fn whole(period: usize) -> Result<Self> {
        Self::new(period, vec![period])
    }

    /// Batches of the given sizes, in order.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let boundaries: Vec<usize> = sizes
            .iter()
            .scan(0, |acc, &s| {
                *acc += s;
                Some(*acc)
            })
            .collect();
        let period = boundaries.last().copied().unwrap_or(0);
        if sizes.contains(&0) {
            return Err(Error::validation("batch sizes must be at least 1"));
        }
        Self::new(period, boundaries)
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn num_batches(&self) -> usize {
        self.boundaries.len()
    }

    pub fn batch_size(&self, batch: usize) -> usize {
        let lo = if batch == 0 {
            0
        } else {
            self.boundaries[batch - 1]
        };
        self.boundaries[batch] - lo
    }

    pub fn batch_sizes(&self) -> Vec<usize> {
        (0..self.num_batches())
            .map(|e| self.batch_size(e))
            .collect()
    }

    /// 1-based phase range of a batch.
    pub fn phases(&self, batch: usize) -> std::ops::RangeInclusive<usize> {
        let lo = if batch == 0 {
            0
        } else {
            self.boundaries[batch - 1]
        };
        lo + 1..=self.boundaries[batch]
    }

    /// 0-based batch index of a 1-based phase.
    #[inline]
    pub fn batch_of_phase(&self, phase: usize) -> usize {
        self.boundaries.partition_point(|&n| n < phase)
    }

    /// 0-based batch index of the 1-based global sample index `k`.
    #[inline]
    pub fn batch_of(&self, k: u64) -> usize {
        self.batch_of_phase(phase_of(k, self.period))
    }
}
