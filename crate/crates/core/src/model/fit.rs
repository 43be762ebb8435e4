use super::{BatchPartition, Family, ObservationSequence};
use crate::error::{Error, Result};

/// Per-batch maximum-likelihood baseline, pooling every training stream.
///
/// For both supported families the estimate is the sample mean of all
/// observations whose global index falls in the batch.
pub fn mle_fit(
    family: Family,
    partition: &BatchPartition,
    training: &[ObservationSequence],
) -> Result<Vec<f64>> {
    let num_batches = partition.num_batches();
    let mut sums = vec![0.0f64; num_batches];
    let mut counts = vec![0u64; num_batches];
    for stream in training {
        stream.check_support(family)?;
        for (k, y) in stream.indexed() {
            let e = partition.batch_of(k);
            sums[e] += y;
            counts[e] += 1;
        }
    }
    sums.iter()
        .zip(&counts)
        .enumerate()
        .map(|(batch, (&sum, &count))| {
            if count == 0 {
                return Err(Error::Fit {
                    batch,
                    reason: "no training observations fall in this batch".into(),
                });
            }
            let mean = sum / count as f64;
            if !family.is_valid_param(mean) {
                return Err(Error::Fit {
                    batch,
                    reason: format!(
                        "estimate {mean} is not a valid {} parameter (all observations zero?)",
                        family.name()
                    ),
                });
            }
            Ok(mean)
        })
        .collect()
}
