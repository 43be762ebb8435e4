use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BatchPartition, ChangeSpec, IpidModel, ObservationSequence, ParamSampler};
use crate::error::Result;

/// Deterministic RNG for replication `rep` of a run seeded with `seed`.
///
/// Replications share the key and use disjoint ChaCha streams.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Unbounded generator of `Y_start, Y_start+1, …` under a change specification.
#[derive(Debug, Clone)]
pub struct StreamSampler<R> {
    partition: BatchPartition,
    pre: Vec<ParamSampler>,
    post: Vec<Option<ParamSampler>>,
    gamma: Option<u64>,
    next_k: u64,
    rng: R,
}

impl<R: Rng> StreamSampler<R> {
    pub fn new(model: &IpidModel, change: &ChangeSpec, rng: R) -> Result<Self> {
        change.validate(model)?;
        let family = model.family();
        let pre = model
            .baseline()
            .iter()
            .map(|&theta| family.sampler(theta))
            .collect::<Result<Vec<_>>>()?;
        let post = (0..model.num_batches())
            .map(|e| change.post_change(e).map(|l| family.sampler(l)).transpose())
            .collect::<Result<Vec<_>>>()?;
        Ok(StreamSampler {
            partition: model.partition().clone(),
            pre,
            post,
            gamma: change.gamma(),
            next_k: 1,
            rng,
        })
    }

    /// Continue the stream from global index `k` (the change point stays put).
    pub fn starting_at(mut self, k: u64) -> Self {
        assert!(k >= 1, "sample indices are 1-based");
        self.next_k = k;
        self
    }

    pub fn next_index(&self) -> u64 {
        self.next_k
    }

    #[inline]
    pub fn draw(&mut self) -> f64 {
        let k = self.next_k;
        self.next_k += 1;
        let batch = self.partition.batch_of(k);
        let sampler = match (self.gamma, &self.post[batch]) {
            (Some(gamma), Some(post)) if k >= gamma => post,
            _ => &self.pre[batch],
        };
        sampler.draw(&mut self.rng)
    }
}

impl<R: Rng> Iterator for StreamSampler<R> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.draw())
    }
}

/// Draw `Y_1..Y_n` independently from the model under `change`.
pub fn sample(
    model: &IpidModel,
    change: &ChangeSpec,
    n: usize,
    seed: u64,
) -> Result<ObservationSequence> {
    let stream = StreamSampler::new(model, change, replication_rng(seed, 0))?;
    Ok(ObservationSequence::new(stream.take(n).collect()))
}
