use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::Detector;
use crate::error::{Error, Result};
use crate::model::{replication_rng, ChangeSpec, StreamSampler};

/// Monte Carlo estimate of a mean run length.
///
/// Censored runs (no alarm by the horizon) enter the mean at the horizon
/// value, which biases MTFA estimates downward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLengthEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replications: usize,
    pub censored: usize,
    pub horizon: u64,
    /// Runs dropped because the alarm preceded the change point.
    #[serde(default)]
    pub discarded: usize,
}

impl RunLengthEstimate {
    fn from_lengths(lengths: &[f64], censored: usize, horizon: u64, discarded: usize) -> Self {
        let n = lengths.len();
        let mean = if n == 0 {
            f64::NAN
        } else {
            lengths.iter().sum::<f64>() / n as f64
        };
        let stderr = if n < 2 {
            0.0
        } else {
            let var = lengths.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        RunLengthEstimate {
            mean,
            stderr,
            replications: n,
            censored,
            horizon,
            discarded,
        }
    }

    pub fn censored_fraction(&self) -> f64 {
        if self.replications == 0 {
            0.0
        } else {
            self.censored as f64 / self.replications as f64
        }
    }
}

/// First crossing of each threshold by one replication, `None` if censored.
fn crossings<D: Detector>(
    detector: &mut D,
    sampler: &mut StreamSampler<rand_chacha::ChaCha8Rng>,
    thresholds: &[f64],
    horizon: u64,
) -> Result<Vec<Option<u64>>> {
    detector.set_threshold(f64::INFINITY);
    detector.reset(1);
    let mut order: Vec<usize> = (0..thresholds.len()).collect();
    order.sort_by(|&a, &b| thresholds[a].total_cmp(&thresholds[b]));
    let mut out = vec![None; thresholds.len()];
    let mut next = 0;
    for k in 1..=horizon {
        if next == order.len() {
            break;
        }
        detector.step(sampler.draw())?;
        let w = detector.statistic();
        while next < order.len() && w > thresholds[order[next]] {
            out[order[next]] = Some(k);
            next += 1;
        }
    }
    Ok(out)
}

/// Run lengths for several thresholds from the same replications.
///
/// Every threshold sees identical sample paths (common random numbers), so
/// the per-path stopping time is nondecreasing in the threshold. For a
/// change with `γ > 1` the delay `τ − γ + 1` is recorded and runs alarming
/// before `γ` are discarded. Replication `r` draws from the stream
/// `replication_rng(seed, r)`; aggregation is in replication order, so
/// results are bit-identical across thread counts.
pub fn simulate_run_lengths<D>(
    template: &D,
    change: &ChangeSpec,
    thresholds: &[f64],
    horizons: &[u64],
    reps: usize,
    seed: u64,
) -> Result<Vec<RunLengthEstimate>>
where
    D: Detector + Clone + Send + Sync,
{
    if thresholds.len() != horizons.len() {
        return Err(Error::validation("one horizon per threshold is required"));
    }
    if reps == 0 || horizons.contains(&0) {
        return Err(Error::validation(
            "replications and horizons must be positive",
        ));
    }
    let model = template.model();
    change.validate(model)?;
    let gamma = change.gamma().unwrap_or(1);
    let offset = gamma - 1;
    let max_horizon = horizons.iter().copied().max().unwrap_or(0) + offset;

    let per_rep: Vec<Vec<Option<u64>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut detector = template.clone();
            let mut sampler = StreamSampler::new(model, change, replication_rng(seed, r as u64))?;
            // per-threshold horizon is applied below
            crossings(&mut detector, &mut sampler, thresholds, max_horizon)
        })
        .collect::<Result<_>>()?;

    Ok((0..thresholds.len())
        .map(|t| {
            let horizon = horizons[t];
            let mut lengths = Vec::with_capacity(reps);
            let (mut censored, mut discarded) = (0, 0);
            for rep in &per_rep {
                match rep[t] {
                    Some(tau) if tau < gamma => discarded += 1,
                    Some(tau) if tau - offset <= horizon => lengths.push((tau - offset) as f64),
                    _ => {
                        censored += 1;
                        lengths.push(horizon as f64);
                    }
                }
            }
            RunLengthEstimate::from_lengths(&lengths, censored, horizon, discarded)
        })
        .collect())
}

/// Mean time to false alarm `E∞[τ]` at threshold `threshold`.
pub fn estimate_mtfa<D>(
    template: &D,
    threshold: f64,
    reps: usize,
    horizon: u64,
    seed: u64,
) -> Result<RunLengthEstimate>
where
    D: Detector + Clone + Send + Sync,
{
    let mut v = simulate_run_lengths(
        template,
        &ChangeSpec::NoChange,
        &[threshold],
        &[horizon],
        reps,
        seed,
    )?;
    Ok(v.remove(0))
}

/// Mean detection delay under `change`; `E₁[τ]` when the change point is 1.
pub fn estimate_delay<D>(
    template: &D,
    change: &ChangeSpec,
    threshold: f64,
    reps: usize,
    horizon: u64,
    seed: u64,
) -> Result<RunLengthEstimate>
where
    D: Detector + Clone + Send + Sync,
{
    if change.gamma().is_none() {
        return Err(Error::validation(
            "delay estimation needs a finite change point",
        ));
    }
    let mut v = simulate_run_lengths(template, change, &[threshold], &[horizon], reps, seed)?;
    Ok(v.remove(0))
}

/// Delay with the change point drawn uniformly from the first period,
/// one draw per replication.
pub fn estimate_delay_random_gamma<D>(
    template: &D,
    change: &ChangeSpec,
    threshold: f64,
    reps: usize,
    horizon: u64,
    seed: u64,
) -> Result<RunLengthEstimate>
where
    D: Detector + Clone + Send + Sync,
{
    use rand::Rng;

    if change.gamma().is_none() {
        return Err(Error::validation(
            "delay estimation needs a finite change point",
        ));
    }
    let model = template.model();
    change.validate(model)?;
    let period = model.period() as u64;
    let results: Vec<(Option<u64>, u64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(seed, r as u64);
            let gamma = rng.gen_range(1..=period);
            let shifted = change.with_gamma(gamma);
            let mut sampler = StreamSampler::new(model, &shifted, rng)?;
            let mut detector = template.clone();
            let tau = crossings(
                &mut detector,
                &mut sampler,
                &[threshold],
                horizon + gamma - 1,
            )?;
            Ok((tau[0], gamma))
        })
        .collect::<Result<_>>()?;
    let mut lengths = Vec::with_capacity(reps);
    let (mut censored, mut discarded) = (0, 0);
    for (tau, gamma) in results {
        match tau {
            Some(t) if t < gamma => discarded += 1,
            Some(t) => lengths.push((t - gamma + 1) as f64),
            None => {
                censored += 1;
                lengths.push(horizon as f64);
            }
        }
    }
    Ok(RunLengthEstimate::from_lengths(
        &lengths, censored, horizon, discarded,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{PostChangeGrid, SingleBatchDetector};
    use crate::model::{BatchPartition, Family, IpidModel};

    fn detector() -> SingleBatchDetector {
        let m = IpidModel::new(
            Family::Poisson,
            BatchPartition::new(4, vec![2, 4]).unwrap(),
            vec![2.0, 4.0],
        )
        .unwrap();
        let g = PostChangeGrid::multiplicative(&m, &[2.0], 0.5).unwrap();
        SingleBatchDetector::new(m, g, 3.0).unwrap()
    }

    #[test]
    fn never_fires_is_fully_censored() {
        let est = estimate_mtfa(&detector(), 1e12, 50, 200, 1).unwrap();
        assert_eq!(est.mean, 200.0);
        assert_eq!(est.censored, 50);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn always_fires_at_first_sample() {
        let est = estimate_mtfa(&detector(), -1e12, 50, 200, 1).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.censored, 0);
    }

    #[test]
    fn reproducible_and_seed_dependent() {
        let d = detector();
        let a = estimate_mtfa(&d, 3.0, 200, 10_000, 5).unwrap();
        let b = estimate_mtfa(&d, 3.0, 200, 10_000, 5).unwrap();
        let c = estimate_mtfa(&d, 3.0, 200, 10_000, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn multi_threshold_matches_single_runs() {
        let d = detector();
        let joint = simulate_run_lengths(
            &d,
            &ChangeSpec::NoChange,
            &[3.0, 1.0, 2.0],
            &[5_000, 5_000, 5_000],
            100,
            9,
        )
        .unwrap();
        for (i, a) in [3.0, 1.0, 2.0].into_iter().enumerate() {
            let single = estimate_mtfa(&d, a, 100, 5_000, 9).unwrap();
            assert_eq!(joint[i], single);
        }
        assert!(joint[1].mean <= joint[2].mean && joint[2].mean <= joint[0].mean);
    }

    #[test]
    fn delay_discards_early_alarms() {
        let d = detector();
        let change = ChangeSpec::AllBatch {
            gamma: 50,
            lambdas: vec![8.0, 16.0],
        };
        // a tiny threshold alarms before γ on most paths
        let est = estimate_delay(&d, &change, 0.1, 100, 1_000, 3).unwrap();
        assert!(est.discarded > 0);
        assert_eq!(est.replications + est.discarded, 100);
        assert!(estimate_delay(&d, &ChangeSpec::NoChange, 1.0, 10, 10, 1).is_err());
    }

    #[test]
    fn random_gamma_delay_is_positive() {
        let d = detector();
        let change = ChangeSpec::AllBatch {
            gamma: 1,
            lambdas: vec![8.0, 16.0],
        };
        let est = estimate_delay_random_gamma(&d, &change, 3.0, 200, 1_000, 4).unwrap();
        assert!(est.mean >= 1.0);
        assert_eq!(est.censored, 0);
    }
}
