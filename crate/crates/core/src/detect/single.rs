use super::{check_not_fired, cusum_update, Alarm, Detector, PostChangeGrid};
use crate::error::Result;
use crate::model::{IpidModel, LlrCoeffs};

#[derive(Debug, Clone)]
struct Cell {
    batch: usize,
    lambda: f64,
    coeffs: LlrCoeffs,
    w: f64,
}

/// Bank of per-batch CUSUMs; fires at `τ_o = min_e τ^e`.
///
/// Cell `(e, λ)` accumulates `log p(Y; λ)/p(Y; θ^(e))` over samples of
/// batch `e` only, so its value is the restricted-sum statistic for that
/// alternative and `W_n^e` is the maximum over the batch's cells.
#[derive(Debug, Clone)]
pub struct SingleBatchDetector {
    model: IpidModel,
    grid: PostChangeGrid,
    threshold: f64,
    /// Ordered by batch, then grid order.
    cells: Vec<Cell>,
    clock: u64,
    steps: u64,
    alarm: Option<Alarm>,
}

impl SingleBatchDetector {
    pub fn new(model: IpidModel, grid: PostChangeGrid, threshold: f64) -> Result<Self> {
        grid.validate(&model)?;
        let family = model.family();
        let mut cells = Vec::new();
        for (e, lambdas) in grid.per_batch().iter().enumerate() {
            for &lambda in lambdas {
                cells.push(Cell {
                    batch: e,
                    lambda,
                    coeffs: family.llr_coeffs(model.theta(e), lambda)?,
                    w: 0.0,
                });
            }
        }
        Ok(SingleBatchDetector {
            model,
            grid,
            threshold,
            cells,
            clock: 1,
            steps: 0,
            alarm: None,
        })
    }

    pub fn grid(&self) -> &PostChangeGrid {
        &self.grid
    }

    /// `W_n^e` for every batch.
    pub fn batch_statistics(&self) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; self.model.num_batches()];
        for c in &self.cells {
            out[c.batch] = out[c.batch].max(c.w);
        }
        out
    }

    /// Cell values in (batch, grid) order.
    pub fn cell_values(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.cells.iter().map(|c| (c.batch, c.lambda, c.w))
    }

    fn leader(&self) -> &Cell {
        let mut best = &self.cells[0];
        for c in &self.cells[1..] {
            if c.w > best.w {
                best = c;
            }
        }
        best
    }
}

impl Detector for SingleBatchDetector {
    fn model(&self) -> &IpidModel {
        &self.model
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }

    fn set_threshold(&mut self, threshold: f64) {
        self.threshold = threshold;
    }

    fn clock(&self) -> u64 {
        self.clock
    }

    fn statistic(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.leader().w
        }
    }

    fn alarm(&self) -> Option<&Alarm> {
        self.alarm.as_ref()
    }

    fn reset(&mut self, start_index: u64) {
        assert!(start_index >= 1, "sample indices are 1-based");
        for c in &mut self.cells {
            c.w = 0.0;
        }
        self.clock = start_index;
        self.steps = 0;
        self.alarm = None;
    }

    fn step(&mut self, y: f64) -> Result<Option<Alarm>> {
        check_not_fired(&self.alarm)?;
        self.model.family().check_obs(y)?;
        let k = self.clock;
        let batch = self.model.partition().batch_of(k);
        for c in &mut self.cells {
            let ell = if c.batch == batch {
                c.coeffs.eval(y)
            } else {
                0.0
            };
            c.w = cusum_update(c.w, ell);
        }
        self.clock += 1;
        self.steps += 1;
        let leader = self.leader();
        if leader.w > self.threshold {
            let alarm = Alarm {
                time: k,
                statistic: leader.w,
                batch: Some(leader.batch),
                lambda: vec![leader.lambda],
            };
            self.alarm = Some(alarm.clone());
            return Ok(Some(alarm));
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::model::{sample, BatchPartition, ChangeSpec, Family, ObservationSequence};

    fn model() -> IpidModel {
        IpidModel::new(
            Family::Poisson,
            BatchPartition::new(2, vec![1, 2]).unwrap(),
            vec![2.0, 2.0],
        )
        .unwrap()
    }

    fn detector(threshold: f64) -> SingleBatchDetector {
        let m = model();
        let grid = PostChangeGrid::new(&m, vec![vec![4.0], vec![4.0]], 1.0).unwrap();
        SingleBatchDetector::new(m, grid, threshold).unwrap()
    }

    #[test]
    fn unreachable_threshold_stays_pending() {
        let mut d = detector(1e9);
        let s = sample(&model(), &ChangeSpec::NoChange, 500, 3).unwrap();
        let r = d.detect(&s, false).unwrap();
        assert!(!r.fired);
        assert_eq!(r.samples_consumed, 500);
    }

    #[test]
    fn fires_on_first_sample() {
        let mut d = detector(0.05);
        let alarm = d.step(3.0).unwrap().expect("fires");
        assert_eq!(alarm.time, 1);
        assert_eq!(alarm.batch, Some(0));
        assert_eq!(alarm.lambda, vec![4.0]);
        assert!((alarm.statistic - (3.0 * 2f64.ln() - 2.0)).abs() < 1e-12);
        assert!(matches!(
            d.step(1.0),
            Err(Error::AlreadyFired { stopping_time: 1 })
        ));
    }

    #[test]
    fn off_batch_cells_hold_their_clamped_value() {
        let mut d = detector(1e9);
        d.step(0.0).unwrap(); // batch 0: ℓ = -2
        assert_eq!(d.batch_statistics(), vec![-2.0, 0.0]);
        d.step(0.0).unwrap(); // batch 1
        assert_eq!(d.batch_statistics(), vec![0.0, -2.0]);
    }

    #[test]
    fn bad_observation_leaves_state_unchanged() {
        let mut d = detector(1e9);
        d.step(5.0).unwrap();
        let before = d.batch_statistics();
        assert!(matches!(d.step(-1.0), Err(Error::Domain(_))));
        assert!(matches!(d.step(0.5), Err(Error::Domain(_))));
        assert_eq!(d.batch_statistics(), before);
        assert_eq!(d.clock(), 2);
    }

    #[test]
    fn ties_prefer_lowest_batch_then_grid_order() {
        let m = IpidModel::new(
            Family::gaussian(1.0).unwrap(),
            BatchPartition::new(2, vec![1, 2]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        let grid = PostChangeGrid::new(&m, vec![vec![1.0], vec![1.0]], 0.5).unwrap();
        let mut d = SingleBatchDetector::new(m.clone(), grid, -1.0).unwrap();
        // ℓ = y − 1/2 vanishes, so both cells sit at 0
        let alarm = d.step(0.5).unwrap().unwrap();
        assert_eq!(alarm.batch, Some(0));

        let grid = PostChangeGrid::new(&m, vec![vec![1.0], vec![-1.0, 1.0]], 0.5).unwrap();
        let mut d = SingleBatchDetector::new(m, grid, -1.0).unwrap();
        // batch 0 drops to −1/2; the two untouched batch-1 cells tie at 0
        let alarm = d.step(0.0).unwrap().unwrap();
        assert_eq!((alarm.batch, alarm.lambda), (Some(1), vec![-1.0]));
    }

    #[test]
    fn reset_replays_identically() {
        let m = model();
        let change = ChangeSpec::AllBatch {
            gamma: 20,
            lambdas: vec![4.0, 4.0],
        };
        let s = sample(&m, &change, 400, 9).unwrap();
        let mut d = detector(6.0);
        let first = d.detect(&s, true).unwrap();
        assert!(first.fired);
        let second = d.detect(&s, true).unwrap();
        assert_eq!(first, second);
        let mut fresh = detector(6.0);
        assert_eq!(fresh.detect(&s, true).unwrap(), first);
    }

    #[test]
    fn reset_start_index_sets_phase() {
        let m = IpidModel::new(
            Family::Poisson,
            BatchPartition::new(6598, vec![1500, 3000, 4500, 6598]).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        let grid = PostChangeGrid::multiplicative(&m, &[2.0], 0.5).unwrap();
        let mut d = SingleBatchDetector::new(m, grid, 1e9).unwrap();
        d.reset(6599);
        assert_eq!(d.clock(), 6599);
        d.step(0.0).unwrap();
        // phase 1 belongs to batch 0: ℓ = -(2 - 1)
        assert_eq!(d.batch_statistics(), vec![-1.0, 0.0, 0.0, 0.0]);
        let seq = ObservationSequence::with_start(vec![0.0], 6599);
        let mut d2 = d.clone();
        let r = d2.detect(&seq, true).unwrap();
        assert_eq!(r.trajectory.unwrap(), vec![(6599, 0.0)]);
    }
}
