use super::{AllBatchDetector, Detector, SingleBatchDetector};
use crate::error::{Error, Result};
use crate::model::ObservationSequence;

const SLACK: f64 = 1e-9;

/// Check `Σ_e max_λ S_1(e, λ) ≤ W_n ≤ Σ_e W_n^e` after every sample of `prefix`.
///
/// `S_1(e, λ)` is the batch-`e` log-likelihood-ratio sum from the first
/// sample, i.e. the all-batch statistic with both maxima removed. Both
/// detectors are cloned and reset to the prefix's start index, so the
/// callers' instances are left untouched.
pub fn statistic_bounds_check(
    all: &AllBatchDetector,
    single: &SingleBatchDetector,
    prefix: &ObservationSequence,
) -> Result<bool> {
    if all.model() != single.model() || all.grid() != single.grid() {
        return Err(Error::validation(
            "bounds check needs detectors built on the same model and grid",
        ));
    }
    let model = all.model();
    let family = model.family();
    let mut all = all.clone();
    let mut single = single.clone();
    all.set_threshold(f64::INFINITY);
    single.set_threshold(f64::INFINITY);
    all.reset(prefix.start_index);
    single.reset(prefix.start_index);

    let grid = all.grid().clone();
    let coeffs = grid
        .per_batch()
        .iter()
        .enumerate()
        .map(|(e, ls)| {
            ls.iter()
                .map(|&l| family.llr_coeffs(model.theta(e), l))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut full_sums: Vec<Vec<f64>> = grid
        .per_batch()
        .iter()
        .map(|l| vec![0.0; l.len()])
        .collect();

    let mut holds = true;
    for (k, y) in prefix.indexed() {
        all.step(y)?;
        single.step(y)?;
        let batch = model.partition().batch_of(k);
        for (s, c) in full_sums[batch].iter_mut().zip(&coeffs[batch]) {
            *s += c.eval(y);
        }
        let lower: f64 = full_sums
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .sum();
        let upper: f64 = single.batch_statistics().iter().sum();
        let w = all.statistic();
        if lower > w + SLACK || w > upper + SLACK {
            log::debug!("bounds violated at sample {k}: {lower} <= {w} <= {upper}");
            holds = false;
        }
    }
    Ok(holds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::PostChangeGrid;
    use crate::model::{sample, BatchPartition, ChangeSpec, Family, IpidModel};

    fn detectors(m: &IpidModel, g: &PostChangeGrid) -> (AllBatchDetector, SingleBatchDetector) {
        (
            AllBatchDetector::new(m.clone(), g.clone(), 5.0).unwrap(),
            SingleBatchDetector::new(m.clone(), g.clone(), 5.0).unwrap(),
        )
    }

    #[test]
    fn holds_on_no_change_and_changed_streams() {
        let m = IpidModel::new(
            Family::Poisson,
            BatchPartition::new(8, vec![3, 5, 8]).unwrap(),
            vec![2.0, 6.0, 3.0],
        )
        .unwrap();
        let g = PostChangeGrid::multiplicative(&m, &[0.5, 2.0], 0.5).unwrap();
        let (all, single) = detectors(&m, &g);
        for seed in 0..20 {
            let quiet = sample(&m, &ChangeSpec::NoChange, 50, seed).unwrap();
            assert!(statistic_bounds_check(&all, &single, &quiet).unwrap());
            let change = ChangeSpec::AllBatch {
                gamma: 1,
                lambdas: vec![4.0, 12.0, 6.0],
            };
            let loud = sample(&m, &change, 50, seed).unwrap();
            assert!(statistic_bounds_check(&all, &single, &loud).unwrap());
        }
    }

    #[test]
    fn one_batch_one_alternative() {
        let m = IpidModel::new(
            Family::Poisson,
            BatchPartition::whole(4).unwrap(),
            vec![3.0],
        )
        .unwrap();
        let g = PostChangeGrid::multiplicative(&m, &[2.0], 0.5).unwrap();
        let (all, single) = detectors(&m, &g);
        let s = sample(&m, &ChangeSpec::NoChange, 50, 1).unwrap();
        assert!(statistic_bounds_check(&all, &single, &s).unwrap());
    }

    #[test]
    fn mismatched_detectors_rejected() {
        let m = IpidModel::new(
            Family::Poisson,
            BatchPartition::whole(4).unwrap(),
            vec![3.0],
        )
        .unwrap();
        let g2 = PostChangeGrid::multiplicative(&m, &[2.0], 0.5).unwrap();
        let g3 = PostChangeGrid::multiplicative(&m, &[3.0], 0.5).unwrap();
        let all = AllBatchDetector::new(m.clone(), g2, 5.0).unwrap();
        let single = SingleBatchDetector::new(m, g3, 5.0).unwrap();
        let s = ObservationSequence::new(vec![1.0]);
        assert!(matches!(
            statistic_bounds_check(&all, &single, &s),
            Err(Error::Validation(_))
        ));
    }
}
