use serde::{Deserialize, Serialize};

use super::{simulate_run_lengths, RunLengthEstimate};
use crate::detect::{AllBatchOptions, AnyDetector, DetectorKind, PostChangeGrid};
use crate::error::{Error, Result};
use crate::model::{BatchPartition, ChangeSpec, Family, IpidModel};

/// Delay inflation `κ = 1 + Σ_{f≠e} |B_f| / |B_e|` for a change confined to `batch`.
pub fn kappa(partition: &BatchPartition, batch: usize) -> f64 {
    let own = partition.batch_size(batch) as f64;
    1.0 + (partition.period() as f64 - own) / own
}

/// Time-averaged information `Ī = (1/T) Σ_e |B_e| · I(λ^(e), θ^(e))`.
pub fn mean_information(model: &IpidModel, lambdas: &[f64]) -> Result<f64> {
    if lambdas.len() != model.num_batches() {
        return Err(Error::validation(format!(
            "need {} post-change parameters, got {}",
            model.num_batches(),
            lambdas.len()
        )));
    }
    let family = model.family();
    let partition = model.partition();
    let mut acc = 0.0;
    for (e, &lambda) in lambdas.iter().enumerate() {
        acc += partition.batch_size(e) as f64 * family.kl_divergence(lambda, model.theta(e))?;
    }
    Ok(acc / partition.period() as f64)
}

/// First-order delay bound `κ · ln β / I(λ, θ)` for a single-batch change.
pub fn theoretical_delay_bound(
    family: Family,
    partition: &BatchPartition,
    batch: usize,
    lambda: f64,
    theta: f64,
    beta: f64,
) -> Result<f64> {
    if batch >= partition.num_batches() {
        return Err(Error::validation(format!("batch {batch} out of range")));
    }
    if beta.is_nan() || beta <= 1.0 {
        return Err(Error::validation(format!("beta must exceed 1, got {beta}")));
    }
    let info = family.kl_divergence(lambda, theta)?;
    if info == 0.0 {
        return Err(Error::domain(
            "post-change parameter equals the baseline; the divergence is zero",
        ));
    }
    Ok(beta.ln() * kappa(partition, batch) / info)
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyConfig {
    pub betas: Vec<f64>,
    pub mtfa_reps: usize,
    pub delay_reps: usize,
    /// MTFA horizon is `horizon_factor · β`.
    pub horizon_factor: f64,
    pub delay_horizon: u64,
    pub seed: u64,
}

impl Default for EfficiencyConfig {
    fn default() -> Self {
        EfficiencyConfig {
            betas: vec![1e2, 1e3, 1e4],
            mtfa_reps: 1000,
            delay_reps: 1000,
            horizon_factor: 50.0,
            delay_horizon: 100_000,
            seed: 0,
        }
    }
}

/// MTFA and delay across budgets, compared with the first-order theory.
///
/// For a single-batch change `kappa` is the inflation factor of the changed
/// batch and `information` is `I(λ, θ^(e))`; for an all-batch change
/// `kappa = 1` and `information` is `Ī`. The theory slope is
/// `kappa / information` in both cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub detector: DetectorKind,
    pub change: ChangeSpec,
    pub betas: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub mtfa: Vec<RunLengthEstimate>,
    pub delay: Vec<RunLengthEstimate>,
    pub slope_fit: f64,
    pub theory_slope: f64,
    pub kappa: f64,
    #[serde(rename = "I_bar")]
    pub information: f64,
    /// No estimate censored above 20%.
    pub censoring_ok: bool,
    pub pass: bool,
}

const SLOPE_SLACK: f64 = 1.5;
const MAX_CENSORED: f64 = 0.2;

pub fn efficiency_report(
    model: &IpidModel,
    grid: &PostChangeGrid,
    kind: DetectorKind,
    options: AllBatchOptions,
    change: &ChangeSpec,
    config: &EfficiencyConfig,
) -> Result<EfficiencyReport> {
    change.validate(model)?;
    if change.gamma().is_none() {
        return Err(Error::validation(
            "efficiency report needs a change to detect",
        ));
    }
    if config.betas.len() < 2 {
        return Err(Error::validation(
            "need at least two budgets to fit a slope",
        ));
    }
    if let Some(b) = config.betas.iter().find(|&&b| !(b > 1.0 && b.is_finite())) {
        return Err(Error::validation(format!("budget {b} must exceed 1")));
    }
    let (kappa, information) = match change {
        ChangeSpec::SingleBatch { batch, lambda, .. } => (
            kappa(model.partition(), *batch),
            model.family().kl_divergence(*lambda, model.theta(*batch))?,
        ),
        ChangeSpec::AllBatch { lambdas, .. } => (1.0, mean_information(model, lambdas)?),
        ChangeSpec::NoChange => unreachable!("checked above"),
    };

    let template = AnyDetector::build(kind, model, grid, f64::INFINITY, options)?;
    let thresholds: Vec<f64> = config.betas.iter().map(|b| b.ln()).collect();
    let mtfa_horizons: Vec<u64> = config
        .betas
        .iter()
        .map(|b| (config.horizon_factor * b).ceil() as u64)
        .collect();
    let mtfa = simulate_run_lengths(
        &template,
        &ChangeSpec::NoChange,
        &thresholds,
        &mtfa_horizons,
        config.mtfa_reps,
        config.seed,
    )?;
    let delay = simulate_run_lengths(
        &template,
        change,
        &thresholds,
        &vec![config.delay_horizon; thresholds.len()],
        config.delay_reps,
        config.seed.wrapping_add(1),
    )?;

    let delay_means: Vec<f64> = delay.iter().map(|d| d.mean).collect();
    let slope_fit = least_squares_slope(&thresholds, &delay_means);
    let theory_slope = kappa / information;
    let censoring_ok = mtfa
        .iter()
        .chain(&delay)
        .all(|e| e.censored_fraction() <= MAX_CENSORED);
    let budget_met = mtfa.iter().zip(&config.betas).all(|(m, &b)| m.mean >= b);
    let pass = censoring_ok && budget_met && slope_fit <= SLOPE_SLACK * theory_slope;

    Ok(EfficiencyReport {
        detector: kind,
        change: change.clone(),
        betas: config.betas.clone(),
        thresholds,
        mtfa,
        delay,
        slope_fit,
        theory_slope,
        kappa,
        information,
        censoring_ok,
        pass,
    })
}
