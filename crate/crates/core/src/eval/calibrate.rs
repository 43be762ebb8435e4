use serde::{Deserialize, Serialize};

use super::estimate_mtfa;
use crate::detect::Detector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CalibrationMethod {
    /// `A = ln β`.
    LogBeta,
    /// Bisection on the Monte Carlo MTFA, using common random numbers for
    /// every probe so the estimate is monotone in `A`.
    MonteCarloBisection {
        reps: usize,
        horizon: u64,
        tolerance: f64,
        seed: u64,
    },
}

/// False-alarm budget `E∞[τ] ≥ beta` and how to meet it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub beta: f64,
    pub method: CalibrationMethod,
}

impl CalibrationConfig {
    pub fn log_beta(beta: f64) -> Self {
        CalibrationConfig {
            beta,
            method: CalibrationMethod::LogBeta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 1.0) {
            return Err(Error::validation(format!(
                "false-alarm budget must exceed 1, got {}",
                self.beta
            )));
        }
        if let CalibrationMethod::MonteCarloBisection {
            reps,
            horizon,
            tolerance,
            ..
        } = self.method
        {
            if reps < 100 {
                return Err(Error::validation(format!(
                    "bisection needs at least 100 replications, got {reps}"
                )));
            }
            if (horizon as f64) < 10.0 * self.beta {
                return Err(Error::validation(format!(
                    "bisection horizon {horizon} is below 10·beta"
                )));
            }
            if !(tolerance.is_finite() && tolerance > 0.0) {
                return Err(Error::validation("bisection tolerance must be positive"));
            }
        }
        Ok(())
    }
}

/// Closed-form threshold `A = ln β`.
pub fn calibrate_threshold(config: &CalibrationConfig) -> Result<f64> {
    config.validate()?;
    match config.method {
        CalibrationMethod::LogBeta => Ok(config.beta.ln()),
        CalibrationMethod::MonteCarloBisection { .. } => Err(Error::validation(
            "Monte Carlo calibration needs a detector; use calibrate_threshold_mc",
        )),
    }
}

const MAX_EXPANSIONS: usize = 8;
const MAX_BISECTIONS: usize = 60;

/// Threshold whose estimated MTFA lands in `[β, (1 + tolerance)·β]`.
///
/// The search starts from `[ln β / 2, 4 ln β]` and widens the bracket a
/// bounded number of times. If the bracket collapses before an estimate
/// lands in the band, the upper end (whose MTFA is at least β) is returned.
/// `LogBeta` configs short-circuit to `ln β`.
pub fn calibrate_threshold_mc<D>(template: &D, config: &CalibrationConfig) -> Result<f64>
where
    D: Detector + Clone + Send + Sync,
{
    config.validate()?;
    let (reps, horizon, tolerance, seed) = match config.method {
        CalibrationMethod::LogBeta => return Ok(config.beta.ln()),
        CalibrationMethod::MonteCarloBisection {
            reps,
            horizon,
            tolerance,
            seed,
        } => (reps, horizon, tolerance, seed),
    };
    let beta = config.beta;
    let mtfa = |a: f64| estimate_mtfa(template, a, reps, horizon, seed).map(|e| e.mean);

    let mut lo = beta.ln() / 2.0;
    let mut hi = 4.0 * beta.ln();
    let mut m_lo = mtfa(lo)?;
    let mut m_hi = mtfa(hi)?;
    let mut expansions = 0;
    while (m_lo >= beta || m_hi < beta) && expansions < MAX_EXPANSIONS {
        let width = hi - lo;
        if m_lo >= beta {
            hi = lo;
            m_hi = m_lo;
            lo -= width;
            m_lo = mtfa(lo)?;
        } else {
            lo = hi;
            m_lo = m_hi;
            hi += 2.0 * width;
            m_hi = mtfa(hi)?;
        }
        expansions += 1;
    }
    if m_lo >= beta || m_hi < beta {
        return Err(Error::Calibration(format!(
            "bracket [{lo}, {hi}] does not straddle beta = {beta}: MTFA estimates {m_lo} and {m_hi} \
             ({reps} replications, horizon {horizon})"
        )));
    }
    if m_hi <= (1.0 + tolerance) * beta {
        return Ok(hi);
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let m = mtfa(mid)?;
        if m < beta {
            lo = mid;
        } else if m <= (1.0 + tolerance) * beta {
            return Ok(mid);
        } else {
            hi = mid;
        }
    }
    log::info!("bisection bracket collapsed at [{lo}, {hi}]; returning upper end");
    Ok(hi)
}
