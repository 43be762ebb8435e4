use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parametric family `p(·; θ)` of the per-sample observation law.
///
/// `θ` is the Poisson rate or the Gaussian mean; the Gaussian standard
/// deviation is fixed and known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Poisson,
    Gaussian { sigma: f64 },
}

/// Log-likelihood ratio `log p(y; λ) − log p(y; θ)` written as `slope·y − offset`.
///
/// Both supported families are exponential families with the identity as
/// sufficient statistic, so the ratio is affine in `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlrCoeffs {
    pub slope: f64,
    pub offset: f64,
}

impl LlrCoeffs {
    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        self.slope * y - self.offset
    }
}

impl Family {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let family = Family::Gaussian { sigma };
        family.validate()?;
        Ok(family)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::Poisson => Ok(()),
            Family::Gaussian { sigma } if sigma.is_finite() && sigma > 0.0 => Ok(()),
            Family::Gaussian { sigma } => Err(Error::domain(format!(
                "gaussian standard deviation must be positive and finite, got {sigma}"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::Gaussian { .. } => "gaussian",
        }
    }

    pub fn is_valid_param(&self, theta: f64) -> bool {
        match self {
            Family::Poisson => theta.is_finite() && theta > 0.0,
            Family::Gaussian { .. } => theta.is_finite(),
        }
    }

    pub fn check_param(&self, theta: f64) -> Result<()> {
        if self.is_valid_param(theta) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "parameter {theta} is not valid for the {} family",
                self.name()
            )))
        }
    }

    pub fn in_support(&self, y: f64) -> bool {
        match self {
            Family::Poisson => y.is_finite() && y >= 0.0 && y.fract() == 0.0,
            Family::Gaussian { .. } => y.is_finite(),
        }
    }

    pub fn check_obs(&self, y: f64) -> Result<()> {
        if self.in_support(y) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "observation {y} is outside the support of the {} family",
                self.name()
            )))
        }
    }

    pub fn log_pmf(&self, theta: f64, y: f64) -> Result<f64> {
        self.check_param(theta)?;
        self.check_obs(y)?;
        Ok(match *self {
            Family::Poisson => y * theta.ln() - theta - libm::lgamma(y + 1.0),
            Family::Gaussian { sigma } => {
                let z = (y - theta) / sigma;
                -0.5 * z * z - (sigma * (2.0 * PI).sqrt()).ln()
            }
        })
    }

    pub fn llr_coeffs(&self, theta: f64, lambda: f64) -> Result<LlrCoeffs> {
        self.check_param(theta)?;
        self.check_param(lambda)?;
        Ok(match *self {
            Family::Poisson => LlrCoeffs {
                slope: (lambda / theta).ln(),
                offset: lambda - theta,
            },
            Family::Gaussian { sigma } => {
                let var = sigma * sigma;
                LlrCoeffs {
                    slope: (lambda - theta) / var,
                    offset: (lambda * lambda - theta * theta) / (2.0 * var),
                }
            }
        })
    }

    /// `log p(y; λ) − log p(y; θ)` via the simplified closed form.
    pub fn llr(&self, theta: f64, lambda: f64, y: f64) -> Result<f64> {
        let coeffs = self.llr_coeffs(theta, lambda)?;
        self.check_obs(y)?;
        Ok(coeffs.eval(y))
    }

    /// Same quantity as [`Family::llr`], computed as a difference of log-densities.
    pub fn llr_generic(&self, theta: f64, lambda: f64, y: f64) -> Result<f64> {
        Ok(self.log_pmf(lambda, y)? - self.log_pmf(theta, y)?)
    }

    /// KL divergence `D(p(·; λ) ‖ p(·; θ))`.
    pub fn kl_divergence(&self, lambda: f64, theta: f64) -> Result<f64> {
        self.check_param(lambda)?;
        self.check_param(theta)?;
        let kl = match *self {
            Family::Poisson => theta - lambda + lambda * (lambda / theta).ln(),
            Family::Gaussian { sigma } => (lambda - theta).powi(2) / (2.0 * sigma * sigma),
        };
        Ok(kl.max(0.0))
    }

    pub fn sampler(&self, theta: f64) -> Result<ParamSampler> {
        self.check_param(theta)?;
        Ok(match *self {
            Family::Poisson => ParamSampler::Poisson(
                Poisson::new(theta).map_err(|e| Error::domain(e.to_string()))?,
            ),
            Family::Gaussian { sigma } => ParamSampler::Gaussian(
                Normal::new(theta, sigma).map_err(|e| Error::domain(e.to_string()))?,
            ),
        })
    }
}

/// Exact sampler for one fixed parameter value.
#[derive(Debug, Clone, Copy)]
pub enum ParamSampler {
    Poisson(Poisson<f64>),
    Gaussian(Normal<f64>),
}

impl ParamSampler {
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ParamSampler::Poisson(d) => d.sample(rng),
            ParamSampler::Gaussian(d) => d.sample(rng),
        }
    }
}
