use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::{AllBatchOptions, DetectorKind, PostChangeGrid, DEFAULT_PRODUCT_CAP};
use crate::error::{Error, Result};
use crate::model::{BatchPartition, Family, IpidModel};

/// A value shared by every modality or given per modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerModality<T> {
    Shared(T),
    ByModality(BTreeMap<String, T>),
}

impl<T> PerModality<T> {
    pub fn get(&self, modality: &str) -> Option<&T> {
        match self {
            PerModality::Shared(v) => Some(v),
            PerModality::ByModality(map) => map.get(modality),
        }
    }

    fn lookup(&self, modality: &str, field: &str) -> Result<&T> {
        self.get(modality)
            .ok_or_else(|| Error::config(field, format!("no entry for modality `{modality}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Poisson,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: FamilyKind,
    /// Standard deviation of the Gaussian family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub period: usize,
    pub boundaries: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<PerModality<Vec<f64>>>,
    /// Training CSV files, pooled per batch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_from: Option<PerModality<Vec<PathBuf>>>,
    /// Fit from this (1-based) day of each monitored stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_day: Option<usize>,
    /// JSON baseline document written by `fit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// `Λ^(e) = { m·θ^(e) }`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<PerModality<Vec<f64>>>,
    /// Explicit `Λ^(e)` lists, one per batch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<PerModality<Vec<Vec<f64>>>>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub kind: DetectorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default = "default_cap")]
    pub product_cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_PRODUCT_CAP
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResetPolicy {
    Never,
    AtAlarm,
    #[default]
    AtDayBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    #[default]
    Error,
    Zero,
    Hold,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day_length: Option<usize>,
    #[serde(default)]
    pub reset_policy: ResetPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_seconds: Option<f64>,
    #[serde(default)]
    pub round_counts: bool,
    #[serde(default)]
    pub fill_gaps: GapPolicy,
}

/// Synthetic surrogate used by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub modalities: Vec<String>,
    pub days: usize,
    #[serde(default = "one")]
    pub training_days: usize,
    /// 1-based event day; no event when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_day: Option<usize>,
    /// 1-based sample within the day where the event starts.
    #[serde(default = "one")]
    pub event_start: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_multiplier: Option<PerModality<f64>>,
    /// True baselines of the generated streams.
    pub truth: PerModality<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

/// Full run configuration (TOML document with `model`, `grid`, `detector`
/// and `scenario` sections, plus optional `simulate`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub detector: DetectorSection,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
}

/// Where the baseline of each modality comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselineSource<'a> {
    Explicit(&'a PerModality<Vec<f64>>),
    Files(&'a PerModality<Vec<PathBuf>>),
    Day(usize),
    Document(&'a PathBuf),
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config = Self::parse_unchecked(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Parse without cross-field validation, for callers that override
    /// fields before calling [`RunConfig::validate`].
    pub fn parse_unchecked(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            field: e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "document".into()),
            message: e.message().to_string(),
        })
    }

    /// Make relative file references relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(f) = &mut self.model.baseline_file {
            fix(f);
        }
        match &mut self.model.fit_from {
            Some(PerModality::Shared(paths)) => paths.iter_mut().for_each(fix),
            Some(PerModality::ByModality(map)) => map.values_mut().flatten().for_each(fix),
            None => {}
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn family(&self) -> Result<Family> {
        match (self.model.family, self.model.sigma) {
            (FamilyKind::Poisson, None) => Ok(Family::Poisson),
            (FamilyKind::Poisson, Some(_)) => Err(Error::config(
                "model.sigma",
                "only meaningful for the gaussian family",
            )),
            (FamilyKind::Gaussian, Some(sigma)) => {
                Family::gaussian(sigma).map_err(|e| Error::config("model.sigma", e.to_string()))
            }
            (FamilyKind::Gaussian, None) => Err(Error::config(
                "model.sigma",
                "required for the gaussian family",
            )),
        }
    }

    pub fn partition(&self) -> Result<BatchPartition> {
        BatchPartition::new(self.model.period, self.model.boundaries.clone())
            .map_err(|e| Error::config("model.boundaries", e.to_string()))
    }

    /// Configured baseline source; `None` when baselines are supplied by
    /// the caller (e.g. a `fit` document passed on the command line).
    pub fn baseline_source(&self) -> Result<Option<BaselineSource<'_>>> {
        let m = &self.model;
        let given = [
            m.baseline.is_some(),
            m.fit_from.is_some(),
            m.fit_day.is_some(),
            m.baseline_file.is_some(),
        ];
        match given.iter().filter(|&&g| g).count() {
            0 => return Ok(None),
            1 => {}
            _ => {
                return Err(Error::config(
                    "model",
                    "baseline, fit_from, fit_day and baseline_file are mutually exclusive",
                ))
            }
        }
        Ok(Some(if let Some(b) = &m.baseline {
            BaselineSource::Explicit(b)
        } else if let Some(f) = &m.fit_from {
            BaselineSource::Files(f)
        } else if let Some(d) = m.fit_day {
            BaselineSource::Day(d)
        } else {
            BaselineSource::Document(m.baseline_file.as_ref().expect("counted above"))
        }))
    }

    /// Threshold `A`: explicit, or `ln β`.
    pub fn threshold(&self) -> Result<f64> {
        match (self.detector.threshold, self.detector.beta) {
            (Some(a), None) if a.is_finite() => Ok(a),
            (Some(_), None) => Err(Error::config("detector.threshold", "must be finite")),
            (None, Some(beta)) if beta > 1.0 && beta.is_finite() => Ok(beta.ln()),
            (None, Some(_)) => Err(Error::config("detector.beta", "must exceed 1")),
            _ => Err(Error::config(
                "detector",
                "exactly one of threshold and beta is required",
            )),
        }
    }

    pub fn all_batch_options(&self) -> AllBatchOptions {
        AllBatchOptions {
            product_cap: self.detector.product_cap,
            window: self.detector.window,
            force_windowed: false,
        }
    }

    pub fn model_with(&self, baseline: Vec<f64>) -> Result<IpidModel> {
        IpidModel::new(self.family()?, self.partition()?, baseline)
    }

    pub fn grid_for(&self, modality: &str, model: &IpidModel) -> Result<PostChangeGrid> {
        let g = &self.grid;
        let grid = match (&g.multipliers, &g.lambdas) {
            (Some(m), None) => PostChangeGrid::multiplicative(
                model,
                m.lookup(modality, "grid.multipliers")?,
                g.epsilon,
            ),
            (None, Some(l)) => PostChangeGrid::new(
                model,
                l.lookup(modality, "grid.lambdas")?.clone(),
                g.epsilon,
            ),
            _ => {
                return Err(Error::config(
                    "grid",
                    "exactly one of multipliers and lambdas is required",
                ))
            }
        };
        grid.map_err(|e| Error::config("grid", format!("modality `{modality}`: {e}")))
    }

    fn grid_is_shared(&self) -> bool {
        matches!(self.grid.multipliers, Some(PerModality::Shared(_)))
            || matches!(self.grid.lambdas, Some(PerModality::Shared(_)))
    }

    pub fn validate(&self) -> Result<()> {
        let family = self.family()?;
        let partition = self.partition()?;
        self.threshold()?;
        self.baseline_source()?;
        if !(self.grid.epsilon.is_finite() && self.grid.epsilon > 0.0) {
            return Err(Error::config("grid.epsilon", "must be positive"));
        }
        if self.grid.multipliers.is_some() == self.grid.lambdas.is_some() {
            return Err(Error::config(
                "grid",
                "exactly one of multipliers and lambdas is required",
            ));
        }
        if self.detector.window == Some(0) {
            return Err(Error::config("detector.window", "must be at least 1"));
        }
        match &self.model.baseline {
            Some(PerModality::Shared(b)) => {
                let model = IpidModel::new(family, partition.clone(), b.clone())
                    .map_err(|e| Error::config("model.baseline", e.to_string()))?;
                if self.grid_is_shared() {
                    self.grid_for("", &model)?;
                }
            }
            Some(PerModality::ByModality(map)) => {
                for (name, b) in map {
                    let model =
                        IpidModel::new(family, partition.clone(), b.clone()).map_err(|e| {
                            Error::config(format!("model.baseline.{name}"), e.to_string())
                        })?;
                    self.grid_for(name, &model)?;
                }
            }
            None => {}
        }
        if let Some(day_length) = self.scenario.day_length {
            if day_length == 0 {
                return Err(Error::config("scenario.day_length", "must be at least 1"));
            }
        }
        if let Some(d) = self.model.fit_day {
            match self.scenario.day_length {
                None => {
                    return Err(Error::config(
                        "model.fit_day",
                        "requires scenario.day_length",
                    ))
                }
                Some(_) if d == 0 => {
                    return Err(Error::config("model.fit_day", "days are numbered from 1"))
                }
                _ => {}
            }
        }
        if let Some(s) = self.scenario.interval_seconds {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::config(
                    "scenario.interval_seconds",
                    "must be positive",
                ));
            }
        }
        if let Some(sim) = &self.simulate {
            if sim.modalities.is_empty() {
                return Err(Error::config(
                    "simulate.modalities",
                    "at least one modality",
                ));
            }
            if sim.days == 0 || sim.training_days == 0 {
                return Err(Error::config("simulate.days", "must be at least 1"));
            }
            match self.scenario.day_length {
                None => return Err(Error::config("simulate", "requires scenario.day_length")),
                Some(l) if sim.event_start == 0 || sim.event_start > l => {
                    return Err(Error::config("simulate.event_start", "outside the day"))
                }
                _ => {}
            }
            if let Some(d) = sim.event_day {
                if d == 0 || d > sim.days {
                    return Err(Error::config(
                        "simulate.event_day",
                        "outside the simulated days",
                    ));
                }
                if sim.event_multiplier.is_none() {
                    return Err(Error::config(
                        "simulate.event_multiplier",
                        "required with event_day",
                    ));
                }
            }
            for name in &sim.modalities {
                let truth = sim.truth.lookup(name, "simulate.truth")?;
                IpidModel::new(family, partition.clone(), truth.clone())
                    .map_err(|e| Error::config(format!("simulate.truth.{name}"), e.to_string()))?;
                if let Some(m) = &sim.event_multiplier {
                    let m = m.lookup(name, "simulate.event_multiplier")?;
                    if !(m.is_finite() && *m > 0.0) {
                        return Err(Error::config(
                            "simulate.event_multiplier",
                            "must be positive",
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}
