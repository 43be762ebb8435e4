use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BaselineSource, ResetPolicy, RunConfig};
use super::csv::{ingest_csv, CountStream, IngestOptions};
use crate::detect::{AnyDetector, Detector};
use crate::error::{Error, Result};
use crate::model::{mle_fit, replication_rng, BatchPartition, Family, ObservationSequence};

/// Baselines keyed by modality, as written by `fit`.
pub type BaselineDocument = BTreeMap<String, Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmRecord {
    pub modality: String,
    /// 1-based day, when day segmentation is configured.
    pub day: Option<usize>,
    pub index: u64,
    pub statistic: f64,
    pub arg_batch: Option<usize>,
    pub arg_lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityOutput {
    pub modality: String,
    pub baseline: Vec<f64>,
    pub threshold: f64,
    pub samples_consumed: usize,
    /// `(n, W_n)` for every consumed sample.
    pub trajectory: Vec<(u64, f64)>,
    pub alarms: Vec<AlarmRecord>,
    /// Whether this modality alarmed on each day.
    pub day_alarms: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayVerdict {
    pub day: usize,
    pub alarm: bool,
    pub alarmed_modalities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutput {
    pub config: RunConfig,
    pub modalities: Vec<ModalityOutput>,
    pub days: Vec<DayVerdict>,
}

impl ScenarioOutput {
    pub fn any_alarm(&self) -> bool {
        self.modalities.iter().any(|m| !m.alarms.is_empty())
    }

    pub fn alarms(&self) -> impl Iterator<Item = &AlarmRecord> {
        self.modalities.iter().flat_map(|m| m.alarms.iter())
    }
}

pub fn ingest_options(config: &RunConfig) -> Result<IngestOptions> {
    Ok(IngestOptions {
        require_counts: config.family()? == Family::Poisson,
        round_counts: config.scenario.round_counts,
        fill_gaps: config.scenario.fill_gaps,
        interval_seconds: config.scenario.interval_seconds.unwrap_or(3.0),
    })
}

/// Per-modality MLE from training streams (several streams per modality pool).
pub fn fit_baselines(config: &RunConfig, training: &[CountStream]) -> Result<BaselineDocument> {
    let family = config.family()?;
    let partition = config.partition()?;
    let mut grouped: BTreeMap<&str, Vec<ObservationSequence>> = BTreeMap::new();
    for s in training {
        grouped
            .entry(&s.modality)
            .or_default()
            .push(s.sequence.clone());
    }
    grouped
        .into_iter()
        .map(|(name, seqs)| Ok((name.to_string(), mle_fit(family, &partition, &seqs)?)))
        .collect()
}

fn day_slice(
    seq: &ObservationSequence,
    day: usize,
    day_length: usize,
) -> Option<ObservationSequence> {
    let lo = (day - 1) * day_length;
    let hi = lo + day_length;
    (hi <= seq.len()).then(|| {
        ObservationSequence::with_start(seq.values[lo..hi].to_vec(), seq.start_index + lo as u64)
    })
}

/// Baselines for every stream, from the configured source.
pub fn resolve_baselines(config: &RunConfig, streams: &[CountStream]) -> Result<BaselineDocument> {
    let source = config
        .baseline_source()?
        .ok_or_else(|| Error::config("model", "no baseline source configured and none supplied"))?;
    let family = config.family()?;
    let partition = config.partition()?;
    let mut out = BaselineDocument::new();
    match source {
        BaselineSource::Explicit(per) => {
            for s in streams {
                let b = per.get(&s.modality).ok_or_else(|| {
                    Error::config(
                        "model.baseline",
                        format!("no entry for modality `{}`", s.modality),
                    )
                })?;
                out.insert(s.modality.clone(), b.clone());
            }
        }
        BaselineSource::Files(per) => {
            let options = ingest_options(config)?;
            for s in streams {
                let paths = per.get(&s.modality).ok_or_else(|| {
                    Error::config(
                        "model.fit_from",
                        format!("no entry for modality `{}`", s.modality),
                    )
                })?;
                let training = paths
                    .iter()
                    .map(|p| ingest_csv(p, &s.modality, &options).map(|c| c.sequence))
                    .collect::<Result<Vec<_>>>()?;
                out.insert(s.modality.clone(), mle_fit(family, &partition, &training)?);
            }
        }
        BaselineSource::Day(day) => {
            let day_length = config.scenario.day_length.expect("validated");
            for s in streams {
                let slice = day_slice(&s.sequence, day, day_length).ok_or_else(|| {
                    Error::validation(format!("stream `{}` has no day {day}", s.modality))
                })?;
                out.insert(s.modality.clone(), mle_fit(family, &partition, &[slice])?);
            }
        }
        BaselineSource::Document(path) => {
            let doc = read_baseline_document(path)?;
            for s in streams {
                let b = doc.get(&s.modality).ok_or_else(|| {
                    Error::validation(format!(
                        "{} has no baseline for modality `{}`",
                        path.display(),
                        s.modality
                    ))
                })?;
                out.insert(s.modality.clone(), b.clone());
            }
        }
    }
    Ok(out)
}

pub fn read_baseline_document(path: &Path) -> Result<BaselineDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Run the configured detector over each stream with the configured baselines.
pub fn run_scenario(config: &RunConfig, streams: &[CountStream]) -> Result<ScenarioOutput> {
    let baselines = resolve_baselines(config, streams)?;
    run_scenario_with_baselines(config, streams, &baselines)
}

/// Run with caller-supplied baselines, ignoring the configured source.
///
/// Modalities are independent processes: each gets its own detector.
/// Within a stream, `reset_policy` decides what happens at day boundaries
/// and after alarms:
///
/// - `never`: the first alarm ends monitoring of the stream;
/// - `at-alarm`: the detector restarts at the next sample;
/// - `at-day-boundary`: the detector restarts at every day start and an
///   alarm skips the rest of its day.
///
/// Skipped samples are not consumed and do not appear in the trajectory.
pub fn run_scenario_with_baselines(
    config: &RunConfig,
    streams: &[CountStream],
    baselines: &BaselineDocument,
) -> Result<ScenarioOutput> {
    config.validate()?;
    let day_length = config.scenario.day_length;
    if let Some(l) = day_length {
        if let Some(s) = streams.iter().find(|s| s.sequence.len() % l != 0) {
            return Err(Error::validation(format!(
                "stream `{}` has {} samples, not a multiple of the day length {l}",
                s.modality,
                s.sequence.len()
            )));
        }
    }
    let modalities: Vec<ModalityOutput> = streams
        .par_iter()
        .map(|s| {
            let baseline = baselines.get(&s.modality).ok_or_else(|| {
                Error::validation(format!("no baseline for modality `{}`", s.modality))
            })?;
            run_modality(config, s, baseline.clone())
        })
        .collect::<Result<_>>()?;

    let num_days = match day_length {
        Some(l) => streams
            .iter()
            .map(|s| s.sequence.len() / l)
            .max()
            .unwrap_or(0),
        None => 0,
    };
    let days = (1..=num_days)
        .map(|day| {
            let alarmed: Vec<String> = modalities
                .iter()
                .filter(|m| m.day_alarms.get(day - 1).copied().unwrap_or(false))
                .map(|m| m.modality.clone())
                .collect();
            DayVerdict {
                day,
                alarm: !alarmed.is_empty(),
                alarmed_modalities: alarmed,
            }
        })
        .collect();
    Ok(ScenarioOutput {
        config: config.clone(),
        modalities,
        days,
    })
}

fn run_modality(
    config: &RunConfig,
    stream: &CountStream,
    baseline: Vec<f64>,
) -> Result<ModalityOutput> {
    let model = config.model_with(baseline.clone())?;
    let grid = config.grid_for(&stream.modality, &model)?;
    let threshold = config.threshold()?;
    let mut detector = AnyDetector::build(
        config.detector.kind,
        &model,
        &grid,
        threshold,
        config.all_batch_options(),
    )?;
    let policy = config.scenario.reset_policy;
    let day_length = config.scenario.day_length;
    let seq = &stream.sequence;
    let n = seq.len();
    let num_days = day_length.map_or(0, |l| n / l);

    let mut trajectory = Vec::with_capacity(n);
    let mut alarms = Vec::new();
    let mut day_alarms = vec![false; num_days];
    detector.reset(seq.start_index);
    let mut i = 0;
    while i < n {
        let k = seq.start_index + i as u64;
        let day = day_length.map(|l| i / l + 1);
        if let (ResetPolicy::AtDayBoundary, Some(l)) = (policy, day_length) {
            if i > 0 && i % l == 0 {
                detector.reset(k);
            }
        }
        let alarm = detector.step(seq.values[i])?;
        trajectory.push((k, detector.statistic()));
        i += 1;
        if let Some(a) = alarm {
            if let Some(d) = day {
                day_alarms[d - 1] = true;
            }
            alarms.push(AlarmRecord {
                modality: stream.modality.clone(),
                day,
                index: a.time,
                statistic: a.statistic,
                arg_batch: a.batch,
                arg_lambda: a.lambda,
            });
            match (policy, day_length) {
                (ResetPolicy::AtAlarm, _) => detector.reset(k + 1),
                (ResetPolicy::AtDayBoundary, Some(l)) => i = i.div_ceil(l) * l,
                _ => break,
            }
        }
    }
    Ok(ModalityOutput {
        modality: stream.modality.clone(),
        baseline,
        threshold,
        samples_consumed: trajectory.len(),
        trajectory,
        alarms,
        day_alarms,
    })
}

/// Synthetic multi-day, multi-modality surrogate with an optional event.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenario {
    pub family: Family,
    pub partition: BatchPartition,
    pub day_length: usize,
    pub days: usize,
    pub training_days: usize,
    /// 1-based event day.
    pub event_day: Option<usize>,
    /// 1-based sample within the event day where the event starts.
    pub event_start: usize,
    pub modalities: Vec<SyntheticModality>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticModality {
    pub name: String,
    pub baseline: Vec<f64>,
    /// Factor applied to every parameter during the event.
    pub event_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// Event-free training streams (one per modality).
    pub training: Vec<CountStream>,
    /// Monitored streams, `days · day_length` samples each.
    pub streams: Vec<CountStream>,
}

impl SyntheticScenario {
    pub fn from_config(config: &RunConfig) -> Result<Self> {
        let sim = config
            .simulate
            .as_ref()
            .ok_or_else(|| Error::config("simulate", "section required"))?;
        let modalities = sim
            .modalities
            .iter()
            .map(|name| {
                Ok(SyntheticModality {
                    name: name.clone(),
                    baseline: sim
                        .truth
                        .get(name)
                        .ok_or_else(|| {
                            Error::config("simulate.truth", format!("no entry for `{name}`"))
                        })?
                        .clone(),
                    event_multiplier: match &sim.event_multiplier {
                        Some(m) => *m.get(name).ok_or_else(|| {
                            Error::config(
                                "simulate.event_multiplier",
                                format!("no entry for `{name}`"),
                            )
                        })?,
                        None => 1.0,
                    },
                })
            })
            .collect::<Result<_>>()?;
        Ok(SyntheticScenario {
            family: config.family()?,
            partition: config.partition()?,
            day_length: config.scenario.day_length.expect("validated"),
            days: sim.days,
            training_days: sim.training_days,
            event_day: sim.event_day,
            event_start: sim.event_start,
            modalities,
            seed: sim.seed,
        })
    }

    pub fn generate(&self) -> Result<SyntheticData> {
        let mut training = Vec::with_capacity(self.modalities.len());
        let mut streams = Vec::with_capacity(self.modalities.len());
        for (m, spec) in self.modalities.iter().enumerate() {
            if spec.baseline.len() != self.partition.num_batches() {
                return Err(Error::validation(format!(
                    "modality `{}` needs {} baseline values",
                    spec.name,
                    self.partition.num_batches()
                )));
            }
            let normal = spec
                .baseline
                .iter()
                .map(|&t| self.family.sampler(t))
                .collect::<Result<Vec<_>>>()?;
            let event = spec
                .baseline
                .iter()
                .map(|&t| self.family.sampler(t * spec.event_multiplier))
                .collect::<Result<Vec<_>>>()?;

            let mut rng = replication_rng(self.seed, 2 * m as u64);
            let train_len = self.training_days * self.day_length;
            let values = (1..=train_len as u64)
                .map(|k| normal[self.partition.batch_of(k)].draw(&mut rng))
                .collect();
            training.push(CountStream {
                modality: spec.name.clone(),
                sequence: ObservationSequence::new(values),
            });

            let mut rng = replication_rng(self.seed, 2 * m as u64 + 1);
            let len = self.days * self.day_length;
            let values = (0..len)
                .map(|i| {
                    let k = i as u64 + 1;
                    let day = i / self.day_length + 1;
                    let within = i % self.day_length + 1;
                    let in_event = self.event_day == Some(day) && within >= self.event_start;
                    let samplers = if in_event { &event } else { &normal };
                    samplers[self.partition.batch_of(k)].draw(&mut rng)
                })
                .collect();
            streams.push(CountStream {
                modality: spec.name.clone(),
                sequence: ObservationSequence::new(values),
            });
        }
        Ok(SyntheticData { training, streams })
    }
}
