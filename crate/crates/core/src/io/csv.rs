use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::GapPolicy;
use crate::error::{Error, Result};
use crate::model::ObservationSequence;

/// One labelled count stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountStream {
    pub modality: String,
    pub sequence: ObservationSequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    /// Reject (or round) non-integer values.
    pub require_counts: bool,
    pub round_counts: bool,
    pub fill_gaps: GapPolicy,
    /// Sampling interval used to map `timestamp` columns to indices.
    pub interval_seconds: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            require_counts: true,
            round_counts: false,
            fill_gaps: GapPolicy::Error,
            interval_seconds: 3.0,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum IndexColumn {
    Index,
    Timestamp,
}

fn csv_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Read an `index,value` or `timestamp,value` file into a sequence.
///
/// Timestamps are seconds; the first row becomes sample 1 and every later
/// row must sit a whole number of intervals after it.
pub fn ingest_csv(path: &Path, modality: &str, options: &IngestOptions) -> Result<CountStream> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| csv_err(path, 1, e.to_string()))?
        .clone();
    let column = match (headers.get(0), headers.get(1), headers.len()) {
        (Some("index"), Some("value"), 2) => IndexColumn::Index,
        (Some("timestamp"), Some("value"), 2) => IndexColumn::Timestamp,
        _ => {
            return Err(csv_err(
                path,
                1,
                format!(
                    "expected header `index,value` or `timestamp,value`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            ))
        }
    };

    let mut values: Vec<f64> = Vec::new();
    let mut start: Option<u64> = None;
    let mut t0: Option<f64> = None;
    let mut last: Option<u64> = None;
    let mut rounded = 0usize;
    for (row, record) in reader.records().enumerate() {
        let line = row as u64 + 2;
        let record = record.map_err(|e| csv_err(path, line, e.to_string()))?;
        if record.len() != 2 {
            return Err(csv_err(
                path,
                line,
                format!("expected 2 fields, got {}", record.len()),
            ));
        }
        let index = match column {
            IndexColumn::Index => record[0]
                .parse::<u64>()
                .ok()
                .filter(|&i| i >= 1)
                .ok_or_else(|| {
                    csv_err(
                        path,
                        line,
                        format!("index `{}` is not a positive integer", &record[0]),
                    )
                })?,
            IndexColumn::Timestamp => {
                let t: f64 = record[0]
                    .parse()
                    .ok()
                    .filter(|t: &f64| t.is_finite())
                    .ok_or_else(|| {
                        csv_err(
                            path,
                            line,
                            format!("timestamp `{}` is not a number", &record[0]),
                        )
                    })?;
                let base = *t0.get_or_insert(t);
                let steps = (t - base) / options.interval_seconds;
                if steps < 0.0 || (steps - steps.round()).abs() > 1e-9 {
                    return Err(csv_err(
                        path,
                        line,
                        format!(
                            "timestamp {t} is not a whole number of {}-second intervals after {base}",
                            options.interval_seconds
                        ),
                    ));
                }
                steps.round() as u64 + 1
            }
        };
        let mut value: f64 = record[1]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| {
                csv_err(
                    path,
                    line,
                    format!("value `{}` is not a number", &record[1]),
                )
            })?;
        if options.require_counts && value < 0.0 {
            return Err(csv_err(path, line, format!("negative count {value}")));
        }
        if options.require_counts && value.fract() != 0.0 {
            if options.round_counts {
                value = value.round();
                rounded += 1;
            } else {
                return Err(csv_err(
                    path,
                    line,
                    format!("non-integer count {value} (use round_counts to round)"),
                ));
            }
        }
        match last {
            Some(prev) if index == prev => {
                return Err(csv_err(path, line, format!("duplicate index {index}")))
            }
            Some(prev) if index < prev => {
                return Err(csv_err(
                    path,
                    line,
                    format!("index {index} is not increasing (previous {prev})"),
                ))
            }
            Some(prev) if index > prev + 1 => {
                let missing = index - prev - 1;
                let fill = match options.fill_gaps {
                    GapPolicy::Error => {
                        return Err(csv_err(
                            path,
                            line,
                            format!("gap of {missing} samples before index {index}"),
                        ))
                    }
                    GapPolicy::Zero => 0.0,
                    GapPolicy::Hold => *values.last().expect("previous row exists"),
                };
                log::warn!(
                    "{}: filled {missing} missing samples before index {index} with {fill}",
                    path.display()
                );
                values.extend(std::iter::repeat_n(fill, missing as usize));
            }
            _ => {}
        }
        start.get_or_insert(index);
        last = Some(index);
        values.push(value);
    }
    if rounded > 0 {
        log::warn!("{}: rounded {rounded} non-integer counts", path.display());
    }
    Ok(CountStream {
        modality: modality.to_string(),
        sequence: ObservationSequence::with_start(values, start.unwrap_or(1)),
    })
}

/// Decimal rendering with 15 significant digits, trailing zeros trimmed.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.14e}", x);
    let exp: i32 = sci[sci.find('e').expect("scientific") + 1..]
        .parse()
        .expect("exponent");
    let body = if (-5..15).contains(&exp) {
        format!("{:.*}", (14 - exp).max(0) as usize, x)
    } else {
        let (mantissa, _) = sci.split_at(sci.find('e').expect("scientific"));
        return format!("{}e{}", trim_zeros(mantissa), exp);
    };
    trim_zeros(&body).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Write `index,value` rows for a sequence.
pub fn write_counts_csv(path: &Path, seq: &ObservationSequence) -> Result<()> {
    let mut out = String::with_capacity(seq.len() * 8 + 12);
    out.push_str("index,value\n");
    for (k, y) in seq.indexed() {
        out.push_str(&k.to_string());
        out.push(',');
        out.push_str(&format_sig(y));
        out.push('\n');
    }
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Means of every length-`window` run of consecutive values.
///
/// For plotting only; detectors consume raw counts.
pub fn sliding_average(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::validation("sliding window must be at least 1"));
    }
    if window > values.len() {
        log::warn!(
            "sliding window {window} exceeds the {} available samples",
            values.len()
        );
        return Ok(Vec::new());
    }
    let w = window as f64;
    let mut sum: f64 = values[..window].iter().sum();
    let mut out = Vec::with_capacity(values.len() - window + 1);
    out.push(sum / w);
    for j in window..values.len() {
        sum += values[j] - values[j - window];
        out.push(sum / w);
    }
    Ok(out)
}
