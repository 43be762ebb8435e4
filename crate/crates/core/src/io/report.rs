use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::csv::format_sig;
use super::scenario::ScenarioOutput;
use crate::error::{Error, Result};
use crate::eval::EfficiencyReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Any document the CLI emits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
#[allow(clippy::large_enum_variant)]
pub enum Report {
    Scenario(ScenarioOutput),
    Efficiency(EfficiencyReport),
}

impl Report {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn write(path: PathBuf, body: &str) -> Result<PathBuf> {
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn opt<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map(T::to_string).unwrap_or_default()
}

fn lambda_cell(lambda: &[f64]) -> String {
    lambda
        .iter()
        .map(|&l| format_sig(l))
        .collect::<Vec<_>>()
        .join(";")
}

/// Write `report` into `dir` and return the files written.
///
/// JSON goes to `report.json`. CSV for a scenario is one
/// `trajectory_<modality>.csv` (`n,W`) per modality plus `alarms.csv`;
/// for an efficiency report it is `efficiency.csv`, one row per budget.
pub fn emit_report(report: &Report, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match (format, report) {
        (ReportFormat::Json, _) => Ok(vec![write(dir.join("report.json"), &report.to_json()?)?]),
        (ReportFormat::Csv, Report::Scenario(out)) => {
            let mut files = Vec::with_capacity(out.modalities.len() + 1);
            for m in &out.modalities {
                let mut body = String::with_capacity(m.trajectory.len() * 24 + 4);
                body.push_str("n,W\n");
                for &(n, w) in &m.trajectory {
                    body.push_str(&n.to_string());
                    body.push(',');
                    body.push_str(&format_sig(w));
                    body.push('\n');
                }
                files.push(write(
                    dir.join(format!("trajectory_{}.csv", m.modality)),
                    &body,
                )?);
            }
            let mut body = String::from("modality,day,n,W,arg_batch,arg_lambda\n");
            for a in out.alarms() {
                body.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    a.modality,
                    opt(&a.day),
                    a.index,
                    format_sig(a.statistic),
                    opt(&a.arg_batch),
                    lambda_cell(&a.arg_lambda)
                ));
            }
            files.push(write(dir.join("alarms.csv"), &body)?);
            Ok(files)
        }
        (ReportFormat::Csv, Report::Efficiency(r)) => {
            let mut body = String::from(
                "beta,threshold,mtfa,mtfa_stderr,mtfa_censored,delay,delay_stderr,delay_censored\n",
            );
            for i in 0..r.betas.len() {
                let (m, d) = (&r.mtfa[i], &r.delay[i]);
                body.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    format_sig(r.betas[i]),
                    format_sig(r.thresholds[i]),
                    format_sig(m.mean),
                    format_sig(m.stderr),
                    m.censored,
                    format_sig(d.mean),
                    format_sig(d.stderr),
                    d.censored
                ));
            }
            Ok(vec![write(dir.join("efficiency.csv"), &body)?])
        }
    }
}
