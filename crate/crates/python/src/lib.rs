//! Python bindings. Structured results (detection results, run-length
//! estimates, scenario outputs) are returned as plain dicts.

use std::collections::BTreeMap;

use cyclo_qcd::eval::{calibrate_threshold, estimate_delay, estimate_mtfa, CalibrationConfig};
use cyclo_qcd::io::{run_scenario, run_scenario_with_baselines, CountStream, RunConfig};
use cyclo_qcd::{
    detect::AllBatchOptions, AnyDetector, BatchPartition, ChangeSpec, Detector, DetectorKind,
    Family, IpidModel, ObservationSequence, PostChangeGrid,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn family_of(name: &str, sigma: Option<f64>) -> PyResult<Family> {
    match (name, sigma) {
        ("poisson", None) => Ok(Family::Poisson),
        ("gaussian", Some(s)) => Family::gaussian(s).map_err(err),
        ("gaussian", None) => Err(err("the gaussian family needs sigma")),
        ("poisson", Some(_)) => Err(err("sigma only applies to the gaussian family")),
        (other, _) => Err(err(format!("unknown family `{other}`"))),
    }
}

fn kind(name: &str) -> PyResult<DetectorKind> {
    match name {
        "single" => Ok(DetectorKind::Single),
        "all" => Ok(DetectorKind::All),
        other => Err(err(format!("unknown detector kind `{other}`"))),
    }
}

/// Periodic model: family, period, batch boundaries and per-batch baseline.
#[pyclass(name = "Model", module = "cyclo_qcd_py", frozen)]
pub struct PyModel {
    inner: IpidModel,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (family, period, boundaries, baseline, sigma=None))]
    fn new(
        family: &str,
        period: usize,
        boundaries: Vec<usize>,
        baseline: Vec<f64>,
        sigma: Option<f64>,
    ) -> PyResult<Self> {
        let partition = BatchPartition::new(period, boundaries).map_err(err)?;
        let inner = IpidModel::new(family_of(family, sigma)?, partition, baseline).map_err(err)?;
        Ok(PyModel { inner })
    }

    #[getter]
    fn period(&self) -> usize {
        self.inner.period()
    }

    #[getter]
    fn baseline(&self) -> Vec<f64> {
        self.inner.baseline().to_vec()
    }

    #[getter]
    fn boundaries(&self) -> Vec<usize> {
        self.inner.partition().boundaries().to_vec()
    }

    /// 0-based batch of global sample index `k` (1-based).
    fn batch_of(&self, k: u64) -> PyResult<usize> {
        if k == 0 {
            return Err(err("sample indices start at 1"));
        }
        Ok(self.inner.partition().batch_of(k))
    }

    fn theta_at(&self, k: u64) -> PyResult<f64> {
        if k == 0 {
            return Err(err("sample indices start at 1"));
        }
        Ok(self.inner.theta_at(k))
    }

    /// Draw `n` samples from index 1. With `batch` and `lam` a single batch
    /// changes; with `lambdas` every batch does; otherwise no change.
    #[pyo3(signature = (n, seed, gamma=1, batch=None, lam=None, lambdas=None))]
    fn sample(
        &self,
        n: usize,
        seed: u64,
        gamma: u64,
        batch: Option<usize>,
        lam: Option<f64>,
        lambdas: Option<Vec<f64>>,
    ) -> PyResult<Vec<f64>> {
        let change = change_spec(gamma, batch, lam, lambdas)?;
        let seq = cyclo_qcd::sample(&self.inner, &change, n, seed).map_err(err)?;
        Ok(seq.values)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(family={:?}, period={}, boundaries={:?}, baseline={:?})",
            self.inner.family().name(),
            self.inner.period(),
            self.inner.partition().boundaries(),
            self.inner.baseline()
        )
    }
}

fn change_spec(
    gamma: u64,
    batch: Option<usize>,
    lam: Option<f64>,
    lambdas: Option<Vec<f64>>,
) -> PyResult<ChangeSpec> {
    match (batch, lam, lambdas) {
        (None, None, None) => Ok(ChangeSpec::NoChange),
        (Some(batch), Some(lambda), None) => Ok(ChangeSpec::SingleBatch {
            gamma,
            batch,
            lambda,
        }),
        (None, None, Some(lambdas)) => Ok(ChangeSpec::AllBatch { gamma, lambdas }),
        _ => Err(err("give batch and lam, or lambdas, or neither")),
    }
}

/// Single-batch (`kind="single"`) or all-batch (`kind="all"`) detector.
#[pyclass(name = "Detector", module = "cyclo_qcd_py")]
pub struct PyDetector {
    inner: AnyDetector,
}

#[pymethods]
impl PyDetector {
    #[new]
    #[pyo3(signature = (model, grid, threshold, kind="single", epsilon=1e-3, window=None, product_cap=4096))]
    fn new(
        model: &PyModel,
        grid: Vec<Vec<f64>>,
        threshold: f64,
        kind: &str,
        epsilon: f64,
        window: Option<usize>,
        product_cap: usize,
    ) -> PyResult<Self> {
        let grid = PostChangeGrid::new(&model.inner, grid, epsilon).map_err(err)?;
        let options = AllBatchOptions {
            product_cap,
            window,
            ..AllBatchOptions::default()
        };
        let inner = AnyDetector::build(self::kind(kind)?, &model.inner, &grid, threshold, options)
            .map_err(err)?;
        Ok(PyDetector { inner })
    }

    #[getter]
    fn statistic(&self) -> f64 {
        self.inner.statistic()
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.threshold()
    }

    /// Index the next observation will get.
    #[getter]
    fn clock(&self) -> u64 {
        self.inner.clock()
    }

    #[pyo3(signature = (start=1))]
    fn reset(&mut self, start: u64) -> PyResult<()> {
        if start == 0 {
            return Err(err("sample indices start at 1"));
        }
        self.inner.reset(start);
        Ok(())
    }

    /// Feed one observation; returns the alarm time if it fired.
    fn step(&mut self, y: f64) -> PyResult<Option<u64>> {
        Ok(self.inner.step(y).map_err(err)?.map(|a| a.time))
    }

    /// Reset to `start` and run over `values`; returns a result dict.
    #[pyo3(signature = (values, start=1, record=false))]
    fn detect(
        &mut self,
        py: Python<'_>,
        values: Vec<f64>,
        start: u64,
        record: bool,
    ) -> PyResult<Py<PyAny>> {
        if start == 0 {
            return Err(err("sample indices start at 1"));
        }
        let seq = ObservationSequence::with_start(values, start);
        let result = self.inner.detect(&seq, record).map_err(err)?;
        to_py(py, &result)
    }

    /// Monte Carlo mean time to false alarm at `threshold`.
    #[pyo3(signature = (threshold, reps, horizon, seed=0))]
    fn estimate_mtfa(
        &self,
        py: Python<'_>,
        threshold: f64,
        reps: usize,
        horizon: u64,
        seed: u64,
    ) -> PyResult<Py<PyAny>> {
        let est = py
            .detach(|| estimate_mtfa(&self.inner, threshold, reps, horizon, seed))
            .map_err(err)?;
        to_py(py, &est)
    }

    /// Monte Carlo mean delay for a change (arguments as in `Model.sample`).
    #[pyo3(signature = (threshold, reps, horizon, seed=0, gamma=1, batch=None, lam=None, lambdas=None))]
    #[allow(clippy::too_many_arguments)]
    fn estimate_delay(
        &self,
        py: Python<'_>,
        threshold: f64,
        reps: usize,
        horizon: u64,
        seed: u64,
        gamma: u64,
        batch: Option<usize>,
        lam: Option<f64>,
        lambdas: Option<Vec<f64>>,
    ) -> PyResult<Py<PyAny>> {
        let change = change_spec(gamma, batch, lam, lambdas)?;
        let est = py
            .detach(|| estimate_delay(&self.inner, &change, threshold, reps, horizon, seed))
            .map_err(err)?;
        to_py(py, &est)
    }
}

/// Per-batch MLE pooled over several training sequences (each from index 1).
#[pyfunction]
#[pyo3(signature = (family, period, boundaries, sequences, sigma=None))]
fn fit(
    family: &str,
    period: usize,
    boundaries: Vec<usize>,
    sequences: Vec<Vec<f64>>,
    sigma: Option<f64>,
) -> PyResult<Vec<f64>> {
    let partition = BatchPartition::new(period, boundaries).map_err(err)?;
    let seqs: Vec<ObservationSequence> = sequences
        .into_iter()
        .map(ObservationSequence::new)
        .collect();
    cyclo_qcd::mle_fit(family_of(family, sigma)?, &partition, &seqs).map_err(err)
}

/// `A = ln β`.
#[pyfunction]
fn calibrate(beta: f64) -> PyResult<f64> {
    calibrate_threshold(&CalibrationConfig::log_beta(beta)).map_err(err)
}

/// Run a TOML-configured scenario over `{modality: values}` streams.
#[pyfunction]
#[pyo3(signature = (config, streams, baselines=None))]
fn scenario(
    py: Python<'_>,
    config: &str,
    streams: BTreeMap<String, Vec<f64>>,
    baselines: Option<BTreeMap<String, Vec<f64>>>,
) -> PyResult<Py<PyAny>> {
    let config = RunConfig::parse(config).map_err(err)?;
    let streams: Vec<CountStream> = streams
        .into_iter()
        .map(|(modality, values)| CountStream {
            modality,
            sequence: ObservationSequence::new(values),
        })
        .collect();
    let out = match baselines {
        Some(b) => run_scenario_with_baselines(&config, &streams, &b),
        None => run_scenario(&config, &streams),
    }
    .map_err(err)?;
    to_py(py, &out)
}

#[pymodule]
pub fn cyclo_qcd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyDetector>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(scenario, m)?)?;
    Ok(())
}
