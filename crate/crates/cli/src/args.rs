use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cyclo_qcd::io::{GapPolicy, ReportFormat, ResetPolicy, RunConfig};
use cyclo_qcd::DetectorKind;

#[derive(Parser, Debug)]
#[command(
    name = "cyclo-qcd",
    version,
    about = "Quickest change detection on periodic count streams"
)]
#[command(after_help = "Exit status: 0 = ran, no alarm; 2 = ran, alarm raised; 1 = error.")]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit per-batch baselines from training CSVs.
    Fit(FitArgs),
    /// Run the detector over count streams.
    Detect(DetectArgs),
    /// Generate a synthetic scenario and run the detector on it.
    Simulate(SimulateArgs),
    /// Compute the threshold for a false-alarm budget.
    Calibrate(CalibrateArgs),
    /// Monte Carlo efficiency report across budgets.
    Evaluate(EvaluateArgs),
    /// Re-render a JSON report.
    Report(ReportArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum KindArg {
    Single,
    All,
}

impl From<KindArg> for DetectorKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Single => DetectorKind::Single,
            KindArg::All => DetectorKind::All,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum PolicyArg {
    Never,
    AtAlarm,
    AtDayBoundary,
}

impl From<PolicyArg> for ResetPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Never => ResetPolicy::Never,
            PolicyArg::AtAlarm => ResetPolicy::AtAlarm,
            PolicyArg::AtDayBoundary => ResetPolicy::AtDayBoundary,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

/// Command-line overrides of config fields.
#[derive(Args, Debug, Default)]
pub struct Overrides {
    /// Detector kind (`detector.kind`).
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Threshold A (`detector.threshold`); replaces any configured beta.
    #[arg(long, conflicts_with = "beta")]
    pub threshold: Option<f64>,
    /// False-alarm budget, A = ln beta (`detector.beta`).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Windowed fallback length (`detector.window`).
    #[arg(long)]
    pub window: Option<usize>,
    /// Largest exact product grid (`detector.product_cap`).
    #[arg(long)]
    pub product_cap: Option<usize>,
    /// Samples per day (`scenario.day_length`).
    #[arg(long)]
    pub day_length: Option<usize>,
    /// `scenario.reset_policy`.
    #[arg(long, value_enum)]
    pub reset_policy: Option<PolicyArg>,
    /// `grid.epsilon`.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Round non-integer Poisson counts instead of rejecting them.
    #[arg(long)]
    pub round_counts: bool,
    /// Missing-index policy (`scenario.fill_gaps`).
    #[arg(long, value_enum)]
    pub fill_gaps: Option<GapArg>,
    /// Sampling interval for `timestamp,value` files.
    #[arg(long)]
    pub interval_seconds: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum GapArg {
    Error,
    Zero,
    Hold,
}

impl From<GapArg> for GapPolicy {
    fn from(g: GapArg) -> Self {
        match g {
            GapArg::Error => GapPolicy::Error,
            GapArg::Zero => GapPolicy::Zero,
            GapArg::Hold => GapPolicy::Hold,
        }
    }
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) {
        let d = &mut config.detector;
        if let Some(k) = self.kind {
            d.kind = k.into();
        }
        if let Some(a) = self.threshold {
            d.threshold = Some(a);
            d.beta = None;
        }
        if let Some(b) = self.beta {
            d.beta = Some(b);
            d.threshold = None;
        }
        if let Some(w) = self.window {
            d.window = Some(w);
        }
        if let Some(c) = self.product_cap {
            d.product_cap = c;
        }
        if let Some(l) = self.day_length {
            config.scenario.day_length = Some(l);
        }
        if let Some(p) = self.reset_policy {
            config.scenario.reset_policy = p.into();
        }
        if let Some(e) = self.epsilon {
            config.grid.epsilon = e;
        }
        if self.round_counts {
            config.scenario.round_counts = true;
        }
        if let Some(g) = self.fill_gaps {
            config.scenario.fill_gaps = g.into();
        }
        if let Some(s) = self.interval_seconds {
            config.scenario.interval_seconds = Some(s);
        }
    }
}

#[derive(Args, Debug)]
pub struct Output {
    /// Output directory; JSON goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output formats (repeatable).
    #[arg(long, value_enum, default_value = "json")]
    pub format: Vec<FormatArg>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Training CSV as `[MODALITY=]PATH`; repeat to pool several files.
    #[arg(long)]
    pub train: Vec<String>,
    /// Write the baseline document here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Monitored CSV as `[MODALITY=]PATH`; the file stem names the modality
    /// when no name is given.
    #[arg(long, required = true)]
    pub stream: Vec<String>,
    /// Baseline document from `fit`; overrides the configured source.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Also write `smoothed_<modality>.csv`, the sliding-window mean of the
    /// raw counts over this many samples (for plotting only).
    #[arg(long, requires = "out")]
    pub smooth: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Seed of the synthetic streams (`simulate.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for generated CSVs, the fitted baselines and reports.
    #[arg(long)]
    pub out: PathBuf,
    /// Report formats (repeatable).
    #[arg(long, value_enum, default_value = "json")]
    pub format: Vec<FormatArg>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodArg {
    LogBeta,
    Mc,
}

/// Selects one modality's model from a config.
#[derive(Args, Debug)]
pub struct ModelChoice {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Modality whose baseline and grid to use.
    #[arg(long, default_value = "default")]
    pub modality: String,
    /// Baseline document from `fit`.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// False-alarm budget.
    #[arg(long)]
    pub beta: f64,
    #[arg(long, value_enum, default_value = "log-beta")]
    pub method: MethodArg,
    #[command(flatten)]
    pub model: ModelChoice,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Censoring horizon; defaults to 50·beta.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Accepted relative overshoot of the MTFA above beta.
    #[arg(long, default_value_t = 0.1)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChangeArg {
    Single,
    All,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub model: ModelChoice,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Simulated change: one batch or all batches.
    #[arg(long, value_enum, default_value = "single")]
    pub change: ChangeArg,
    /// Changed batch (0-based) for a single-batch change.
    #[arg(long, default_value_t = 0)]
    pub batch: usize,
    /// Post-change parameter as a multiple of the baseline.
    #[arg(long, default_value_t = 2.0)]
    pub multiplier: f64,
    #[arg(long, default_value_t = 1)]
    pub gamma: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [100.0, 1000.0, 10000.0])]
    pub betas: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub mtfa_reps: usize,
    #[arg(long, default_value_t = 1000)]
    pub delay_reps: usize,
    /// MTFA horizon as a multiple of beta.
    #[arg(long, default_value_t = 50.0)]
    pub horizon_factor: f64,
    #[arg(long, default_value_t = 100_000)]
    pub delay_horizon: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// JSON report written by `detect`, `simulate` or `evaluate`.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub output: Output,
}
