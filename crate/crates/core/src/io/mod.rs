//! Configuration, CSV ingestion, multi-day scenarios and report output.

mod config;
mod csv;
mod report;
mod scenario;

pub use self::config::{
    BaselineSource, DetectorSection, FamilyKind, GapPolicy, GridSection, ModelSection, PerModality,
    ResetPolicy, RunConfig, ScenarioSection, SimulateSection,
};
pub use self::csv::{
    format_sig, ingest_csv, sliding_average, write_counts_csv, CountStream, IngestOptions,
};
pub use self::report::{emit_report, Report, ReportFormat};
pub use self::scenario::{
    fit_baselines, ingest_options, read_baseline_document, resolve_baselines, run_scenario,
    run_scenario_with_baselines, AlarmRecord, BaselineDocument, DayVerdict, ModalityOutput,
    ScenarioOutput, SyntheticData, SyntheticModality, SyntheticScenario,
};
