mod args;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::Parser;
use cyclo_qcd::eval::{
    calibrate_threshold_mc, efficiency_report, CalibrationConfig, CalibrationMethod,
    EfficiencyConfig,
};
use cyclo_qcd::io::{
    emit_report, fit_baselines, ingest_csv, ingest_options, read_baseline_document, run_scenario,
    run_scenario_with_baselines, sliding_average, write_counts_csv, BaselineDocument, CountStream,
    PerModality, Report, RunConfig, ScenarioOutput, SyntheticScenario,
};
use cyclo_qcd::{AnyDetector, ChangeSpec, IpidModel, ObservationSequence, PostChangeGrid};
use serde::Serialize;
use serde_json::json;

use args::*;

const ALARM: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(alarm) if alarm => ExitCode::from(ALARM),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Returns whether an alarm was raised.
fn run(command: Command) -> Result<bool> {
    match command {
        Command::Fit(a) => fit(a).map(|_| false),
        Command::Detect(a) => detect(a),
        Command::Simulate(a) => simulate(a),
        Command::Calibrate(a) => calibrate(a).map(|_| false),
        Command::Evaluate(a) => evaluate(a).map(|_| false),
        Command::Report(a) => report(a).map(|_| false),
    }
}

fn load_config(path: &Path, overrides: Option<&Overrides>) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut config =
        RunConfig::parse_unchecked(&text).with_context(|| format!("in {}", path.display()))?;
    if let Some(dir) = path.parent() {
        config.resolve_paths(dir);
    }
    if let Some(o) = overrides {
        o.apply(&mut config);
    }
    config
        .validate()
        .with_context(|| format!("in {}", path.display()))?;
    Ok(config)
}

/// `[NAME=]PATH`; the file stem names the modality by default.
fn named_path(arg: &str) -> Result<(String, PathBuf)> {
    if let Some((name, path)) = arg.split_once('=') {
        if name.is_empty() {
            bail!("empty modality name in `{arg}`");
        }
        return Ok((name.to_string(), PathBuf::from(path)));
    }
    let path = PathBuf::from(arg);
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| anyhow!("cannot name a modality after `{arg}`"))?;
    Ok((stem.to_string(), path))
}

fn read_streams(config: &RunConfig, args: &[String]) -> Result<Vec<CountStream>> {
    let options = ingest_options(config)?;
    let mut streams: Vec<CountStream> = Vec::with_capacity(args.len());
    for arg in args {
        let (name, path) = named_path(arg)?;
        if streams.iter().any(|s| s.modality == name) {
            bail!("modality `{name}` given twice");
        }
        streams.push(ingest_csv(&path, &name, &options)?);
    }
    Ok(streams)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn write_baselines(doc: &BaselineDocument, out: Option<&Path>) -> Result<()> {
    let text = to_json(doc)?;
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit(report: &Report, output: &Output) -> Result<()> {
    match &output.out {
        Some(dir) => {
            for &f in &output.format {
                for path in emit_report(report, f.into(), dir)? {
                    log::info!("wrote {}", path.display());
                }
            }
        }
        None => {
            if output.format.contains(&FormatArg::Csv) {
                bail!("csv output needs --out");
            }
            print!("{}", report.to_json()?);
        }
    }
    Ok(())
}

fn summarize(out: &ScenarioOutput) {
    for m in &out.modalities {
        eprintln!(
            "{}: {} samples, {} alarm(s){}",
            m.modality,
            m.samples_consumed,
            m.alarms.len(),
            m.alarms
                .iter()
                .map(|a| format!(" n={}", a.index))
                .collect::<String>()
        );
    }
}

fn fit(a: FitArgs) -> Result<()> {
    let config = load_config(&a.config, None)?;
    let training = if a.train.is_empty() {
        match &config.model.fit_from {
            Some(PerModality::ByModality(map)) => {
                let options = ingest_options(&config)?;
                let mut streams = Vec::new();
                for (name, paths) in map {
                    for p in paths {
                        streams.push(ingest_csv(p, name, &options)?);
                    }
                }
                streams
            }
            _ => bail!("give --train files or per-modality model.fit_from"),
        }
    } else {
        let options = ingest_options(&config)?;
        a.train
            .iter()
            .map(|arg| {
                let (name, path) = named_path(arg)?;
                Ok(ingest_csv(&path, &name, &options)?)
            })
            .collect::<Result<Vec<_>>>()?
    };
    let doc = fit_baselines(&config, &training)?;
    write_baselines(&doc, a.out.as_deref())
}

fn detect(a: DetectArgs) -> Result<bool> {
    let config = load_config(&a.config, Some(&a.overrides))?;
    let streams = read_streams(&config, &a.stream)?;
    let out = match &a.baseline {
        Some(path) => {
            run_scenario_with_baselines(&config, &streams, &read_baseline_document(path)?)?
        }
        None => run_scenario(&config, &streams)?,
    };
    summarize(&out);
    if let (Some(window), Some(dir)) = (a.smooth, &a.output.out) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for s in &streams {
            let means = sliding_average(&s.sequence.values, window)?;
            let smoothed = ObservationSequence::with_start(means, s.sequence.start_index);
            write_counts_csv(&dir.join(format!("smoothed_{}.csv", s.modality)), &smoothed)?;
        }
    }
    let alarm = out.any_alarm();
    emit(&Report::Scenario(out), &a.output)?;
    Ok(alarm)
}

fn simulate(a: SimulateArgs) -> Result<bool> {
    let mut config = load_config(&a.config, Some(&a.overrides))?;
    if let (Some(seed), Some(sim)) = (a.seed, config.simulate.as_mut()) {
        sim.seed = seed;
    }
    let data = SyntheticScenario::from_config(&config)?.generate()?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for s in &data.training {
        write_counts_csv(
            &a.out.join(format!("train_{}.csv", s.modality)),
            &s.sequence,
        )?;
    }
    for s in &data.streams {
        write_counts_csv(&a.out.join(format!("{}.csv", s.modality)), &s.sequence)?;
    }
    let out = if config.baseline_source()?.is_some() {
        run_scenario(&config, &data.streams)?
    } else {
        let baselines = fit_baselines(&config, &data.training)?;
        write_baselines(&baselines, Some(&a.out.join("baseline.json")))?;
        run_scenario_with_baselines(&config, &data.streams, &baselines)?
    };
    summarize(&out);
    let alarm = out.any_alarm();
    emit(
        &Report::Scenario(out),
        &Output {
            out: Some(a.out),
            format: a.format,
        },
    )?;
    Ok(alarm)
}

/// Model and grid of one modality, from a config plus an optional document.
fn chosen_model(choice: &ModelChoice) -> Result<(RunConfig, IpidModel, PostChangeGrid)> {
    let path = choice
        .config
        .as_ref()
        .ok_or_else(|| anyhow!("--config is required here"))?;
    let config = load_config(path, None)?;
    let name = &choice.modality;
    let baseline = match &choice.baseline {
        Some(p) => read_baseline_document(p)?
            .remove(name)
            .ok_or_else(|| anyhow!("{} has no modality `{name}`", p.display()))?,
        None => match &config.model.baseline {
            Some(b) => b
                .get(name)
                .cloned()
                .ok_or_else(|| anyhow!("model.baseline has no modality `{name}`"))?,
            None => bail!("give --baseline or an explicit model.baseline"),
        },
    };
    let model = config.model_with(baseline)?;
    let grid = config.grid_for(name, &model)?;
    Ok((config, model, grid))
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let (method, threshold) = match a.method {
        MethodArg::LogBeta => {
            let cfg = CalibrationConfig::log_beta(a.beta);
            cfg.validate()?;
            (cfg.method, a.beta.ln())
        }
        MethodArg::Mc => {
            let (config, model, grid) = chosen_model(&a.model)?;
            let kind = a.kind.map(Into::into).unwrap_or(config.detector.kind);
            let horizon = a.horizon.unwrap_or((50.0 * a.beta).ceil() as u64);
            let cfg = CalibrationConfig {
                beta: a.beta,
                method: CalibrationMethod::MonteCarloBisection {
                    reps: a.reps,
                    horizon,
                    tolerance: a.tolerance,
                    seed: a.seed,
                },
            };
            let template =
                AnyDetector::build(kind, &model, &grid, a.beta.ln(), config.all_batch_options())?;
            let threshold = calibrate_threshold_mc(&template, &cfg)?;
            (cfg.method, threshold)
        }
    };
    print!(
        "{}",
        to_json(&json!({ "beta": a.beta, "calibration": method, "threshold": threshold }))?
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let (config, model, grid) = chosen_model(&a.model)?;
    let kind = a.kind.map(Into::into).unwrap_or(config.detector.kind);
    let change = match a.change {
        ChangeArg::Single => {
            if a.batch >= model.num_batches() {
                bail!(
                    "batch {} out of range (model has {})",
                    a.batch,
                    model.num_batches()
                );
            }
            ChangeSpec::SingleBatch {
                gamma: a.gamma,
                batch: a.batch,
                lambda: a.multiplier * model.theta(a.batch),
            }
        }
        ChangeArg::All => ChangeSpec::AllBatch {
            gamma: a.gamma,
            lambdas: model.baseline().iter().map(|t| a.multiplier * t).collect(),
        },
    };
    let cfg = EfficiencyConfig {
        betas: a.betas,
        mtfa_reps: a.mtfa_reps,
        delay_reps: a.delay_reps,
        horizon_factor: a.horizon_factor,
        delay_horizon: a.delay_horizon,
        seed: a.seed,
    };
    let r = efficiency_report(
        &model,
        &grid,
        kind,
        config.all_batch_options(),
        &change,
        &cfg,
    )?;
    eprintln!(
        "slope {:.4} vs theory {:.4}: {}",
        r.slope_fit,
        r.theory_slope,
        if r.pass { "PASS" } else { "FAIL" }
    );
    emit(&Report::Efficiency(r), &a.output)
}

fn report(a: ReportArgs) -> Result<()> {
    let r = Report::read(&a.input)?;
    emit(&r, &a.output)
}
