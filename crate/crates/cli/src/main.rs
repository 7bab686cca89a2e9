use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use drivesense_core::corpus::{self, TripSpec, TRAINING_SEED};
use drivesense_core::evaluation::{self, EVAL_SEED};
use drivesense_core::localize::{Pocket, Row, Side};
use drivesense_core::metrics::MetricsReport;
use drivesense_core::model_file::{parse_bundle, parse_scenario, serialize_bundle, serialize_scenario, ModelBundle};
use drivesense_core::pipeline::{run_pipeline, Models, PipelineConfig, Region};
use drivesense_core::scheduler::{
    detection_cycle_prob, expected_cost, plan_entry_sampling, simulate_duty_cycle, table_chain, BumpModel,
    DEFAULT_BUMP_RATE,
};
use drivesense_core::simulator::{generate, generate_keystrokes_from, IntervalMixture, Placement};
use drivesense_core::texting::{classify_texting, compute_stats, TextingClass};
use drivesense_core::trace_io::{parse_keystrokes, parse_trace, resample, serialize_keystrokes, serialize_trace, TraceFormat};
use drivesense_core::{Error, Trace};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "drivesense", version, about = "Driver and passenger detection from phone inertial sensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a sensor trace and optionally convert or resample it.
    Ingest(IngestArgs),
    /// Train activity and side models on the synthetic corpus.
    Train(TrainArgs),
    /// Run the streaming pipeline over a trace.
    Detect(DetectArgs),
    /// Generate a synthetic trace from a scenario.
    Simulate(SimulateArgs),
    /// Score the detectors on the synthetic corpora or on raw counts.
    Evaluate(EvaluateArgs),
    /// Bump detection odds, energy cost and the entry sampling plan.
    Schedule(ScheduleArgs),
    /// Classify a keystroke log as normal or distracted typing.
    Texting(TextingArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Report {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

impl From<Format> for TraceFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => TraceFormat::Csv,
            Format::Jsonl => TraceFormat::Jsonl,
        }
    }
}

#[derive(Args, Clone, Copy)]
struct WindowArgs {
    /// Classification window length in seconds.
    #[arg(long, default_value_t = 4.5)]
    window_s: f64,
    /// Window step in seconds.
    #[arg(long, default_value_t = 0.5)]
    step_s: f64,
    #[arg(long, default_value_t = Region::LeftHandDrive)]
    region: Region,
}

impl WindowArgs {
    fn config(&self) -> Result<PipelineConfig> {
        for (name, v) in [("--window-s", self.window_s), ("--step-s", self.step_s)] {
            if !(v.is_finite() && v > 0.0) {
                bail!(Error::InvalidParams(format!("{name} must be positive")));
            }
        }
        let config = PipelineConfig {
            window_ms: (self.window_s * 1000.0).round() as i64,
            step_ms: (self.step_s * 1000.0).round() as i64,
            region: self.region,
            ..PipelineConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Input format; inferred from the file extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Resample onto a uniform grid at this rate.
    #[arg(long)]
    resample_hz: Option<f64>,
    /// Write the normalized trace here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    out_format: Option<Format>,
    #[arg(long, value_enum, default_value_t = Report::Text)]
    report: Report,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = TRAINING_SEED)]
    seed: u64,
    /// Output model file.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long, value_enum, default_value_t = Report::Text)]
    report: Report,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    model: PathBuf,
    /// Keystroke log recorded alongside the trace.
    #[arg(long)]
    keystrokes: Option<PathBuf>,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long, value_enum, default_value_t = Report::Text)]
    report: Report,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TypingStyle {
    Normal,
    Distracted,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file; a built-in trip is used when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Entry side of the built-in trip.
    #[arg(long, value_enum, default_value_t = SideArg::Left)]
    side: SideArg,
    /// Seat row of the built-in trip.
    #[arg(long, value_enum, default_value_t = RowArg::Front)]
    seat: RowArg,
    /// Drive length of the built-in trip in seconds.
    #[arg(long, default_value_t = 60.0)]
    drive_s: f64,
    /// Trace output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Also write the scenario that was simulated.
    #[arg(long)]
    save_scenario: Option<PathBuf>,
    /// Also write a keystroke log for a typing session.
    #[arg(long)]
    keystrokes: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TypingStyle::Normal)]
    typing: TypingStyle,
    #[arg(long, default_value_t = 200)]
    letters: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RowArg {
    Front,
    Back,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    /// Driver/passenger verdicts over the trip corpus.
    Trips,
    /// Activity recognition and vehicle-entry filtering.
    Activity,
    /// Entry side.
    Side,
    /// Seat row from road bumps.
    Rows,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, value_enum, default_value_t = Suite::Trips)]
    suite: Suite,
    /// Score raw confusion counts given as tp,fp,fn,tn instead of running a suite.
    #[arg(long)]
    counts: Option<String>,
    /// Model file; models are trained from scratch when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = EVAL_SEED)]
    seed: u64,
    /// Drive length of each corpus trip in seconds.
    #[arg(long, default_value_t = 180.0)]
    drive_s: f64,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long, value_enum, default_value_t = Report::Text)]
    report: Report,
}

#[derive(Args)]
struct ScheduleArgs {
    /// Bump arrival rate per second.
    #[arg(long, default_value_t = DEFAULT_BUMP_RATE)]
    lambda: f64,
    /// Awake (sensing) time per cycle in seconds.
    #[arg(long, default_value_t = 10.0)]
    awake_s: f64,
    /// Sleep time per cycle in seconds.
    #[arg(long, default_value_t = 50.0)]
    sleep_s: f64,
    /// Energy per second of sensing.
    #[arg(long, default_value_t = 1.0)]
    cost: f64,
    /// Cycles listed in the cost table.
    #[arg(long, default_value_t = 5)]
    cycles: u32,
    /// Mean time to the habitual event, for the sampling plan.
    #[arg(long, default_value_t = 100.0)]
    mean_s: f64,
    #[arg(long, default_value_t = 20.0)]
    sigma_s: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Report::Text)]
    report: Report,
}

#[derive(Args)]
struct TextingArgs {
    #[arg(long)]
    keystrokes: PathBuf,
    #[arg(long, value_enum, default_value_t = Report::Text)]
    report: Report,
}

/// Failure to obtain a usable model.
#[derive(Debug)]
struct ModelError(String);

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ModelError {}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn infer_format(path: &Path, given: Option<Format>) -> TraceFormat {
    match given {
        Some(f) => f.into(),
        None if path.extension().is_some_and(|e| e == "jsonl") => TraceFormat::Jsonl,
        None => TraceFormat::Csv,
    }
}

fn load_trace(path: &Path, format: Option<Format>) -> Result<Trace> {
    let bytes = read(path)?;
    parse_trace(&bytes, infer_format(path, format)).with_context(|| format!("invalid trace {}", path.display()))
}

fn load_models(path: &Path) -> Result<Models> {
    let bytes = fs::read(path).map_err(|e| ModelError(format!("cannot read model {}: {e}", path.display())))?;
    let bundle = parse_bundle(&bytes).map_err(|e| ModelError(format!("invalid model {}: {e}", path.display())))?;
    let missing = |what: &str| ModelError(format!("model {} has no {what} section", path.display()));
    Ok(Models {
        activity: bundle.activity.ok_or_else(|| missing("activity"))?,
        side: bundle.side.ok_or_else(|| missing("side"))?,
    })
}

fn pct(v: f64) -> String {
    if v.is_nan() {
        "n/a".to_string()
    } else {
        format!("{:.2}%", 100.0 * v)
    }
}

fn emit(report: Report, text: String, value: Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match report {
        Report::Text => out.write_all(text.as_bytes())?,
        Report::Json => writeln!(out, "{}", serde_json::to_string_pretty(&value)?)?,
    }
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let mut trace = load_trace(&a.trace, a.format)?;
    if let Some(hz) = a.resample_hz {
        trace = resample(&trace, hz)?;
    }
    if let Some(out) = &a.out {
        let format = a.out_format.map(TraceFormat::from).unwrap_or_else(|| infer_format(out, None));
        write(out, &serialize_trace(&trace, format))?;
    }
    let first = trace.samples.first().map_or(0, |s| s.t_ms);
    let last = trace.samples.last().map_or(0, |s| s.t_ms);
    let duration_s = (last - first) as f64 / 1000.0;
    let text = format!(
        "samples {}\nspan    {first}..{last} ms ({duration_s:.2} s)\nrate    {} Hz\nlabels  {}\n",
        trace.samples.len(),
        trace.nominal_rate_hz,
        trace.labels.len()
    );
    let value = json!({
        "samples": trace.samples.len(),
        "start_ms": first,
        "end_ms": last,
        "duration_s": duration_s,
        "rate_hz": trace.nominal_rate_hz,
        "labels": trace.labels.len(),
    });
    emit(a.report, text, value)
}

fn train(a: TrainArgs) -> Result<()> {
    let config = a.window.config()?;
    let models = corpus::train_models(a.seed, &config)?;
    let bundle = ModelBundle {
        activity: Some(models.activity.clone()),
        side: Some(models.side.clone()),
        transitions: Some(table_chain()),
    };
    write(&a.model, &serialize_bundle(&bundle))?;
    let classes = |counts: Vec<(String, u64)>| counts.into_iter().map(|(l, n)| format!("{l}:{n}")).collect::<Vec<_>>().join(" ");
    let activity: Vec<(String, u64)> = models.activity.classes.iter().map(|c| (c.label.to_string(), c.count)).collect();
    let side: Vec<(String, u64)> = models.side.classes.iter().map(|c| (c.label.to_string(), c.count)).collect();
    let text = format!(
        "wrote {}\nactivity {}\nside     {}\n",
        a.model.display(),
        classes(activity.clone()),
        classes(side.clone())
    );
    let value = json!({
        "model": a.model.display().to_string(),
        "seed": a.seed,
        "activity": activity.into_iter().map(|(l, n)| (l, json!(n))).collect::<serde_json::Map<_, _>>(),
        "side": side.into_iter().map(|(l, n)| (l, json!(n))).collect::<serde_json::Map<_, _>>(),
    });
    emit(a.report, text, value)
}

fn detect(a: DetectArgs) -> Result<()> {
    let config = a.window.config()?;
    let models = load_models(&a.model)?;
    let trace = load_trace(&a.trace, a.format)?;
    let keystrokes = match &a.keystrokes {
        Some(p) => Some(parse_keystrokes(&read(p)?).with_context(|| format!("invalid keystroke log {}", p.display()))?),
        None => None,
    };
    let out = run_pipeline(&trace, keystrokes.as_ref(), &models, &config)?;
    let mut text = String::new();
    for e in &out.events {
        text.push_str(&e.to_json());
        text.push('\n');
    }
    let v = out.verdict;
    text.push_str(&format!(
        "role {:?} distracted {} confidence {:.3} latency {}\n",
        v.role,
        v.distracted,
        v.confidence,
        v.latency_ms.map_or("n/a".to_string(), |l| format!("{l} ms"))
    ));
    let value = json!({
        "verdict": serde_json::to_value(v)?,
        "evidence": serde_json::to_value(&out.evidence)?,
        "events": serde_json::to_value(&out.events)?,
        "max_buffered": out.max_buffered,
    });
    emit(a.report, text, value)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut scenario = match &a.scenario {
        Some(p) => parse_scenario(&read(p)?).with_context(|| format!("invalid scenario {}", p.display()))?,
        None => {
            let spec = TripSpec {
                side: match a.side {
                    SideArg::Left => Side::Left,
                    SideArg::Right => Side::Right,
                },
                seat: match a.seat {
                    RowArg::Front => Row::Front,
                    RowArg::Back => Row::Back,
                },
                pocket: Pocket::RightPocket,
                placement: if a.seat == RowArg::Front { Placement::Pocket } else { Placement::BackSeat },
                drive_s: a.drive_s,
                bump_rate: DEFAULT_BUMP_RATE,
            };
            corpus::trip_scenario(&spec, a.seed.unwrap_or(1))
        }
    };
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    scenario.validate()?;
    let (trace, truth) = generate(&scenario)?;
    let bytes = serialize_trace(&trace, a.format.into());
    match &a.out {
        Some(p) => write(p, &bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    if let Some(p) = &a.save_scenario {
        write(p, &serialize_scenario(&scenario))?;
    }
    if let Some(p) = &a.keystrokes {
        let class = match a.typing {
            TypingStyle::Normal => TextingClass::Normal,
            TypingStyle::Distracted => TextingClass::Distracted,
        };
        // Typing starts once the vehicle moves.
        let t0 = truth.motion_start_ms.unwrap_or(0);
        let log = generate_keystrokes_from(&IntervalMixture::for_class(class), a.letters, scenario.seed, t0);
        write(p, &serialize_keystrokes(&log))?;
    }
    Ok(())
}

fn parse_counts(s: &str) -> Result<(u64, u64, u64, u64)> {
    let parts: Vec<u64> = s
        .split(',')
        .map(|p| p.trim().parse::<u64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| anyhow!(Error::InvalidParams(format!("--counts: {e}"))))?;
    match parts[..] {
        [tp, fp, fn_, tn] => Ok((tp, fp, fn_, tn)),
        _ => bail!(Error::InvalidParams("--counts expects tp,fp,fn,tn".into())),
    }
}

fn metrics_value(m: &MetricsReport, latency_ms: Option<i64>) -> Value {
    json!({
        "tp": m.tp,
        "fp": m.fp,
        "tn": m.tn,
        "fn": m.fn_,
        "precision": m.precision,
        "sensitivity": m.sensitivity,
        "specificity": m.specificity,
        "accuracy": m.accuracy,
        "latency_ms": latency_ms,
    })
}

fn evaluation_models(a: &EvaluateArgs, config: &PipelineConfig) -> Result<Models> {
    match &a.model {
        Some(p) => load_models(p),
        None => Ok(corpus::train_models(TRAINING_SEED, config)?),
    }
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    if let Some(counts) = &a.counts {
        let (tp, fp, fn_, tn) = parse_counts(counts)?;
        let m = MetricsReport::from_counts(tp, fp, fn_, tn)?;
        return emit(a.report, m.text(), metrics_value(&m, None));
    }
    let config = a.window.config()?;
    if !(a.drive_s.is_finite() && a.drive_s > 0.0) {
        bail!(Error::InvalidParams("--drive-s must be positive".into()));
    }
    let models = evaluation_models(&a, &config)?;
    match a.suite {
        Suite::Trips => {
            let e = evaluation::evaluate_end_to_end(&models, a.seed.wrapping_add(3), a.drive_s, &config)?;
            let mut text = e.metrics.text();
            text.push_str(&format!(
                "trips       {}\nmax latency {}\n",
                e.trips.len(),
                e.max_latency_ms.map_or("n/a".to_string(), |l| format!("{l} ms"))
            ));
            emit(a.report, text, metrics_value(&e.metrics, e.max_latency_ms))
        }
        Suite::Activity => {
            let cases = evaluation::activity_cases(a.seed, &config)?;
            let e = evaluation::evaluate_activity(&models.activity, &cases, &config)?;
            let text = format!(
                "accuracy {} ({}/{})\nentry true positives  raw {} confirmed {} of {}\nentry false positives raw {} confirmed {}\n",
                pct(e.accuracy),
                e.correct,
                e.total,
                e.ev_tp_raw,
                e.ev_tp_confirmed,
                e.entries,
                e.ev_fp_raw,
                e.ev_fp_confirmed
            );
            emit(a.report, text, serde_json::to_value(&e)?)
        }
        Suite::Side => {
            let examples = corpus::side_set(a.seed.wrapping_add(1), 10, false, &config)?;
            let e = evaluation::evaluate_side(&models.side, &examples)?;
            let text = format!(
                "accuracy {} ({}/{})\nleft precision {}\npocket {}/{}\n",
                pct(e.accuracy),
                e.correct,
                e.total,
                pct(e.left_precision),
                e.pocket_correct,
                e.total
            );
            emit(a.report, text, serde_json::to_value(&e)?)
        }
        Suite::Rows => {
            let e = evaluation::evaluate_bump_rows(a.seed.wrapping_add(2), 20, 0.1, a.drive_s.min(120.0), &config)?;
            let [[ff, fb], [bf, bb]] = e.confusion;
            let text = format!("truth\\verdict front back\nfront         {ff:>5} {fb:>4}\nback          {bf:>5} {bb:>4}\nundecided {}\n", e.undecided);
            emit(a.report, text, serde_json::to_value(&e)?)
        }
    }
}

fn schedule(a: ScheduleArgs) -> Result<()> {
    let m = BumpModel {
        lambda: a.lambda,
        w: a.awake_s,
        s: a.sleep_s,
        c: a.cost,
    };
    m.validate()?;
    let p = detection_cycle_prob(&m);
    let costs: Vec<f64> = (1..=a.cycles).map(|i| expected_cost(&m, i, a.awake_s / 2.0)).collect();
    let plan = plan_entry_sampling(a.mean_s, a.sigma_s)?;
    let sim = simulate_duty_cycle(&m, a.trials, a.seed)?;
    let mut text = format!("detection probability per cycle {p:.6}\n");
    for (i, c) in costs.iter().enumerate() {
        text.push_str(&format!("expected cost, cycle {} {c:.6}\n", i + 1));
    }
    let plan_text: Vec<String> = plan.iter().map(|t| format!("{t}")).collect();
    text.push_str(&format!("sampling plan (s) {}\n", plan_text.join(" ")));
    text.push_str(&format!(
        "monte carlo: first-cycle hit {:.4}, mean cycles {:.3}, mean detection {:.2} s, mean energy {:.3}\n",
        sim.first_cycle_hit, sim.mean_cycles, sim.mean_detection_s, sim.mean_energy
    ));
    let value = json!({
        "detection_cycle_prob": p,
        "expected_cost": costs,
        "plan_s": plan,
        "monte_carlo": serde_json::to_value(sim)?,
    });
    emit(a.report, text, value)
}

fn texting(a: TextingArgs) -> Result<()> {
    let log = parse_keystrokes(&read(&a.keystrokes)?).with_context(|| format!("invalid keystroke log {}", a.keystrokes.display()))?;
    let stats = compute_stats(&log)?;
    let verdict = classify_texting(&stats, &Default::default())?;
    let text = format!(
        "intervals {}\nmean {:.2} ms sd {:.2} ms\nunder 800 ms {}\ninputs per typo {:.1}\nverdict {:?} (confidence {:.3})\n",
        stats.n_intervals,
        stats.mean_interval_ms,
        stats.sd_interval_ms,
        pct(stats.frac_under_800ms),
        stats.inputs_per_typo,
        verdict.class,
        verdict.confidence
    );
    let value = json!({
        "stats": serde_json::to_value(stats)?,
        "verdict": serde_json::to_value(verdict)?,
    });
    emit(a.report, text, value)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let model = err
        .chain()
        .any(|c| c.is::<ModelError>() || c.downcast_ref::<Error>().is_some_and(Error::is_model_error));
    if model {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train(a),
        Command::Detect(a) => detect(a),
        Command::Simulate(a) => simulate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Schedule(a) => schedule(a),
        Command::Texting(a) => texting(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.chain().any(|c| c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
