//! Command-line front end for the online pseudoinverse solvers.
//!
//! Subcommands: `run` executes one experiment (optionally repeated over
//! consecutive seeds), `compare` runs several solvers on identical
//! streams, and `verify` runs the randomized self-check battery.
//!
//! Exit codes: 0 success, 1 invalid configuration or input, 2 runtime or
//! numeric failure. The last stdout line of every command is a single
//! JSON record for scripting.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use opium_core::elm::Activation;
use opium_core::harness::{
    normalize_spec, run_repeats, ExperimentSpec, FileSink, NullSink, RunMetrics, SolverKind,
    SolverSpec, TaskSpec, TraceSink,
};
use opium_core::harness::task::SineTaskConfig;
use opium_core::verify::{replay_case, run_battery, FailingCase, VerifyReport};
use opium_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "opium",
    version,
    about = "Online pseudoinverse regression: experiments, comparisons, and self checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and report its metrics
    Run(RunArgs),
    /// Run several solvers on identical streams and compare them
    Compare(CompareArgs),
    /// Run the randomized verification battery
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct SharedArgs {
    /// Task: sine-switch, csv-series, idx-classify, or random-equivalence
    #[arg(long)]
    task: Option<String>,
    /// Hidden layer width M
    #[arg(long)]
    hidden: Option<usize>,
    /// Regularization scale for opium and dynamic
    #[arg(long)]
    epsilon: Option<f64>,
    /// Gain scale for light
    #[arg(long)]
    g: Option<f64>,
    /// Forgetting parameter for dynamic, in [1, 2)
    #[arg(long)]
    alpha: Option<f64>,
    /// New-direction threshold for greville
    #[arg(long = "c-tol")]
    c_tol: Option<f64>,
    /// Base random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Number of runs with seeds seed..seed+repeats-1
    #[arg(long)]
    repeats: Option<usize>,
    /// Hidden activation: tanh or logistic
    #[arg(long)]
    activation: Option<String>,
    /// Window for the final-RMS metric
    #[arg(long = "rms-window")]
    rms_window: Option<usize>,
    /// CSV file for csv-series (bundled synthetic signal if omitted)
    #[arg(long)]
    csv: Option<String>,
    /// Number of input taps for series tasks
    #[arg(long)]
    taps: Option<usize>,
    /// Tap spacing in samples for sine-switch
    #[arg(long = "tap-stride")]
    tap_stride: Option<usize>,
    /// Sample interval in seconds for sine-switch
    #[arg(long)]
    dt: Option<f64>,
    /// First-half frequency in Hz for sine-switch
    #[arg(long)]
    f1: Option<f64>,
    /// Second-half frequency in Hz for sine-switch
    #[arg(long)]
    f2: Option<f64>,
    /// Length of each half in seconds for sine-switch
    #[arg(long = "duration-each")]
    duration_each: Option<f64>,
    /// Training images in IDX format (seeded synthetic set if omitted)
    #[arg(long)]
    images: Option<String>,
    /// Training labels in IDX format
    #[arg(long)]
    labels: Option<String>,
    /// Test images in IDX format
    #[arg(long = "test-images")]
    test_images: Option<String>,
    /// Test labels in IDX format
    #[arg(long = "test-labels")]
    test_labels: Option<String>,
    /// Cap on training samples (random draw when smaller than the set)
    #[arg(long = "train-limit")]
    train_limit: Option<usize>,
    /// Cap on test samples
    #[arg(long = "test-limit")]
    test_limit: Option<usize>,
    /// Input width for random-equivalence
    #[arg(long = "input-dim")]
    input_dim: Option<usize>,
    /// Output width for random-equivalence
    #[arg(long = "output-dim")]
    output_dim: Option<usize>,
    /// Stream length for random-equivalence
    #[arg(long)]
    steps: Option<usize>,
    /// Trace file; repeats and compare add -seedN / -solver suffixes
    #[arg(long = "trace-out")]
    trace_out: Option<PathBuf>,
    /// key=value file supplying defaults that flags override
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Solver: batch, opium, greville, light, or dynamic
    #[arg(long)]
    solver: Option<String>,
    #[command(flatten)]
    shared: SharedArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// Comma-separated solvers, at least two
    #[arg(long, value_delimiter = ',')]
    solvers: Vec<String>,
    #[command(flatten)]
    shared: SharedArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Seed for the random instances
    #[arg(long)]
    seed: Option<u64>,
    /// Smaller instances for a faster pass
    #[arg(long)]
    quick: bool,
    /// Rerun a serialized failing case instead of the battery
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Where to save the failing case if a check fails
    #[arg(long = "save-failing")]
    save_failing: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            e.print().ok();
            std::process::exit(code);
        }
    };
    let code = match cli.command {
        Command::Run(args) => report(cmd_run(args)),
        Command::Compare(args) => report(cmd_compare(args)),
        Command::Verify(args) => report(cmd_verify(args)),
    };
    std::process::exit(code);
}

fn report(outcome: Result<i32>) -> i32 {
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter { .. }
        | Error::Parse { .. }
        | Error::Snapshot(_)
        | Error::Io { .. }
        | Error::DimensionMismatch { .. } => 1,
        Error::NumericDegeneracy { .. }
        | Error::InternalConsistency { .. }
        | Error::NonFinite { .. } => 2,
    }
}

const CONFIG_KEYS: [&str; 29] = [
    "task",
    "solver",
    "solvers",
    "hidden",
    "epsilon",
    "g",
    "alpha",
    "c-tol",
    "seed",
    "repeats",
    "activation",
    "rms-window",
    "csv",
    "taps",
    "tap-stride",
    "dt",
    "f1",
    "f2",
    "duration-each",
    "images",
    "labels",
    "test-images",
    "test-labels",
    "train-limit",
    "test-limit",
    "input-dim",
    "output-dim",
    "steps",
    "trace-out",
];

struct ConfigMap(HashMap<String, String>);

impl ConfigMap {
    fn empty() -> Self {
        ConfigMap(HashMap::new())
    }

    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut map = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx as u64 + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                unit: "line",
                position: line_no,
                message: format!("expected key=value, found {trimmed:?}"),
            })?;
            let key = key.trim().to_string();
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    unit: "line",
                    position: line_no,
                    message: format!("unknown key {key:?}"),
                });
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(ConfigMap(map))
    }

    fn get<T: FromStr>(&self, key: &'static str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| Error::InvalidParameter {
                name: key,
                message: format!("config value {raw:?}: {e}"),
            }),
        }
    }
}

fn pick<T: FromStr>(flag: Option<T>, cfg: &ConfigMap, key: &'static str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key),
    }
}

/// Effective settings after merging flags over the config file.
struct Settings {
    task: String,
    hidden: usize,
    epsilon: Option<f64>,
    g: Option<f64>,
    alpha: Option<f64>,
    c_tol: Option<f64>,
    seed: u64,
    repeats: usize,
    activation: Activation,
    rms_window: Option<usize>,
    csv: Option<String>,
    taps: Option<usize>,
    tap_stride: Option<usize>,
    dt: Option<f64>,
    f1: Option<f64>,
    f2: Option<f64>,
    duration_each: Option<f64>,
    images: Option<String>,
    labels: Option<String>,
    test_images: Option<String>,
    test_labels: Option<String>,
    train_limit: Option<usize>,
    test_limit: Option<usize>,
    input_dim: Option<usize>,
    output_dim: Option<usize>,
    steps: Option<usize>,
    trace_out: Option<PathBuf>,
}

fn resolve(shared: SharedArgs) -> Result<(Settings, ConfigMap)> {
    let cfg = match &shared.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::empty(),
    };
    let activation_name: Option<String> = pick(shared.activation, &cfg, "activation")?;
    let activation = match activation_name.as_deref() {
        None => Activation::Tanh,
        Some(name) => Activation::from_str(name)?,
    };
    let settings = Settings {
        task: pick(shared.task, &cfg, "task")?.unwrap_or_else(|| "sine-switch".to_string()),
        hidden: pick(shared.hidden, &cfg, "hidden")?.unwrap_or(100),
        epsilon: pick(shared.epsilon, &cfg, "epsilon")?,
        g: pick(shared.g, &cfg, "g")?,
        alpha: pick(shared.alpha, &cfg, "alpha")?,
        c_tol: pick(shared.c_tol, &cfg, "c-tol")?,
        seed: pick(shared.seed, &cfg, "seed")?.unwrap_or(0),
        repeats: pick(shared.repeats, &cfg, "repeats")?.unwrap_or(1),
        activation,
        rms_window: pick(shared.rms_window, &cfg, "rms-window")?,
        csv: pick(shared.csv, &cfg, "csv")?,
        taps: pick(shared.taps, &cfg, "taps")?,
        tap_stride: pick(shared.tap_stride, &cfg, "tap-stride")?,
        dt: pick(shared.dt, &cfg, "dt")?,
        f1: pick(shared.f1, &cfg, "f1")?,
        f2: pick(shared.f2, &cfg, "f2")?,
        duration_each: pick(shared.duration_each, &cfg, "duration-each")?,
        images: pick(shared.images, &cfg, "images")?,
        labels: pick(shared.labels, &cfg, "labels")?,
        test_images: pick(shared.test_images, &cfg, "test-images")?,
        test_labels: pick(shared.test_labels, &cfg, "test-labels")?,
        train_limit: pick(shared.train_limit, &cfg, "train-limit")?,
        test_limit: pick(shared.test_limit, &cfg, "test-limit")?,
        input_dim: pick(shared.input_dim, &cfg, "input-dim")?,
        output_dim: pick(shared.output_dim, &cfg, "output-dim")?,
        steps: pick(shared.steps, &cfg, "steps")?,
        trace_out: pick(shared.trace_out, &cfg, "trace-out")?,
    };
    Ok((settings, cfg))
}

fn build_task(s: &Settings) -> Result<TaskSpec> {
    match s.task.as_str() {
        "sine-switch" => {
            let d = SineTaskConfig::default();
            Ok(TaskSpec::SineSwitch {
                config: SineTaskConfig {
                    dt: s.dt.unwrap_or(d.dt),
                    f1: s.f1.unwrap_or(d.f1),
                    f2: s.f2.unwrap_or(d.f2),
                    duration_each: s.duration_each.unwrap_or(d.duration_each),
                    num_taps: s.taps.unwrap_or(d.num_taps),
                    tap_stride: s.tap_stride.unwrap_or(d.tap_stride),
                },
            })
        }
        "csv-series" => Ok(TaskSpec::CsvSeries {
            path: s.csv.clone(),
            num_taps: s.taps.unwrap_or(10),
        }),
        "idx-classify" => Ok(TaskSpec::IdxClassify {
            images: s.images.clone(),
            labels: s.labels.clone(),
            test_images: s.test_images.clone(),
            test_labels: s.test_labels.clone(),
            train_limit: s.train_limit,
            test_limit: s.test_limit,
        }),
        "random-equivalence" => Ok(TaskSpec::RandomEquivalence {
            input_dim: s.input_dim.unwrap_or(10),
            output_dim: s.output_dim.unwrap_or(3),
            steps: s.steps.unwrap_or(500),
        }),
        other => Err(Error::InvalidParameter {
            name: "task",
            message: format!(
                "unknown task {other:?}, expected sine-switch, csv-series, idx-classify, or random-equivalence"
            ),
        }),
    }
}

fn build_spec(s: &Settings, kind: SolverKind) -> Result<ExperimentSpec> {
    let spec = ExperimentSpec {
        task: build_task(s)?,
        solver: SolverSpec {
            kind,
            epsilon: s.epsilon,
            g: s.g,
            alpha: s.alpha,
            c_tol: s.c_tol,
        },
        hidden_dim: s.hidden,
        activation: s.activation,
        weight_dist: None,
        seed: s.seed,
        rms_window: s.rms_window,
    };
    normalize_spec(&spec)
}

/// trace.ndjson -> trace-opium-seed3.ndjson, keeping the extension last.
fn trace_path(base: &Path, solver: Option<&str>, seed: Option<u64>) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".to_string());
    let ext = base.extension().map(|e| e.to_string_lossy().into_owned());
    let mut name = stem;
    if let Some(solver) = solver {
        name.push('-');
        name.push_str(solver);
    }
    if let Some(seed) = seed {
        name.push_str(&format!("-seed{seed}"));
    }
    if let Some(ext) = ext {
        name.push('.');
        name.push_str(&ext);
    }
    base.with_file_name(name)
}

struct Execution {
    mean: RunMetrics,
    per_seed: Vec<(u64, RunMetrics, f64)>,
    traces: Vec<PathBuf>,
    wall_ms: f64,
}

fn execute(
    spec: &ExperimentSpec,
    repeats: usize,
    trace_out: Option<&Path>,
    solver_suffix: Option<&str>,
) -> Result<Execution> {
    let start = Instant::now();
    let mut traces = Vec::new();
    let base_seed = spec.seed;
    let mut sink_for = |seed: u64| -> Result<Box<dyn TraceSink>> {
        match trace_out {
            None => Ok(Box::new(NullSink::new())),
            Some(base) => {
                let path = trace_path(
                    base,
                    solver_suffix,
                    if repeats > 1 { Some(seed) } else { None },
                );
                let sink = FileSink::create(&path)?;
                traces.push(path);
                Ok(Box::new(sink))
            }
        }
    };
    let (summaries, mean) = run_repeats(spec, repeats, &mut sink_for)?;
    let per_seed = summaries
        .iter()
        .enumerate()
        .map(|(i, s)| (base_seed + i as u64, s.metrics.clone(), s.wall_ms))
        .collect();
    Ok(Execution {
        mean,
        per_seed,
        traces,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.4e}"),
        None => "-".to_string(),
    }
}

fn describe_metrics(m: &RunMetrics) -> String {
    let mut parts = vec![format!("steps={}", m.steps)];
    if let Some(v) = m.rms_final {
        let window = m.rms_window.unwrap_or(0);
        parts.push(format!("rms_final[{window}]={v:.4e}"));
    }
    if let Some(v) = m.rms_all {
        parts.push(format!("rms_all={v:.4e}"));
    }
    if let Some(v) = m.classification_error {
        parts.push(format!("class_err={:.2}%", v * 100.0));
    }
    if let Some(v) = m.oracle_rel_diff {
        parts.push(format!("oracle_diff={v:.4e}"));
    }
    parts.join(" ")
}

fn cmd_run(args: RunArgs) -> Result<i32> {
    let solver_flag = args.solver.clone();
    let (settings, cfg) = resolve(args.shared)?;
    let kind_name: Option<String> = pick(solver_flag, &cfg, "solver")?;
    let kind = SolverKind::from_str(&kind_name.ok_or(Error::InvalidParameter {
        name: "solver",
        message: "a solver must be named, e.g. --solver opium".into(),
    })?)?;
    let spec = build_spec(&settings, kind)?;
    let repeats = settings.repeats;
    println!(
        "run: task={} solver={} hidden={} seeds {}..{} ({} run{})",
        spec.task.name(),
        kind.name(),
        spec.hidden_dim,
        spec.seed,
        spec.seed + repeats as u64 - 1,
        repeats,
        if repeats == 1 { "" } else { "s" }
    );
    let exec = execute(&spec, repeats, settings.trace_out.as_deref(), None)?;
    for (seed, metrics, wall) in &exec.per_seed {
        println!("  seed {seed}: {} wall={wall:.0}ms", describe_metrics(metrics));
    }
    if repeats > 1 {
        println!("  mean: {}", describe_metrics(&exec.mean));
    }
    for path in &exec.traces {
        println!("  trace: {}", path.display());
    }
    let record = json!({
        "command": "run",
        "task": spec.task.name(),
        "solver": kind.name(),
        "hidden": spec.hidden_dim,
        "seed": spec.seed,
        "repeats": repeats,
        "metrics": exec.mean,
        "wall_ms": exec.wall_ms,
        "traces": exec.traces.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    println!("{record}");
    Ok(0)
}

fn cmd_compare(args: CompareArgs) -> Result<i32> {
    let solvers_flag = args.solvers.clone();
    let (settings, cfg) = resolve(args.shared)?;
    let names: Vec<String> = if solvers_flag.is_empty() {
        cfg.get::<String>("solvers")?
            .map(|s| s.split(',').map(|p| p.trim().to_string()).collect())
            .unwrap_or_default()
    } else {
        solvers_flag
    };
    if names.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "solvers",
            message: format!(
                "comparison needs at least two solvers, got {}",
                names.len()
            ),
        });
    }
    let mut kinds = Vec::with_capacity(names.len());
    for name in &names {
        let kind = SolverKind::from_str(name)?;
        if kinds.contains(&kind) {
            return Err(Error::InvalidParameter {
                name: "solvers",
                message: format!("solver {name:?} listed twice"),
            });
        }
        kinds.push(kind);
    }
    let repeats = settings.repeats;
    let mut results: Vec<(SolverKind, Execution)> = Vec::with_capacity(kinds.len());
    for kind in &kinds {
        let spec = build_spec(&settings, *kind)?;
        let exec = execute(
            &spec,
            repeats,
            settings.trace_out.as_deref(),
            Some(kind.name()),
        )?;
        results.push((*kind, exec));
    }
    let task = build_task(&settings)?;
    println!(
        "compare: task={} hidden={} seeds {}..{} ({} run{} each)",
        task.name(),
        settings.hidden,
        settings.seed,
        settings.seed + repeats as u64 - 1,
        repeats,
        if repeats == 1 { "" } else { "s" }
    );
    println!(
        "  {:<10} {:>12} {:>12} {:>12} {:>12} {:>10}",
        "solver", "rms_final", "rms_all", "class_err", "oracle_diff", "wall_ms"
    );
    for (kind, exec) in &results {
        println!(
            "  {:<10} {:>12} {:>12} {:>12} {:>12} {:>10.0}",
            kind.name(),
            fmt_opt(exec.mean.rms_final),
            fmt_opt(exec.mean.rms_all),
            fmt_opt(exec.mean.classification_error),
            fmt_opt(exec.mean.oracle_rel_diff),
            exec.wall_ms
        );
    }
    let metric_of = |m: &RunMetrics| -> Option<f64> { m.rms_final };
    let (ratio_metric, values): (&str, Vec<Option<f64>>) = if results
        .iter()
        .all(|(_, e)| metric_of(&e.mean).is_some())
    {
        ("rms_final", results.iter().map(|(_, e)| e.mean.rms_final).collect())
    } else {
        (
            "classification_error",
            results
                .iter()
                .map(|(_, e)| e.mean.classification_error)
                .collect(),
        )
    };
    let mut ratios = Vec::new();
    for i in 0..results.len() {
        for j in (i + 1)..results.len() {
            if let (Some(a), Some(b)) = (values[i], values[j]) {
                if b != 0.0 {
                    ratios.push((
                        format!("{}/{}", results[i].0.name(), results[j].0.name()),
                        a / b,
                    ));
                }
            }
        }
    }
    if !ratios.is_empty() {
        let text: Vec<String> = ratios
            .iter()
            .map(|(pair, v)| format!("{pair}={v:.3e}"))
            .collect();
        println!("  ratios ({ratio_metric}): {}", text.join(" "));
    }
    let record = json!({
        "command": "compare",
        "task": task.name(),
        "hidden": settings.hidden,
        "seed": settings.seed,
        "repeats": repeats,
        "ratio_metric": ratio_metric,
        "solvers": results.iter().map(|(kind, exec)| json!({
            "solver": kind.name(),
            "metrics": exec.mean,
            "wall_ms": exec.wall_ms,
            "traces": exec.traces.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "ratios": ratios.iter().map(|(pair, v)| json!({"pair": pair, "value": v})).collect::<Vec<_>>(),
    });
    println!("{record}");
    Ok(0)
}

fn print_battery(report: &VerifyReport) {
    for check in &report.checks {
        println!(
            "  {} {:<24} worst {:>10.3e}  tol {:>7.0e}  {:.0}ms",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.worst,
            check.tolerance,
            check.millis
        );
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<i32> {
    if let Some(path) = &args.replay {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let case: FailingCase = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            unit: "line",
            position: e.line() as u64,
            message: e.to_string(),
        })?;
        let check = replay_case(&case)?;
        println!(
            "replay {} seed {}: {} worst {:.3e} tol {:.0e}",
            check.name,
            case.seed,
            if check.passed { "PASS" } else { "FAIL" },
            check.worst,
            check.tolerance
        );
        let record = json!({
            "command": "verify-replay",
            "check": check.name,
            "seed": case.seed,
            "passed": check.passed,
            "worst": check.worst,
            "tolerance": check.tolerance,
        });
        println!("{record}");
        return Ok(if check.passed { 0 } else { 2 });
    }

    let seed = args.seed.unwrap_or(0);
    let start = Instant::now();
    let report = run_battery(seed, args.quick);
    let wall = start.elapsed().as_secs_f64();
    println!(
        "verify: seed {seed} ({} instances)",
        if args.quick { "quick" } else { "full" }
    );
    print_battery(&report);
    let mut saved: Option<PathBuf> = None;
    if let Some(case) = report.failing_case() {
        let path = args
            .save_failing
            .unwrap_or_else(|| PathBuf::from("opium-verify-failing.json"));
        let body = serde_json::to_string_pretty(&case).map_err(|e| Error::Snapshot(e.to_string()))?;
        fs::write(&path, body).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        println!(
            "  failing case saved to {}; rerun with --replay {}",
            path.display(),
            path.display()
        );
        saved = Some(path);
    } else {
        println!("  all checks passed in {wall:.2}s");
    }
    let record = json!({
        "command": "verify",
        "seed": seed,
        "quick": args.quick,
        "all_passed": report.all_passed(),
        "wall_s": wall,
        "failing_case": saved.map(|p| p.display().to_string()),
        "checks": report.checks.iter().map(|c| json!({
            "name": c.name,
            "passed": c.passed,
            "worst": c.worst,
            "tolerance": c.tolerance,
        })).collect::<Vec<_>>(),
    });
    println!("{record}");
    Ok(if report.all_passed() { 0 } else { 2 })
}
