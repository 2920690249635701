//! The `glrm` command line: `train`, `predict`, `cv` and `sweep`.
//!
//! Settings come from an optional TOML file (`--config`) and are overridden
//! by flags. Exit codes: 0 success, 1 usage or configuration error, 2 bad
//! input data, 3 any other failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::datatable::{load_csv, load_table, target_mode, RawTable, Targets};
use crate::evaluate::{self, Criterion};
use crate::glm::Family;
use crate::model::{RuleEnsemble, DEFAULT_LITERAL_WEIGHT};
use crate::pricing::{EarlyStop, LiteralPool, PricingConfig, PricingMode};
use crate::trainer::{train_table, TrainConfig, Variant};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "glrm", version, about = "Rule ensembles trained by column generation")]
struct Cli {
    /// Worker threads for folds and grid points (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one model and write it as JSON.
    Train(TrainCmd),
    /// Score a CSV with a saved model.
    Predict(PredictCmd),
    /// Cross-validate and print the metrics as JSON.
    Cv(CvCmd),
    /// Cross-validate over a λ₀ grid and write the trade-off CSV.
    Sweep(SweepCmd),
}

#[derive(Debug, Args, Default)]
struct Common {
    /// TOML file with default settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training CSV with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Name of the target column.
    #[arg(long)]
    target: Option<String>,
    /// logistic or linear.
    #[arg(long)]
    family: Option<Family>,
    /// LR1, LR1N, LRR or LRRN.
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    lambda0: Option<f64>,
    /// Per-literal penalty (default 0.2 · lambda0).
    #[arg(long)]
    lambda1: Option<f64>,
    /// Interior quantile thresholds per numeric column.
    #[arg(long)]
    quantiles: Option<usize>,
    /// heuristic or exact.
    #[arg(long = "pricing-mode")]
    pricing_mode: Option<PricingMode>,
    #[arg(long = "d-max")]
    d_max: Option<usize>,
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long = "k-best")]
    k_best: Option<usize>,
    /// none, immediate or after_degree.
    #[arg(long = "early-stop")]
    early_stop: Option<EarlyStop>,
    #[arg(long = "node-budget")]
    node_budget: Option<u64>,
    /// all or basis.
    #[arg(long = "literal-pool")]
    literal_pool: Option<LiteralPool>,
    #[arg(long = "max-cg-iters")]
    max_cg_iters: Option<usize>,
    /// Seconds per fit.
    #[arg(long = "time-budget")]
    time_budget: Option<f64>,
    /// Skip the final unpenalized refit.
    #[arg(long = "no-debias")]
    no_debias: bool,
    /// Also penalize the intercept with lambda0.
    #[arg(long = "penalize-intercept")]
    penalize_intercept: bool,
    /// Seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TrainCmd {
    #[command(flatten)]
    common: Common,
    /// Where to write the model JSON.
    #[arg(long, default_value = "model.json")]
    model: PathBuf,
    /// Write the column-generation trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictCmd {
    /// Model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// CSV with the model's feature columns (extra columns are ignored).
    #[arg(long)]
    data: PathBuf,
    /// Output CSV (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Number of folds.
    #[arg(long)]
    k: Option<usize>,
    /// brier, accuracy or r2 (default: brier for logistic, r2 for linear).
    #[arg(long)]
    metric: Option<Criterion>,
    /// Comma-separated λ₀ values.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct CvCmd {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    eval: EvalArgs,
    /// Choose λ₀ on each training fold by inner CV over the grid.
    #[arg(long)]
    nested: bool,
    /// Inner folds for --nested.
    #[arg(long = "inner-k")]
    inner_k: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepCmd {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    eval: EvalArgs,
    /// Output CSV (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Settings accepted in the `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    data: Option<PathBuf>,
    target: Option<String>,
    family: Option<Family>,
    variant: Option<Variant>,
    lambda0: Option<f64>,
    lambda1: Option<f64>,
    quantiles: Option<usize>,
    max_cg_iters: Option<usize>,
    time_budget: Option<f64>,
    debias: Option<bool>,
    debias_threshold: Option<f64>,
    penalize_intercept: Option<bool>,
    seed: Option<u64>,
    k: Option<usize>,
    inner_k: Option<usize>,
    metric: Option<Criterion>,
    grid: Option<Vec<f64>>,
    pricing: Option<PricingConfig>,
}

/// Fully resolved settings of a training-type command.
struct Resolved {
    data: PathBuf,
    target: String,
    train: TrainConfig,
    seed: u64,
    k: usize,
    inner_k: usize,
    metric: Criterion,
    grid: Vec<f64>,
}

fn read_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn resolve(common: &Common, eval: Option<&EvalArgs>, inner_k: Option<usize>) -> Result<Resolved> {
    let file = match &common.config {
        Some(p) => read_config(p)?,
        None => FileConfig::default(),
    };
    let data = common
        .data
        .clone()
        .or(file.data)
        .ok_or_else(|| Error::Config("--data is required".into()))?;
    let target = common
        .target
        .clone()
        .or(file.target)
        .ok_or_else(|| Error::Config("--target is required".into()))?;
    let defaults = TrainConfig::default();
    let family = common.family.or(file.family).unwrap_or(defaults.family);
    let mut pricing = file.pricing.unwrap_or_default();
    if let Some(v) = common.pricing_mode {
        pricing.mode = v;
    }
    if let Some(v) = common.d_max {
        pricing.d_max = v;
    }
    if let Some(v) = common.beam {
        pricing.beam_width = v;
    }
    if let Some(v) = common.k_best {
        pricing.k_best = v;
    }
    if let Some(v) = common.early_stop {
        pricing.early_stop = v;
    }
    if let Some(v) = common.node_budget {
        pricing.node_budget = v;
    }
    if let Some(v) = common.literal_pool {
        pricing.literal_pool = v;
    }
    let time_budget = common.time_budget.or(file.time_budget);
    if time_budget.is_some_and(|t| !(t.is_finite() && t >= 0.0)) {
        return Err(Error::Config("time budget must be a non-negative number of seconds".into()));
    }
    let train = TrainConfig {
        family,
        variant: common.variant.or(file.variant).unwrap_or(defaults.variant),
        lambda0: common.lambda0.or(file.lambda0).unwrap_or(defaults.lambda0),
        lambda1: common.lambda1.or(file.lambda1),
        penalize_intercept: common.penalize_intercept || file.penalize_intercept.unwrap_or(false),
        max_cg_iters: common.max_cg_iters.or(file.max_cg_iters).unwrap_or(defaults.max_cg_iters),
        time_budget: time_budget.map_or(defaults.time_budget, Duration::from_secs_f64),
        pricing,
        debias: !common.no_debias && file.debias.unwrap_or(defaults.debias),
        debias_threshold: file.debias_threshold.unwrap_or(defaults.debias_threshold),
        quantiles: common.quantiles.or(file.quantiles).unwrap_or(defaults.quantiles),
        ..defaults
    };
    train.validate()?;
    let grid = eval
        .and_then(|e| e.grid.clone())
        .or(file.grid)
        .unwrap_or_else(evaluate::default_grid);
    if grid.is_empty() || grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::Config("grid values must be finite and non-negative".into()));
    }
    Ok(Resolved {
        data,
        target,
        seed: common.seed.or(file.seed).unwrap_or(0),
        k: eval.and_then(|e| e.k).or(file.k).unwrap_or(10),
        inner_k: inner_k.or(file.inner_k).unwrap_or(10),
        metric: eval
            .and_then(|e| e.metric)
            .or(file.metric)
            .unwrap_or(Criterion::default_for(family)),
        grid,
        train,
    })
}

fn load_training(r: &Resolved) -> Result<(RawTable, Targets)> {
    let (table, target) = load_csv(&r.data, &r.target)?;
    let targets = target_mode(&target, r.train.family)?;
    Ok((table, targets))
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn cmd_train(cmd: &TrainCmd, out: &mut dyn Write) -> Result<()> {
    let r = resolve(&cmd.common, None, None)?;
    let (table, targets) = load_training(&r)?;
    let (model, trace) = train_table(&table, &targets, &r.train)?;
    model.save(&cmd.model)?;
    if let Some(path) = &cmd.trace {
        let mut w = create(path)?;
        trace.write_jsonl(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    let mut text = model.render();
    text.push_str(&format!(
        "complexity: {:.1}\ntermination: {}\n",
        model.complexity(DEFAULT_LITERAL_WEIGHT),
        serde_json::to_value(trace.termination)?.as_str().unwrap_or_default()
    ));
    write_out(out, &text)
}

fn cmd_predict(cmd: &PredictCmd, out: &mut dyn Write) -> Result<()> {
    let model = RuleEnsemble::load(&cmd.model)?;
    let table = load_table(&cmd.data)?;
    let preds = model.predict(&table)?;
    let mut buf = csv::Writer::from_writer(Vec::new());
    buf.write_record(["row_index", "prediction"])?;
    for (i, p) in preds.iter().enumerate() {
        buf.write_record([i.to_string(), p.to_string()])?;
    }
    let bytes = buf.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    match &cmd.out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| Error::io(path, e)),
        None => out.write_all(&bytes).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn cmd_cv(cmd: &CvCmd, out: &mut dyn Write) -> Result<()> {
    let r = resolve(&cmd.common, Some(&cmd.eval), cmd.inner_k)?;
    let (table, targets) = load_training(&r)?;
    let json = if cmd.nested {
        let res = evaluate::nested_cross_validate(
            &table, &targets, &r.train, &r.grid, r.k, r.inner_k, r.metric, r.seed,
        )?;
        serde_json::to_string_pretty(&res)?
    } else {
        let m = evaluate::cross_validate(&table, &targets, &r.train, r.k, r.seed)?;
        serde_json::to_string_pretty(&m)?
    };
    write_out(out, &(json + "\n"))
}

fn cmd_sweep(cmd: &SweepCmd, out: &mut dyn Write) -> Result<()> {
    let r = resolve(&cmd.common, Some(&cmd.eval), None)?;
    let (table, targets) = load_training(&r)?;
    let points = evaluate::sweep(&table, &targets, &r.train, &r.grid, r.k, r.seed)?;
    let mut buf = Vec::new();
    evaluate::write_sweep_csv(&mut buf, &points, r.metric)?;
    match &cmd.out {
        Some(path) => std::fs::write(path, buf).map_err(|e| Error::io(path, e)),
        None => out.write_all(&buf).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn exit_code(e: &Error) -> i32 {
    if matches!(e, Error::Config(_)) {
        EXIT_USAGE
    } else if e.is_data_error() {
        EXIT_DATA
    } else {
        EXIT_RUNTIME
    }
}

/// Runs the command line with `argv` (program name first), writing normal
/// output to `out` and diagnostics to `err`. Returns the exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker pool: {e}");
            return EXIT_RUNTIME;
        }
    };
    let mut buf: Vec<u8> = Vec::new();
    let result = pool.install(|| match &cli.command {
        Command::Train(c) => cmd_train(c, &mut buf),
        Command::Predict(c) => cmd_predict(c, &mut buf),
        Command::Cv(c) => cmd_cv(c, &mut buf),
        Command::Sweep(c) => cmd_sweep(c, &mut buf),
    });
    let result = result.and_then(|()| out.write_all(&buf).map_err(|e| Error::io("<stdout>", e)));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// [`run_with`] on standard output and standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
