//! Command-line surface: `run`, `partition`, `toy`, `check-grad`, `sweep`.
//!
//! Exit codes: 0 success, 1 bad input (flags, config, validation), 2
//! runtime failure (I/O, numerics, failed self-checks).

use crate::config::{apply_key, parse_config, LoadedConfig};
use crate::error::{Error, Result};
use crate::orchestrator::{build_dataset, build_partition, run_observed, Method, RunConfig};
use crate::report::MetricsSink;
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "diversifed",
    version,
    about = "Personalized federated learning simulator with a pull/push model-distance loss"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one training run and emit metrics.
    Run(RunArgs),
    /// Generate a client data partition and dump it as JSON.
    Partition(PartitionArgs),
    /// Sweep the frozen-snapshot pull/push experiment over a lambda list.
    Toy(ToyArgs),
    /// Run the gradient and combination-weight self-check suites.
    CheckGrad(CheckGradArgs),
    /// Repeat runs over seeds and an optional hyperparameter grid.
    Sweep(SweepArgs),
}

/// Configuration source plus the common override flags. Flags win over the
/// config file; `--set` accepts any documented config key.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Key-value config file (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// diversifed | fedavg | separate | toy_pullpush
    #[arg(long)]
    method: Option<String>,
    /// Softmax temperature on model distances.
    #[arg(long)]
    tau: Option<f64>,
    /// Proximal weight toward the anchor.
    #[arg(long)]
    lambda: Option<f64>,
    /// Server learning rate alpha_t.
    #[arg(long = "alpha")]
    alpha_t: Option<f64>,
    /// Client Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long = "clients")]
    n_clients: Option<usize>,
    /// Local epochs per round.
    #[arg(long)]
    epochs: Option<usize>,
    /// Fraction of clients sampled each round, in (0, 1].
    #[arg(long)]
    participation: Option<f64>,
    /// Extra override as key=value (repeatable); accepts any config key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Per-round metrics CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// End-of-run JSON summary path.
    #[arg(long)]
    json: Option<PathBuf>,
}

impl ConfigArgs {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut pairs = Vec::new();
        for entry in &self.set {
            let (k, v) = entry.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("--set expects key=value, got {entry:?}"))
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                pairs.push((key.to_string(), v));
            }
        };
        push("method", self.method.clone());
        push("tau", self.tau.map(|v| v.to_string()));
        push("lambda", self.lambda.map(|v| v.to_string()));
        push("alpha_t", self.alpha_t.map(|v| v.to_string()));
        push("lr", self.lr.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("rounds", self.rounds.map(|v| v.to_string()));
        push("n_clients", self.n_clients.map(|v| v.to_string()));
        push("local_epochs", self.epochs.map(|v| v.to_string()));
        push(
            "participation_fraction",
            self.participation.map(|v| v.to_string()),
        );
        push(
            "output.csv",
            self.csv.as_ref().map(|p| p.display().to_string()),
        );
        push(
            "output.json",
            self.json.as_ref().map(|p| p.display().to_string()),
        );
        Ok(pairs)
    }

    fn load(&self) -> Result<LoadedConfig> {
        parse_config(self.config.as_deref(), &self.overrides()?)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output JSON path for the partition spec.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ToyArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated lambda values for the pairwise-norm term.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    lambdas: Vec<f64>,
    /// Number of seeds per lambda (base seed comes from the config).
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// Optional JSON file for the aggregated results.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckGradArgs {
    /// Pools for the combination-weight identity suite.
    #[arg(long, default_value_t = 200)]
    pools: usize,
    /// Instances per finite-difference suite.
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Seeds per grid cell (base seed comes from the config).
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Grid axis as key=v1,v2,... (repeatable; axes combine as a product).
    #[arg(long)]
    grid: Vec<String>,
    /// Optional JSON file for the aggregated results.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Best mean accuracies over `seeds` consecutive seeds of one config.
fn best_over_seeds(base: &RunConfig, seeds: u64) -> Result<Vec<f64>> {
    let mut bests = Vec::with_capacity(seeds as usize);
    for offset in 0..seeds {
        let mut config = base.clone();
        config.seed = base.seed.wrapping_add(offset);
        bests.push(crate::orchestrator::run(&config)?.best_mean_accuracy);
    }
    Ok(bests)
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let loaded = args.config.load()?;
    let mut sink = MetricsSink::new(loaded.output.csv.as_deref(), loaded.output.json.as_deref())?;
    let report = run_observed(&loaded.run, &mut |record| sink.emit_round(record))?;
    sink.emit_summary(&report)?;
    println!(
        "method={} seed={} rounds={} best_mean_accuracy={:.6} best_round={} final_mean_accuracy={:.6} wall_clock={:.2}s",
        report.config.method.name(),
        report.config.seed,
        report.rounds.len(),
        report.best_mean_accuracy,
        report.best_round,
        report.final_mean_accuracy(),
        report.wall_clock_seconds
    );
    Ok(())
}

fn cmd_partition(args: &PartitionArgs) -> Result<()> {
    let loaded = args.config.load()?;
    let ds = build_dataset(&loaded.run)?;
    let spec = build_partition(&loaded.run, &ds)?;
    let file = std::fs::File::create(&args.out).map_err(|e| Error::io(&args.out, e))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &spec)?;
    println!(
        "wrote partition for {} clients to {}",
        spec.clients.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct ToyRow {
    lambda: f64,
    seeds: u64,
    /// End-of-training accuracy, the quantity the pull/push experiment is
    /// about: the pairwise term's effect compounds over rounds.
    mean_final_accuracy: f64,
    std_final_accuracy: f64,
    mean_best_accuracy: f64,
    per_seed_final: Vec<f64>,
    per_seed_best: Vec<f64>,
}

fn cmd_toy(args: &ToyArgs) -> Result<()> {
    let loaded = args.config.load()?;
    let mut rows = Vec::new();
    for &lambda in &args.lambdas {
        let mut config = loaded.run.clone();
        config.method = Method::ToyPullpush;
        config.toy_lambda = lambda;
        config.validate()?;
        let mut finals = Vec::with_capacity(args.seeds as usize);
        let mut bests = Vec::with_capacity(args.seeds as usize);
        for offset in 0..args.seeds {
            let mut c = config.clone();
            c.seed = config.seed.wrapping_add(offset);
            let report = crate::orchestrator::run(&c)?;
            finals.push(report.final_mean_accuracy());
            bests.push(report.best_mean_accuracy);
        }
        let (mean, std) = mean_std(&finals);
        let (mean_best, _) = mean_std(&bests);
        println!(
            "lambda={lambda:0.4} seeds={} mean_final_accuracy={mean:.6} std={std:.6} mean_best_accuracy={mean_best:.6}",
            args.seeds
        );
        rows.push(ToyRow {
            lambda,
            seeds: args.seeds,
            mean_final_accuracy: mean,
            std_final_accuracy: std,
            mean_best_accuracy: mean_best,
            per_seed_final: finals,
            per_seed_best: bests,
        });
    }
    if let Some(path) = &args.out {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &rows)?;
    }
    Ok(())
}

fn cmd_check_grad(args: &CheckGradArgs) -> Result<()> {
    let suites = [
        crate::check::check_combination_identity(args.pools, args.seed),
        crate::check::check_distance_grad(args.instances, args.seed),
        crate::check::check_cross_entropy_grad(args.instances, args.seed),
    ];
    let mut all_passed = true;
    for suite in &suites {
        println!("{}", suite.line());
        all_passed &= suite.passed;
    }
    if !all_passed {
        return Err(Error::NonFinite("self-check failure"));
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct SweepRow {
    overrides: Vec<(String, String)>,
    seeds: u64,
    mean_best_accuracy: f64,
    std_best_accuracy: f64,
    per_seed: Vec<f64>,
}

fn grid_cells(axes: &[String]) -> Result<Vec<Vec<(String, String)>>> {
    let mut cells: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for axis in axes {
        let (key, values) = axis.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("--grid expects key=v1,v2,..., got {axis:?}"))
        })?;
        let values: Vec<&str> = values.split(',').filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "--grid axis {key:?} has no values"
            )));
        }
        let mut next = Vec::with_capacity(cells.len() * values.len());
        for cell in &cells {
            for v in &values {
                let mut c = cell.clone();
                c.push((key.trim().to_string(), v.trim().to_string()));
                next.push(c);
            }
        }
        cells = next;
    }
    Ok(cells)
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let loaded = args.config.load()?;
    let mut rows = Vec::new();
    for cell in grid_cells(&args.grid)? {
        let mut wrapped = LoadedConfig {
            run: loaded.run.clone(),
            output: Default::default(),
        };
        for (k, v) in &cell {
            apply_key(&mut wrapped, k, v)?;
        }
        wrapped.run.validate()?;
        let bests = best_over_seeds(&wrapped.run, args.seeds)?;
        let (mean, std) = mean_std(&bests);
        let label = if cell.is_empty() {
            "defaults".to_string()
        } else {
            cell.iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        println!(
            "{label} seeds={} mean_best_accuracy={mean:.6} std={std:.6}",
            args.seeds
        );
        rows.push(SweepRow {
            overrides: cell,
            seeds: args.seeds,
            mean_best_accuracy: mean,
            std_best_accuracy: std,
            per_seed: bests,
        });
    }
    if let Some(path) = &args.out {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &rows)?;
    }
    Ok(())
}

/// Parse and execute a full argv (including the program name). Returns the
/// process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version exit successfully.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Partition(args) => cmd_partition(args),
        Command::Toy(args) => cmd_toy(args),
        Command::CheckGrad(args) => cmd_check_grad(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

