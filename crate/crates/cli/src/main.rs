//! `mixsel` — variable selection and classification for mixed
//! continuous/binary discriminant analysis.
//!
//! Subcommands: `select` (rank variables and pick the discriminating
//! subset), `classify` (location-model rules on train/test CSVs), `tune`
//! (leave-one-out grids for α/β or the smoothing λ), and `simulate`
//! (replicated synthetic benchmarks).
//!
//! Exit codes: 0 success, 2 usage or configuration, 3 data validation,
//! 4 numerical failure, 5 I/O.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mixsel::classifier::{classification_capacity, classify, fit_classifier_with};
use mixsel::criterion::VariableSet;
use mixsel::data::{load_csv, CsvSchema, Dataset};
use mixsel::error::Error;
use mixsel::estimators::estimate_smoothed;
use mixsel::selection::{select_variables, EstimatorKind, PenaltyFamily, SelectionConfig};
use mixsel::simulation::{
    builtin_names, builtin_scenario, load_scenario, run_scenario, write_scenario_csv, RowConfig,
};
use mixsel::tuning::{loocv_alpha_beta, tune_lambda, TuningGrid};

#[derive(Parser)]
#[command(name = "mixsel", version, about = "Variable selection for mixed-variable discriminant analysis")]
struct Cli {
    /// Worker threads for replication/grid parallelism (output is identical
    /// for any value)
    #[arg(long, global = true, env = "MIXSEL_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select the discriminating continuous variables from a CSV sample
    Select(SelectArgs),
    /// Classify a test CSV with location-model rules fitted on a training CSV
    Classify(ClassifyArgs),
    /// Leave-one-out cross-validation grids for (alpha, beta) or lambda
    Tune(TuneArgs),
    /// Replicated synthetic benchmarks (built-in or file-defined scenarios)
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct DataShape {
    /// Number of continuous variables (columns x1..xp)
    #[arg(long)]
    p: usize,
    /// Number of binary variables (columns y1..yd)
    #[arg(long)]
    d: usize,
    /// Number of groups (labels 1..q in column z)
    #[arg(long)]
    q: usize,
}

#[derive(Args)]
struct EstimatorArgs {
    /// Cell-moment estimator: empirical frequencies or kernel smoothing
    /// across cells
    #[arg(long, default_value = "empirical", value_parser = ["empirical", "smoothed"])]
    estimator: String,
    /// Smoothing level λ ∈ [0,1): cell (m,k) borrows weight λ^D(m,k) at
    /// Hamming dissimilarity D (used with --estimator smoothed)
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
}

impl EstimatorArgs {
    fn kind(&self) -> EstimatorKind<f64> {
        match self.estimator.as_str() {
            "smoothed" => EstimatorKind::Smoothed { lambda: self.lambda },
            _ => EstimatorKind::Empirical,
        }
    }
}

#[derive(Args)]
struct SelectArgs {
    /// Input CSV with header x1..xp,y1..yd,z
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    shape: DataShape,
    /// Ordering-penalty exponent α ∈ (0, 1/2): f_n(i) = n^-α / h(i)
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    /// Dimension-penalty exponent β ∈ (0, 1): g_n(i) = n^-β · h(i)
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// Penalty shape family h1..h13 (h(x): x, x^0.1, x^0.5, x^0.9, x^10,
    /// then logarithmic and x·log x variants, all with log(x+1) guarding)
    #[arg(long, default_value = "h7")]
    penalty: String,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Write the full selection report (sigma, s_hat, phi, psi, criterion
    /// traces) as JSON
    #[arg(long)]
    report: Option<PathBuf>,
    /// Include the per-cell estimates (p_m, p_l_given_m, mu_m, mu_lm, V_m)
    /// in the JSON report
    #[arg(long)]
    dump_estimates: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Training CSV
    #[arg(long)]
    train: PathBuf,
    /// Test CSV (same schema)
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    shape: DataShape,
    /// Comma-separated 1-based variable subset to classify on
    /// (default: all variables)
    #[arg(long)]
    vars: Option<String>,
    /// Two-group cost constant α in the allocation threshold
    /// log(p_m2/p_m1) + log(α)
    #[arg(long, default_value_t = 1.0)]
    alpha_cost: f64,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Write per-row predictions as CSV (default: stdout)
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    /// Training CSV
    #[arg(long)]
    train: PathBuf,
    #[command(flatten)]
    shape: DataShape,
    /// Seed recorded with the report (leave-one-out itself is deterministic)
    #[arg(long)]
    seed: u64,
    /// Comma-separated α grid in (0, 1/2)
    #[arg(long)]
    grid_alpha: Option<String>,
    /// Comma-separated β grid in (0, 1)
    #[arg(long)]
    grid_beta: Option<String>,
    /// Comma-separated λ grid in [0, 1)
    #[arg(long)]
    grid_lambda: Option<String>,
    /// Tune the smoothing λ instead of (α, β)
    #[arg(long)]
    tune_lambda: bool,
    /// Penalty shape family h1..h13
    #[arg(long, default_value = "h7")]
    penalty: String,
    /// Fixed α used while tuning λ
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    /// Fixed β used while tuning λ
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Write the CV table as CSV (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in scenario name (paper-table1, paper-table2, paper-fig1)
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    /// Scenario file (TOML key-value text)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replication count override
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed (replication streams derive from it)
    #[arg(long)]
    seed: u64,
    /// Write the row table as CSV (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // ignore failure: the global pool may already exist in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", render_error(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Validation { .. } | Error::Csv(_) => 3,
        Error::SingularSubmatrix { .. } | Error::Numerical(_) | Error::UndefinedCell { .. } => 4,
        Error::Io(_) => 5,
    }
}

fn render_error(err: &Error) -> String {
    let class = match err {
        Error::Config(_) => "usage",
        Error::Validation { .. } | Error::Csv(_) => "data",
        Error::SingularSubmatrix { .. } | Error::Numerical(_) | Error::UndefinedCell { .. } => "numeric",
        Error::Io(_) => "io",
    };
    format!("error[{class}]: {err}")
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Select(args) => cmd_select(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Tune(args) => cmd_tune(args),
        Command::Simulate(args) => cmd_simulate(args),
    }
}

fn load_dataset(path: &PathBuf, shape: &DataShape) -> Result<Dataset<f64>, Error> {
    load_csv(path, CsvSchema { p: shape.p, d: shape.d, q: shape.q })
}

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("invalid {what} entry '{s}'")))
        })
        .collect()
}

fn cmd_select(args: SelectArgs) -> Result<(), Error> {
    let ds = load_dataset(&args.input, &args.shape)?;
    let penalty: PenaltyFamily = args.penalty.parse()?;
    let cfg = SelectionConfig { alpha: args.alpha, beta: args.beta, penalty, estimator: args.estimator.kind() };
    let result = select_variables(&ds, &cfg)?;
    let selected: Vec<String> = result.selected.iter().map(|i| i.to_string()).collect();
    println!("selected: {}", selected.join(","));
    println!(
        "sigma: {}  s_hat: {}",
        result.sigma.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","),
        result.s_hat
    );
    if let Some(path) = args.report {
        let mut doc = serde_json::to_value(&result).expect("serializable report");
        if args.dump_estimates {
            let est = cfg.estimator.estimate(&ds)?;
            doc["estimates"] = serde_json::to_value(&est).expect("serializable estimates");
        }
        let file = File::create(&path)?;
        serde_json::to_writer_pretty(BufWriter::new(file), &doc).map_err(|e| Error::Numerical(e.to_string()))?;
        println!("report: {}", path.display());
    }
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> Result<(), Error> {
    let train = load_dataset(&args.train, &args.shape)?;
    let test = load_dataset(&args.test, &args.shape)?;
    let subset = match &args.vars {
        Some(text) => {
            let indices = text
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("invalid variable index '{s}'")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            VariableSet::new(indices)
        }
        None => VariableSet::full(args.shape.p),
    };
    subset.check_within(args.shape.p)?;
    let est = match args.estimator.kind() {
        EstimatorKind::Empirical => mixsel::estimators::estimate_empirical(&train),
        EstimatorKind::Smoothed { lambda } => estimate_smoothed(&train, lambda)?,
    };
    let model = fit_classifier_with(&train, &est, &subset, args.alpha_cost)?;

    let mut out: Box<dyn Write> = match &args.predictions {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(out, "row,predicted,actual")?;
    for (i, obs) in test.observations().iter().enumerate() {
        match classify(&model, &obs.x, &obs.y) {
            Ok(pred) => writeln!(out, "{},{},{}", i + 1, pred, obs.z)?,
            Err(Error::UndefinedCell { .. }) => writeln!(out, "{},undefined,{}", i + 1, obs.z)?,
            Err(other) => return Err(other),
        }
    }
    out.flush()?;
    drop(out);
    let report = classification_capacity(&model, &test)?;
    println!(
        "cc: {:.5}  correct: {}/{}  undefined_cells: {}",
        report.capacity, report.correct, report.total, report.undefined_cells
    );
    Ok(())
}

fn cmd_tune(args: TuneArgs) -> Result<(), Error> {
    let ds = load_dataset(&args.train, &args.shape)?;
    let penalty: PenaltyFamily = args.penalty.parse()?;
    let template = SelectionConfig {
        alpha: args.alpha,
        beta: args.beta,
        penalty,
        estimator: args.estimator.kind(),
    };
    let defaults = TuningGrid::<f64>::default();
    let mut out: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    if args.tune_lambda {
        let lambdas = match &args.grid_lambda {
            Some(text) => parse_f64_list(text, "lambda")?,
            None => defaults.lambdas,
        };
        let report = tune_lambda(&ds, &lambdas, &template)?;
        writeln!(out, "lambda,cv,failures")?;
        for e in &report.entries {
            writeln!(out, "{},{:.6},{}", e.lambda, e.cv, e.failures)?;
        }
        out.flush()?;
        drop(out);
        println!("seed: {}", args.seed);
        println!("best: lambda={} cv={:.6}", report.best_lambda, report.best_cv);
    } else {
        let grid = TuningGrid {
            alphas: match &args.grid_alpha {
                Some(text) => parse_f64_list(text, "alpha")?,
                None => defaults.alphas,
            },
            betas: match &args.grid_beta {
                Some(text) => parse_f64_list(text, "beta")?,
                None => defaults.betas,
            },
            lambdas: vec![0.0],
        };
        let report = loocv_alpha_beta(&ds, &grid, &template)?;
        writeln!(out, "alpha,beta,cv,failures")?;
        for e in &report.entries {
            writeln!(out, "{},{},{:.6},{}", e.alpha, e.beta, e.cv, e.failures)?;
        }
        out.flush()?;
        drop(out);
        println!("seed: {}", args.seed);
        println!(
            "best: alpha={} beta={} cv={:.6}",
            report.best_alpha, report.best_beta, report.best_cv
        );
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    let scenario = match (&args.scenario, &args.config) {
        (Some(name), None) => builtin_scenario(name, args.seed).ok_or_else(|| {
            Error::Config(format!(
                "unknown scenario '{name}'; valid names: {}",
                builtin_names().join(", ")
            ))
        })?,
        (None, Some(path)) => load_scenario(path)?,
        _ => return Err(Error::Config("exactly one of --scenario or --config is required".into())),
    };
    let scenario = scenario.with_overrides(&RowConfig { reps: args.reps, seed: Some(args.seed) });
    let report = run_scenario(&scenario)?;
    match &args.output {
        Some(path) => {
            let file = File::create(path)?;
            write_scenario_csv(&report, BufWriter::new(file))?;
            println!("scenario: {}  seed: {}  rows: {}", report.scenario, report.seed, report.rows.len());
            for row in &report.rows {
                println!(
                    "  {}: mean_cc={:.5} succeeded={}/{} failures={}",
                    row.label, row.report.mean_cc, row.report.succeeded, row.report.replications, row.report.failures
                );
            }
            for note in &report.notes {
                println!("note: {note}");
            }
            println!("csv: {}", path.display());
        }
        None => {
            write_scenario_csv(&report, std::io::stdout().lock())?;
            for note in &report.notes {
                eprintln!("note: {note}");
            }
        }
    }
    Ok(())
}
