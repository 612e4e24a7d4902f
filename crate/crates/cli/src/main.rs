//! `spinex`: generate data, fit and apply models, explain predictions, run benchmarks.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spinex_core::bench::report::{bar_chart_svg, heatmap_svg, parse_formats};
use spinex_core::bench::{builtin_suite, emit_report, run_experiment_outcome, ExperimentSpec};
use spinex_core::data::{load_csv, load_query_csv};
use spinex_core::explain::explanation_report;
use spinex_core::synthgen::{
    gen_classification, gen_regression, write_generated_csv, ClassificationGenSpec, GenSpec, RegressionFamily,
    RegressionGenSpec,
};
use spinex_core::{FittedModel, Predictions, Predictor, SpinexConfig, SpinexError, Task};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "spinex", version, about = "Similarity-based prediction with explainable neighbors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV.
    Gen(GenArgs),
    /// Fit a model on a CSV dataset and save it.
    Fit(FitArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Explain a saved SPINEX model on a query set.
    Explain(ExplainArgs),
    /// Run a cross-validated benchmark suite.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Regression family (linear, synthetic, cubic, ...) or `classification`.
    #[arg(long)]
    family: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    features: usize,
    #[arg(long)]
    informative: Option<usize>,
    #[arg(long, default_value_t = 0)]
    redundant: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    outliers: usize,
    #[arg(long, default_value_t = 0.0)]
    bias: f64,
    #[arg(long)]
    no_shuffle: bool,
    #[arg(long)]
    effective_rank: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    tail_strength: f64,
    /// Class proportions, e.g. `0.9,0.1`.
    #[arg(long, default_value = "0.5,0.5")]
    weights: String,
    #[arg(long, default_value_t = 0.01)]
    flip_y: f64,
    #[arg(long, default_value_t = 1.0)]
    class_sep: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    task: Task,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "target")]
    target: String,
    /// JSON file with SpinexConfig fields; absent fields take the task defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Row of the query set to explain locally.
    #[arg(long)]
    instance: Option<usize>,
    /// Largest feature-subset size for combination impacts.
    #[arg(long)]
    combinations: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Directory for importance and interaction charts.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    suite: Option<String>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Overrides the manifest seed; built-in suites default to 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "json,csv,md")]
    formats: String,
    #[arg(long)]
    out: PathBuf,
    /// Add per-fold rows to the CSV output.
    #[arg(long)]
    per_fold: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Explain(a) => explain(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &SpinexError) -> u8 {
    match e {
        SpinexError::InvalidConfig(_) | SpinexError::InvalidSpec(_) => EXIT_USAGE,
        e if e.is_data_error() => EXIT_DATA,
        _ => EXIT_RUNTIME,
    }
}

fn io_error(path: &Path, e: std::io::Error) -> SpinexError {
    SpinexError::Io { path: path.to_path_buf(), source: e }
}

fn read_to_string(path: &Path) -> Result<String, SpinexError> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn gen(a: GenArgs) -> Result<(), SpinexError> {
    let spec = if a.family.eq_ignore_ascii_case("classification") {
        let weights: Vec<f64> = a
            .weights
            .split(',')
            .map(|w| w.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| SpinexError::InvalidSpec(format!("bad --weights '{}'", a.weights)))?;
        let [w0, w1] = weights[..] else {
            return Err(SpinexError::InvalidSpec("--weights takes two proportions".into()));
        };
        GenSpec::Classification(ClassificationGenSpec {
            n_samples: a.n,
            n_features: a.features,
            n_informative: a.informative.unwrap_or(a.features.min(2)),
            n_redundant: a.redundant,
            weights: [w0, w1],
            flip_y: a.flip_y,
            class_sep: a.class_sep,
            seed: a.seed,
        })
    } else {
        GenSpec::Regression(RegressionGenSpec {
            family: a.family.parse::<RegressionFamily>()?,
            n_samples: a.n,
            n_features: a.features,
            n_informative: a.informative,
            noise: a.noise,
            n_outliers: a.outliers,
            bias: a.bias,
            shuffle: !a.no_shuffle,
            effective_rank: a.effective_rank,
            tail_strength: a.tail_strength,
            seed: a.seed,
        })
    };
    let generated = match &spec {
        GenSpec::Regression(s) => gen_regression(s)?,
        GenSpec::Classification(s) => gen_classification(s)?,
    };
    write_generated_csv(&spec, &generated, &a.out)?;
    eprintln!(
        "wrote {} rows x {} features to {}",
        generated.dataset.n_samples(),
        generated.dataset.n_features(),
        a.out.display()
    );
    Ok(())
}

fn fit(a: FitArgs) -> Result<(), SpinexError> {
    let config = match &a.config {
        Some(path) => SpinexConfig::from_json_for_task(&read_to_string(path)?, a.task)?,
        None => SpinexConfig::default_for(a.task),
    };
    let data = load_csv(&a.data, &a.target, a.task)?;
    let model = FittedModel::fit(&config, &data)?;
    model.save(&a.out)?;
    eprintln!("fitted {} model on {} rows; saved to {}", a.task.as_str(), data.n_samples(), a.out.display());
    Ok(())
}

fn predict(a: PredictArgs) -> Result<(), SpinexError> {
    let model = FittedModel::load(&a.model)?;
    let x = load_query_csv(&a.data, model.feature_names())?;
    let predictions = model.predict(x.view())?;
    let proba = match model.task() {
        Task::Classification => Some(model.predict_proba(x.view())?),
        Task::Regression => None,
    };
    let file = File::create(&a.out).map_err(|e| io_error(&a.out, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["prediction".to_owned()];
    if let Some(p) = &proba {
        header.extend((0..p.ncols()).map(|k| format!("p_{k}")));
    }
    w.write_record(&header).map_err(SpinexError::Csv)?;
    for i in 0..predictions.len() {
        let mut row = vec![match &predictions {
            Predictions::Values(v) => format!("{:?}", v[i]),
            Predictions::Labels(v) => v[i].to_string(),
        }];
        if let Some(p) = &proba {
            row.extend(p.row(i).iter().map(|v| format!("{v:?}")));
        }
        w.write_record(&row).map_err(SpinexError::Csv)?;
    }
    w.flush().map_err(|e| io_error(&a.out, e))?;
    eprintln!("wrote {} predictions to {}", predictions.len(), a.out.display());
    Ok(())
}

fn explain(a: ExplainArgs) -> Result<(), SpinexError> {
    let model = FittedModel::load(&a.model)?;
    let spinex = model
        .as_spinex()
        .ok_or_else(|| SpinexError::InvalidConfig("explanations need a single SPINEX model, not an ensemble".into()))?;
    let x = load_query_csv(&a.data, spinex.feature_names())?;
    let report = explanation_report(spinex, x.view(), a.instance, a.combinations)?;
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(&a.out, json).map_err(|e| io_error(&a.out, e))?;
    if let Some(dir) = &a.svg {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let charts = [
            (
                "importance.svg",
                bar_chart_svg("Global feature importance", &report.feature_names, &report.global_importance),
            ),
            (
                "interactions.svg",
                heatmap_svg("Mean interaction effects", &report.feature_names, &report.mean_interactions.values),
            ),
        ];
        for (name, svg) in charts {
            let path = dir.join(name);
            std::fs::write(&path, svg).map_err(|e| io_error(&path, e))?;
        }
    }
    eprintln!("explained {} rows; report at {}", report.n_instances, a.out.display());
    Ok(())
}

fn bench(a: BenchArgs) -> Result<(), SpinexError> {
    let formats = parse_formats(&a.formats)?;
    let mut spec = match (&a.suite, &a.manifest) {
        (_, Some(path)) => {
            let mut spec = ExperimentSpec::from_json(&read_to_string(path)?)?;
            if let Some(seed) = a.seed {
                spec.seed = seed;
            }
            spec
        }
        (Some(name), None) => builtin_suite(name, a.seed.unwrap_or(0))?,
        (None, None) => unreachable!("clap requires --suite or --manifest"),
    };
    spec.output_dir = Some(a.out.clone());
    let outcome = run_experiment_outcome(&spec)?;
    let report = &outcome.report;
    let written = emit_report(report, &formats, &a.out, a.per_fold)?;

    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "suite: {}", report.spec.suite);
    if let Some(table) = &report.rank_tables.accuracy_group {
        for row in &table.rows {
            let _ = writeln!(stdout, "  rank {:>2}  rank_sum {:>3}  {}", row.overall_rank, row.rank_sum, row.model);
        }
    }
    for w in &report.warnings {
        let _ = writeln!(stdout, "warning: {w}");
    }
    for path in &written {
        let _ = writeln!(stdout, "wrote {}", path.display());
    }
    let _ = writeln!(stdout, "elapsed_s: {:.3}", report.wall_clock.elapsed_s);
    let _ = writeln!(stdout, "determinism_hash: {}", report.determinism_hash);
    match outcome.error {
        Some(e) => {
            let _ = writeln!(stdout, "partial report: run aborted");
            Err(e)
        }
        None => Ok(()),
    }
}
