//! `advda`: run the domain-adaptation experiments from the command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 degenerate
//! metric (e.g. a test split with a single class).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use advda::data::{
    featurize_timeseries, los_bucketize, save_csv, synth_shifted_domains, timeseries_feature_names, CsvSchema, Dataset,
    Episode, EpisodeMeta, SynthConfig,
};
use advda::harness::{
    run_five_way, run_shift_matrix, run_sparsity_comparison, with_threads, DataSource, ExperimentConfig, RunReport,
    SavedModel,
};
use advda::{evaluate, rng, Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "advda",
    version,
    about = "Adversarial-sample-enhanced domain adaptation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a pair of synthetic shifted domains as CSV files.
    Synth(SynthArgs),
    /// Train on each domain (and on all pooled), evaluate on every domain.
    ShiftMatrix(RunArgs),
    /// Compare the two baselines with the three transfer regimes.
    FiveWay(RunArgs),
    /// Compare adversarially trained, L1-regularized and plain weights.
    Sparsity(RunArgs),
    /// Turn episode time series into one summary-feature row per episode.
    Featurize(FeaturizeArgs),
    /// Score a saved model on a dataset.
    Eval(EvalArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML). Defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; the report goes to stdout when neither this nor `output` is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Comma-separated α values, overriding the config.
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,
    /// Comma-separated λ values, overriding the config.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    /// Attack radius, overriding the config.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Attack iterations, overriding the config.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    /// Configuration whose `[data]` table (kind = "synth") sets the generator.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run seed; the generator seed is derived from it as in the experiment runners.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelSource {
    /// `labels` from the episode metadata if every episode has them, else the
    /// length-of-stay bucket if every episode has `los_hours`, else none.
    Auto,
    Labels,
    Los,
    None,
}

#[derive(Args)]
struct FeaturizeArgs {
    /// Episode files with columns `variable,time_hours,value`. Each needs a
    /// sidecar `<name>.toml` with at least `length_hours`.
    #[arg(required = true)]
    episodes: Vec<PathBuf>,
    /// Feature CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated variable order; defaults to first appearance across files.
    #[arg(long, value_delimiter = ',')]
    variables: Option<Vec<String>>,
    /// Value statistics of empty windows.
    #[arg(long, default_value_t = 0.0)]
    fill: f64,
    #[arg(long, value_enum, default_value_t = LabelSource::Auto)]
    label: LabelSource,
}

#[derive(Args)]
struct EvalArgs {
    /// Model file written by `five-way` (models_dir).
    #[arg(long)]
    model: PathBuf,
    /// Dataset CSV with the model's feature columns and label columns `y0..`.
    #[arg(long)]
    data: PathBuf,
    /// Categorical column to ignore, when not called `group`.
    #[arg(long)]
    group_column: Option<String>,
    /// Where to write the metrics; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::ShiftMatrix(a) => experiment(a, |cfg| emit(run_shift_matrix(cfg)?, cfg)),
        Command::FiveWay(a) => experiment(a, |cfg| {
            let report = run_five_way(cfg)?;
            for s in &report.body.summary {
                log::info!("{}: mean {:.4} over {} seeds", s.regime, s.test.mean, s.test.n);
            }
            emit(report, cfg)
        }),
        Command::Sparsity(a) => experiment(a, |cfg| {
            let report = run_sparsity_comparison(cfg)?;
            log::info!(
                "cos(adv, L1) mean {:.4}; above shuffled in {}/{} seeds",
                report.body.cos_adv_l1.mean,
                report.body.seeds_above_shuffled,
                report.body.seeds.len()
            );
            emit(report, cfg)
        }),
        Command::Featurize(a) => featurize(a),
        Command::Eval(a) => eval(a),
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_file(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn experiment(args: RunArgs, run: impl FnOnce(&ExperimentConfig) -> Result<()> + Send) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = args.out {
        cfg.output = Some(out);
    }
    if let Some(alphas) = args.alpha_grid {
        cfg.alphas = alphas;
    }
    if let Some(lambdas) = args.lambda_grid {
        cfg.lambdas = lambdas;
    }
    if let Some(eps) = args.epsilon {
        cfg.adv.epsilon = eps;
    }
    if let Some(steps) = args.steps {
        cfg.adv.steps = steps;
    }
    cfg.validate()?;
    with_threads(args.threads, || run(&cfg))?
}

fn emit<B: Serialize>(report: RunReport<B>, cfg: &ExperimentConfig) -> Result<()> {
    log::info!("{} finished in {:.2}s", report.header.command, report.wall_time_seconds);
    match &cfg.output {
        Some(path) => {
            report.write(path)?;
            log::info!("report written to {}", path.display());
            Ok(())
        }
        None => print_stdout(&report.to_json()?),
    }
}

fn print_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
}

#[derive(Serialize)]
struct SynthTruth {
    seed: u64,
    generator_seed: u64,
    config: SynthConfig,
    theta_source: Vec<f64>,
    theta_target: Vec<f64>,
}

fn synth(args: SynthArgs) -> Result<()> {
    let base = match args.config {
        Some(p) => match ExperimentConfig::from_file(&p)?.data {
            DataSource::Synth(s) => s,
            _ => {
                return Err(Error::Config(format!(
                    "{}: [data] is not a synth generator",
                    p.display()
                )))
            }
        },
        None => SynthConfig::default(),
    };
    let cfg = SynthConfig {
        seed: rng::derive_seed(args.seed, "synth"),
        ..base
    };
    let domains = synth_shifted_domains(&cfg)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    save_csv(&domains.source, args.out.join("source.csv"))?;
    save_csv(&domains.target, args.out.join("target.csv"))?;
    save_csv(
        &Dataset::concat(&[&domains.source, &domains.target])?,
        args.out.join("domains.csv"),
    )?;
    let truth = SynthTruth {
        seed: args.seed,
        generator_seed: cfg.seed,
        theta_source: domains.theta_source.as_slice().to_vec(),
        theta_target: domains.theta_target.as_slice().to_vec(),
        config: cfg,
    };
    let path = args.out.join("truth.toml");
    let text = toml::to_string(&truth).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    log::info!(
        "wrote {} source and {} target rows to {}",
        domains.source.n_rows(),
        domains.target.n_rows(),
        args.out.display()
    );
    Ok(())
}

fn featurize(args: FeaturizeArgs) -> Result<()> {
    let variables = match args.variables {
        Some(v) => v,
        None => {
            let mut names: Vec<String> = Vec::new();
            for path in &args.episodes {
                for n in Episode::variable_names(path)? {
                    if !names.contains(&n) {
                        names.push(n);
                    }
                }
            }
            names
        }
    };
    let mut rows = Vec::with_capacity(args.episodes.len());
    for path in &args.episodes {
        let meta = EpisodeMeta::read_toml(path.with_extension("toml"))?;
        let ep = Episode::read_csv(path, &variables, meta)?;
        let features = featurize_timeseries(&ep, args.fill)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        rows.push((name, features, ep.meta));
    }

    let all_labels = rows.iter().all(|(_, _, m)| m.labels.is_some());
    let all_los = rows.iter().all(|(_, _, m)| m.los_hours.is_some());
    let source = match args.label {
        LabelSource::Auto if all_labels => LabelSource::Labels,
        LabelSource::Auto if all_los => LabelSource::Los,
        LabelSource::Auto => LabelSource::None,
        LabelSource::Labels if !all_labels => return Err(Error::Data("some episodes have no labels".into())),
        LabelSource::Los if !all_los => return Err(Error::Data("some episodes have no los_hours".into())),
        other => other,
    };
    let labels: Vec<Vec<f64>> = rows
        .iter()
        .map(|(_, _, m)| -> Result<Vec<f64>> {
            Ok(match source {
                LabelSource::Labels => m.labels.clone().unwrap_or_default(),
                LabelSource::Los => vec![los_bucketize(m.los_hours.unwrap_or_default())? as f64],
                _ => Vec::new(),
            })
        })
        .collect::<Result<_>>()?;
    let k = labels.first().map_or(0, Vec::len);
    if labels.iter().any(|l| l.len() != k) {
        return Err(Error::Data("episodes disagree on the number of labels".into()));
    }

    let mut w = csv::Writer::from_path(&args.out)?;
    let mut header = timeseries_feature_names(&variables);
    header.extend((0..k).map(|j| format!("y{j}")));
    header.push("episode".to_string());
    w.write_record(&header)?;
    for ((name, features, _), y) in rows.iter().zip(&labels) {
        let mut record: Vec<String> = features.iter().chain(y).map(f64::to_string).collect();
        record.push(name.clone());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(&args.out, e))?;
    log::info!(
        "{} episodes × {} features written to {}",
        rows.len(),
        header.len() - k - 1,
        args.out.display()
    );
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let model = SavedModel::load(&args.model)?;
    let schema = CsvSchema {
        group_column: args.group_column,
        ..CsvSchema::new(model.bank.task())
    };
    let (data, summary) = advda::data::load_csv(&args.data, &schema)?;
    if summary.imputed_cells > 0 {
        log::warn!("{} missing cells were mean-imputed", summary.imputed_cells);
    }
    let metrics = evaluate(&model.bank, &model.prepare(&data)?)?;
    log::info!(
        "{} = {:.4} on {} rows",
        metrics.metric_name,
        metrics.headline,
        metrics.n_eval
    );
    let text = serde_json::to_string_pretty(&metrics).map_err(|e| Error::Data(e.to_string()))?;
    match args.out {
        Some(path) => fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e)),
        None => print_stdout(&text),
    }
}
