mod config;
mod error;
mod manifest;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use koopman_core::dynamics::{generate_train_test, load_dataset, save_dataset, Dataset, EquationName};
use koopman_core::gridsearch::{
    effect_table, mean_effect, mean_relative_times, operator_study, read_results, run_search,
    study_table, times_table, top_k, top_k_table, Dimension, RunResult, Table,
};
use koopman_core::koopman::{save_checkpoint, KoopmanModel};
use koopman_core::training::{fit, History, RunStatus};

use config::ExperimentConfig;
use error::{CliError, EXIT_DIVERGED};
use manifest::Manifest;

const TRAIN_FILE: &str = "train.dataset";
const TEST_FILE: &str = "test.dataset";

#[derive(Parser)]
#[command(name = "koopman", version, about = "Koopman autoencoder experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured equation and write train/test dataset files.
    GenerateData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one configuration; writes a checkpoint and the history CSV.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Directory written by generate-data; generated in memory when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the configured search space, one result row per run and epoch.
    GridSearch {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Defaults to search.output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Keep complete runs of an existing results file.
        #[arg(long)]
        resume: bool,
    },
    /// Aggregate a results file into a report CSV and print it.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum)]
        analysis: Analysis,
        /// Defaults to the last evaluated epoch (all epochs for mean-effect).
        #[arg(long)]
        epoch: Option<usize>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Option dimension for mean-effect and relative-times; all when omitted.
        #[arg(long)]
        dimension: Option<String>,
        /// Report path; defaults to `<analysis>.csv` beside the results.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every operator form against every operator loss, full accuracy plus reconstruction.
    OperatorStudy {
        /// Overrides data.equation.
        #[arg(long)]
        equation: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        resume: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Analysis {
    MeanEffect,
    TopK,
    RelativeTimes,
}

impl Analysis {
    fn file_name(self) -> &'static str {
        match self {
            Analysis::MeanEffect => "mean_effect.csv",
            Analysis::TopK => "top_k.csv",
            Analysis::RelativeTimes => "relative_times.csv",
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::failure(format!("{}: {e}", dir.display())))
}

fn datasets(cfg: &ExperimentConfig, data: Option<&Path>) -> Result<(Dataset, Dataset), CliError> {
    match data {
        Some(dir) => Ok((load_dataset(&dir.join(TRAIN_FILE))?, load_dataset(&dir.join(TEST_FILE))?)),
        None => {
            let d = &cfg.data;
            Ok(generate_train_test(&cfg.equation()?, d.n_train, d.n_test, d.n_steps, d.dt, d.seed)?)
        }
    }
}

fn generate_data(config: &Path, out: &Path) -> Result<(), CliError> {
    let (cfg, raw) = ExperimentConfig::load(config)?;
    let (train, test) = datasets(&cfg, None)?;
    create_dir(out)?;
    save_dataset(&train, &out.join(TRAIN_FILE))?;
    save_dataset(&test, &out.join(TEST_FILE))?;
    let mut manifest = Manifest::new("generate-data", &raw, cfg.data.seed, cfg.train.seed);
    manifest.files = vec![TRAIN_FILE.into(), TEST_FILE.into()];
    manifest.write(out)?;
    println!(
        "{}: {} train / {} test trajectories, {} steps, dt = {}, state dim {}",
        train.equation,
        train.len(),
        test.len(),
        train.n_steps,
        train.dt,
        train.state_dim
    );
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn history_csv(h: &History) -> String {
    let mut s = String::from(
        "epoch,train_total,train_accuracy,train_embedding,train_operator,train_auxiliary,test_error,wall_time_s\n",
    );
    for r in &h.records {
        let t = r.train.as_ref();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.epoch,
            opt(t.map(|b| b.total)),
            opt(t.map(|b| b.accuracy)),
            opt(t.and_then(|b| b.embedding)),
            opt(t.and_then(|b| b.operator)),
            opt(t.and_then(|b| b.auxiliary)),
            r.test_error,
            r.wall_time_s
        );
    }
    s
}

fn train(config: &Path, data: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let (cfg, raw) = ExperimentConfig::load(config)?;
    let (train, test) = datasets(&cfg, data)?;
    let mut model = KoopmanModel::new(cfg.model_config(cfg.model.encoding_dim)?)?;
    let history = fit(&mut model, &train, &test, &cfg.train_config()?)?;
    create_dir(out)?;
    fs::write(out.join("history.csv"), history_csv(&history))?;
    save_checkpoint(&model, &out.join("model.ckpt"))?;
    let mut manifest = Manifest::new("train", &raw, train.seed, cfg.train.seed);
    manifest.files = vec!["history.csv".into(), "model.ckpt".into()];
    manifest.write(out)?;
    match &history.status {
        RunStatus::Ok => {
            println!("final test error: {}", history.final_error().unwrap_or(f64::NAN));
            Ok(())
        }
        RunStatus::Diverged { epoch, reason } => Err(CliError::new(
            EXIT_DIVERGED,
            format!("training diverged in epoch {epoch}: {reason}"),
        )),
    }
}

fn grid_search(
    config: &Path,
    data: Option<&Path>,
    out: Option<&Path>,
    workers: Option<usize>,
    resume: bool,
) -> Result<(), CliError> {
    let (cfg, raw) = ExperimentConfig::load(config)?;
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.search.output_dir.clone())
        .ok_or_else(|| CliError::config("no output directory: pass --out or set search.output_dir"))?;
    let settings = cfg.search_settings(workers)?;
    let space = cfg.search_space()?;
    let (train, test) = datasets(&cfg, data)?;
    create_dir(&out)?;
    let outcome = run_search(&space, &train, &test, &settings, &out.join("results.csv"), resume)?;
    let mut manifest = Manifest::new("grid-search", &raw, train.seed, settings.seed);
    manifest.files = vec!["results.csv".into()];
    manifest.write(&out)?;
    let diverged = outcome
        .results
        .iter()
        .filter(|r| r.status == koopman_core::gridsearch::RunState::Diverged)
        .count();
    println!(
        "{} combinations, {} trained, {} diverged; results in {}",
        outcome.results.len(),
        outcome.computed.len(),
        diverged,
        out.join("results.csv").display()
    );
    Ok(())
}

fn last_epoch(results: &[RunResult]) -> Result<usize, CliError> {
    results
        .iter()
        .flat_map(|r| r.curve.iter().map(|p| p.epoch))
        .max()
        .ok_or_else(|| CliError::failure("the results file holds no runs"))
}

fn dimensions(dimension: Option<&str>) -> Result<Vec<Dimension>, CliError> {
    match dimension {
        Some(d) => Ok(vec![d.parse().map_err(|e: koopman_core::Error| CliError::config(format!("--dimension: {e}")))?]),
        None => Ok(Dimension::ALL.to_vec()),
    }
}

fn report(
    results_path: &Path,
    analysis: Analysis,
    epoch: Option<usize>,
    k: usize,
    dimension: Option<&str>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let results = read_results(results_path)?;
    let dims = dimensions(dimension)?;
    let table = match analysis {
        Analysis::MeanEffect => {
            let mut rows = Vec::new();
            for d in dims {
                rows.extend(mean_effect(&results, d).into_iter().filter(|r| epoch.is_none_or(|e| r.epoch == e)));
            }
            effect_table(&rows)
        }
        Analysis::TopK => {
            let epoch = match epoch {
                Some(e) => e,
                None => last_epoch(&results)?,
            };
            top_k_table(&top_k(&results, epoch, k)?)
        }
        Analysis::RelativeTimes => {
            let mut rows = Vec::new();
            for d in dims {
                rows.extend(mean_relative_times(&results, d)?);
            }
            times_table(&rows)
        }
    };
    let path = match out {
        Some(p) => p.to_path_buf(),
        None => results_path.with_file_name(analysis.file_name()),
    };
    table.write_csv(&path)?;
    print!("{}", table.render());
    Ok(())
}

fn study(
    equation: Option<&str>,
    config: Option<&Path>,
    data: Option<&Path>,
    out: &Path,
    workers: Option<usize>,
    resume: bool,
) -> Result<(), CliError> {
    let (mut cfg, raw) = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let eq = equation.ok_or_else(|| CliError::config("pass --equation or --config"))?;
            let text = format!("[data]\nequation = \"{eq}\"\n");
            (ExperimentConfig::parse(&text)?, text.into_bytes())
        }
    };
    if let Some(eq) = equation {
        let _: EquationName = eq.parse().map_err(|e: koopman_core::Error| CliError::config(format!("--equation: {e}")))?;
        cfg.data.equation = eq.to_string();
        cfg.validate()?;
    }
    let settings = cfg.search_settings(workers)?;
    let (train, test) = datasets(&cfg, data)?;
    create_dir(out)?;
    let (outcome, rows) = operator_study(
        &train,
        &test,
        cfg.model.encoding_dim,
        &settings,
        &out.join("results.csv"),
        resume,
    )?;
    let table: Table = study_table(&rows);
    table.write_csv(&out.join("operator_study.csv"))?;
    let mut manifest = Manifest::new("operator-study", &raw, train.seed, settings.seed);
    manifest.files = vec!["results.csv".into(), "operator_study.csv".into()];
    manifest.write(out)?;
    print!("{}", table.render());
    eprintln!("{} runs, {} trained", outcome.results.len(), outcome.computed.len());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenerateData { config, out } => generate_data(&config, &out),
        Command::Train { config, data, out } => train(&config, data.as_deref(), &out),
        Command::GridSearch { config, data, out, workers, resume } => {
            grid_search(&config, data.as_deref(), out.as_deref(), workers, resume)
        }
        Command::Report { results, analysis, epoch, k, dimension, out } => {
            report(&results, analysis, epoch, k, dimension.as_deref(), out.as_deref())
        }
        Command::OperatorStudy { equation, config, data, out, workers, resume } => study(
            equation.as_deref(),
            config.as_deref(),
            data.as_deref(),
            &out,
            workers,
            resume,
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
