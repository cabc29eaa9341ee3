use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use olr_cli::config::RunConfig;
use olr_cli::pipeline;
use olr_core::Error;

/// Spoken language recognition pipeline: corpus synthesis, training,
/// scoring and challenge-style evaluation.
#[derive(Parser)]
#[command(name = "olr", version, about)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master RNG seed (overrides config and OLR_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; 0 = all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Directory for models, caches and reports.
    #[arg(long, global = true)]
    work_dir: Option<PathBuf>,

    /// Directory holding manifest.txt and audio.
    #[arg(long, global = true)]
    corpus_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus.
    Synth,
    /// Train UBM, total-variability matrix, LDA and scoring back-ends.
    Train,
    /// Score the test split with the configured back-end.
    Score,
    /// Evaluate a score file against the manifest.
    Evaluate {
        /// Score file; defaults to <work-dir>/scores.txt.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Full pipeline: synth (if needed), train, score and evaluate all
    /// baseline systems.
    Baseline,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Manifest { .. }
        | Error::AudioFormat { .. }
        | Error::AudioParse { .. }
        | Error::ScoreFile { .. }
        | Error::UnknownLanguage(_)
        | Error::MissingLanguage(_)
        | Error::InsufficientData(_)
        | Error::DimensionMismatch { .. }
        | Error::Model { .. } => 3,
        Error::Numeric(_) => 4,
        Error::Io { .. } | Error::Json(_) => 1,
    }
}

fn run(cli: &Cli) -> olr_core::Result<()> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    if let Some(dir) = &cli.work_dir {
        config.paths.work_dir = dir.clone();
    }
    if let Some(dir) = &cli.corpus_dir {
        config.paths.corpus_dir = dir.clone();
    }
    config.validate()?;

    if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build_global()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    }

    match &cli.command {
        Command::Synth => {
            let manifest = pipeline::run_synth(&config)?;
            println!(
                "wrote {} segments under {}",
                manifest.records().len(),
                config.paths.corpus_dir.display()
            );
        }
        Command::Train => {
            pipeline::run_train(&config)?;
            println!(
                "models written under {} (see artifacts.txt)",
                config.paths.work_dir.display()
            );
        }
        Command::Score => {
            let path = pipeline::run_score(&config)?;
            println!("score file written to {}", path.display());
        }
        Command::Evaluate { scores } => {
            let report = pipeline::run_evaluate(&config, scores.as_deref())?;
            let system = pipeline::configured_system(&config)?;
            println!("{}", olr_core::metrics::MetricReport::table_header());
            println!("{}", report.table_row(system.label));
            println!(
                "lost trials: {} of {} segments",
                report.lost_trials, report.n_segments
            );
        }
        Command::Baseline => {
            let table = pipeline::run_baseline(&config)?;
            print!("{table}");
            println!(
                "full report under {}",
                config.paths.work_dir.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
