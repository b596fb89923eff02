mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use commands::{Ctx, Failure, Outcome};
use config::RunConfig;

/// Options accepted both before and after the subcommand.
#[derive(Args, Clone, Default)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set variant=dist`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (0 uses every core).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    /// Later (subcommand-level) options take precedence.
    fn merge(mut self, later: &Common) -> Common {
        if later.config.is_some() {
            self.config = later.config.clone();
        }
        self.overrides.extend(later.overrides.iter().cloned());
        if later.threads.is_some() {
            self.threads = later.threads;
        }
        self
    }
}

#[derive(Parser)]
#[command(
    name = "ncrel",
    version,
    about = "Noun-compound relation classification with dependency-path embeddings"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split the dataset into train/validation/test.
    Split(Common),
    /// Collect dependency paths between compound constituents.
    ExtractPaths(Common),
    /// Replace compounds in raw text with single tokens.
    RewriteNc(Common),
    /// Train the path encoder.
    TrainPaths(Common),
    /// Export path embeddings from the trained encoder.
    ExportPaths(Common),
    /// Train the configured classifier variant.
    Train(Common),
    /// Evaluate the configured classifier variant on the test split.
    Eval(Common),
    /// Frequency baselines keyed on the head and on the modifier.
    BaselineFreq(Common),
    /// Paths the encoder assigns confidently to one relation.
    AnalyzePaths(Common),
    /// Label agreement among nearest compound vectors.
    AnalyzeNeighbors(Common),
    /// Finite-difference gradient checks.
    GradCheck(Common),
    /// Print the effective configuration.
    ShowConfig(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Split(c)
            | Command::ExtractPaths(c)
            | Command::RewriteNc(c)
            | Command::TrainPaths(c)
            | Command::ExportPaths(c)
            | Command::Train(c)
            | Command::Eval(c)
            | Command::BaselineFreq(c)
            | Command::AnalyzePaths(c)
            | Command::AnalyzeNeighbors(c)
            | Command::GradCheck(c)
            | Command::ShowConfig(c) => c,
        }
    }
}

fn load_config(opts: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &opts.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&opts.overrides)?;
    if let Some(t) = opts.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Outcome {
    let opts = cli.common.clone().merge(cli.command.common());
    let cfg = load_config(&opts).map_err(Failure::Usage)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| Failure::Usage(e.into()))?;
    }
    let ctx = Ctx::new(cfg);
    match cli.command {
        Command::Split(_) => commands::split(&ctx),
        Command::ExtractPaths(_) => commands::extract_paths(&ctx),
        Command::RewriteNc(_) => commands::rewrite_nc(&ctx),
        Command::TrainPaths(_) => commands::train_paths(&ctx),
        Command::ExportPaths(_) => commands::export_paths(&ctx),
        Command::Train(_) => commands::train(&ctx),
        Command::Eval(_) => commands::eval(&ctx),
        Command::BaselineFreq(_) => commands::baseline_freq(&ctx),
        Command::AnalyzePaths(_) => commands::analyze_paths(&ctx),
        Command::AnalyzeNeighbors(_) => commands::analyze_neighbors(&ctx),
        Command::GradCheck(_) => commands::grad_check_cmd(&ctx),
        Command::ShowConfig(_) => commands::show_config(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
