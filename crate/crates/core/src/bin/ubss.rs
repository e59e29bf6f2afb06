use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ubss::config::{ExperimentConfig, Overrides, Settings, DEFAULT_OUTPUT_DIR};
use ubss::pipeline::{self, stages};
use ubss::Result;

/// Sparse underdetermined blind source separation experiments.
#[derive(Parser)]
#[command(name = "ubss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage for one experiment config and write all artifacts.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Synthesize sources.csv from a config.
    Generate(StageArgs),
    /// Mix sources.csv into mixtures.csv with the config's matrix.
    Mix(StageArgs),
    /// Estimate the mixing matrix from mixtures.csv.
    Estimate(StageArgs),
    /// Separate mixtures.csv with estimated_matrix.csv.
    Separate(StageArgs),
    /// Score separated.csv against sources.csv.
    Score(StageArgs),
}

#[derive(Args)]
struct StageArgs {
    /// Experiment config (required for generate and mix).
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Hopping/mixing seed; overrides the config.
    #[arg(long, env = "UBSS_SEED")]
    seed: Option<u64>,
    /// Ratio quantization step.
    #[arg(long)]
    quantum: Option<f64>,
    /// Keep ratio bins with at least this fraction of the largest count.
    #[arg(long, conflicts_with = "top_k")]
    peak_fraction: Option<f64>,
    /// Keep the k heaviest ratio bins instead of a fraction threshold.
    #[arg(long)]
    top_k: Option<usize>,
    /// Activity threshold relative to the mixture peak.
    #[arg(long)]
    activity_eps: Option<f64>,
    /// Directory for artifacts.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            quantum: self.quantum,
            peak_fraction: self.peak_fraction,
            top_k: self.top_k,
            activity_eps: self.activity_eps,
            output_dir: self.out_dir.clone(),
        }
    }
}

fn load(path: &Path, common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    common.overrides().apply(&mut cfg)?;
    Ok(cfg)
}

fn require_config(args: &StageArgs, stage: &str) -> Result<ExperimentConfig> {
    match &args.config {
        Some(path) => load(path, &args.common),
        None => Err(ubss::Error::Config(format!("`{stage}` needs --config"))),
    }
}

/// Settings and output directory for stages where the config is optional.
fn settings_and_dir(args: &StageArgs) -> Result<(Settings, PathBuf)> {
    match &args.config {
        Some(path) => {
            let cfg = load(path, &args.common)?;
            Ok((cfg.settings, cfg.output_dir))
        }
        None => {
            let overrides = args.common.overrides();
            let mut settings = Settings::default();
            overrides.apply_settings(&mut settings)?;
            let dir = overrides
                .output_dir
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
            Ok((settings, dir))
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, common } => {
            let cfg = load(&config, &common)?;
            let out = pipeline::run_experiment(&cfg, &cfg.output_dir)?;
            print!("{}", pipeline::summary(&out.estimate, &out.report, &out.diagnostics));
            println!("artifacts written to {}", cfg.output_dir.display());
        }
        Command::Generate(args) => {
            let cfg = require_config(&args, "generate")?;
            let s = stages::generate(&cfg, &cfg.output_dir)?;
            println!("generated {} samples x {} sources", s.rows(), s.cols());
        }
        Command::Mix(args) => {
            let cfg = require_config(&args, "mix")?;
            let x = stages::mix(&cfg, &cfg.output_dir)?;
            println!("mixed into {} channels", x.cols());
        }
        Command::Estimate(args) => {
            let (settings, dir) = settings_and_dir(&args)?;
            let est = stages::estimate(&settings, &dir)?;
            let ratios: Vec<String> = est.ratios().iter().map(|r| format!("{r:.4}")).collect();
            println!("estimated sources: {}", est.n_sources());
            println!("estimated ratios: {}", ratios.join(" "));
        }
        Command::Separate(args) => {
            let (settings, dir) = settings_and_dir(&args)?;
            let sep = stages::separate(&settings, &dir)?;
            println!("separated {} sources", sep.estimates.cols());
        }
        Command::Score(args) => {
            let (settings, dir) = settings_and_dir(&args)?;
            print!("{}", stages::score(&settings, &dir)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
