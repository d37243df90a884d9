mod commands;
mod config;
mod data;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fibpred_core::hyperopt::TuneFamily;
use fibpred_core::pipeline::ModelFamily;

use crate::commands::{ExplainArgs, PredictArgs};
use crate::config::{Overrides, RunConfig, Target};
use crate::error::CliError;

/// Fecal indicator bacteria prediction toolkit.
#[derive(Debug, Parser)]
#[command(name = "fibpred", version)]
struct Cli {
    /// TOML run file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct DataArgs {
    #[arg(long, value_name = "PATH")]
    samples: Option<PathBuf>,
    /// Directory of `<series>.csv` files.
    #[arg(long = "env", value_name = "DIR")]
    env_dir: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct TrainingArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output directory of a `features` run.
    #[arg(long, value_name = "DIR")]
    features: Option<PathBuf>,
    #[arg(long, value_enum)]
    target: Option<Target>,
    /// cb-like, xgb-like, rf, svr, mlp or mean.
    #[arg(long)]
    family: Option<ModelFamily>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic monitoring cluster.
    Synth,
    /// Build the feature matrix from samples and environmental series.
    Features(DataArgs),
    /// Fit one model on every row.
    Train(TrainingArgs),
    /// Run the configured evaluation protocol.
    Eval(TrainingArgs),
    /// TreeSHAP importance ranking and dependence tables.
    Explain {
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[arg(long, value_name = "PATH")]
        matrix: PathBuf,
        #[arg(long, value_name = "FEATURE", requires = "color")]
        dependence: Option<String>,
        #[arg(long, value_name = "FEATURE", requires = "dependence")]
        color: Option<String>,
    },
    /// Predict counts, and the quality class when given EC and ENT models.
    Predict {
        #[arg(long, value_name = "PATH", conflicts_with_all = ["ec_model", "ent_model"])]
        model: Option<PathBuf>,
        #[arg(long, value_name = "PATH", requires = "ent_model")]
        ec_model: Option<PathBuf>,
        #[arg(long, value_name = "PATH", requires = "ec_model")]
        ent_model: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        matrix: PathBuf,
    },
    /// Fireworks search over SVR or MLP hyperparameters.
    Tune {
        #[command(flatten)]
        train: TrainingArgs,
        #[arg(long = "tune-family", value_parser = parse_tune_family, value_name = "svr|mlp")]
        tune_family: Option<TuneFamily>,
        /// Objective evaluations.
        #[arg(long)]
        budget: Option<usize>,
    },
}

fn parse_tune_family(s: &str) -> Result<TuneFamily, String> {
    match s {
        "svr" => Ok(TuneFamily::Svr),
        "mlp" => Ok(TuneFamily::Mlp),
        _ => Err(format!("`{s}` cannot be tuned (expected svr or mlp)")),
    }
}

fn overrides(cli: &Cli) -> Overrides {
    let mut o = Overrides { seed: cli.seed, out: cli.out.clone(), threads: cli.threads, ..Overrides::default() };
    let training = match &cli.command {
        Command::Train(t) | Command::Eval(t) | Command::Tune { train: t, .. } => Some(t),
        _ => None,
    };
    let data = match &cli.command {
        Command::Features(d) => Some(d),
        _ => training.map(|t| &t.data),
    };
    if let Some(d) = data {
        o.samples = d.samples.clone();
        o.env_dir = d.env_dir.clone();
    }
    if let Some(t) = training {
        o.features_dir = t.features.clone();
        o.target = t.target;
        o.family = t.family;
    }
    o
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut cfg = file.resolve(overrides(&cli))?;
    if let Command::Tune { tune_family, budget, .. } = &cli.command {
        if let Some(f) = tune_family {
            cfg.tune.family = *f;
        }
        if let Some(b) = budget {
            cfg.tune.budget = *b;
        }
    }
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(CliError::internal)?;
    }
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Features(_) => commands::features(&cfg),
        Command::Train(_) => commands::train(&cfg),
        Command::Eval(_) => commands::eval(&cfg),
        Command::Tune { .. } => commands::tune(&cfg),
        Command::Explain { model, matrix, dependence, color } => {
            commands::explain(&cfg, &ExplainArgs { model, matrix, dependence, color })
        }
        Command::Predict { model, ec_model, ent_model, matrix } => {
            commands::predict(&cfg, &PredictArgs { model, ec_model, ent_model, matrix })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
