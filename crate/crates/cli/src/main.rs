use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use coderl::training::Ablation;
use coderl_cli::pipeline::{self, Workspace};
use coderl_cli::{CliError, CsMode, RunConfig};

#[derive(Parser)]
#[command(name = "coderl", version, about = "Actor-critic program synthesis pipeline")]
struct Cli {
    /// Run configuration (flat TOML). Defaults apply when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the train and test problem sets.
    GenData,
    /// Next-token pretraining of the actor on standalone programs.
    Pretrain,
    /// Cross-entropy warm-start of the pretrained actor.
    Warmstart,
    /// Sample and label synthetic programs from the warm-started actor.
    Collect,
    /// Train the critic and the test-critic on the synthetic samples.
    TrainCritic,
    /// RL finetuning of the warm-started actor.
    TrainRl {
        /// A, B, C or D; defaults to the configured critic mode and baseline.
        #[arg(long)]
        ablation: Option<Ablation>,
    },
    /// Train the repair model on failing synthetic samples.
    TrainRepair,
    /// Generate programs for the test problems.
    Generate {
        /// warmstart, pretrain or rl_A..rl_D.
        #[arg(long, default_value = "rl_D")]
        model: String,
        /// off, refine or refine+repair; defaults to gen_cs.
        #[arg(long)]
        cs: Option<CsMode>,
        /// Also write a per-problem trace of the pipeline.
        #[arg(long)]
        trace: bool,
    },
    /// Score a generation run on the hidden tests.
    Evaluate {
        #[arg(long, default_value = "rl_D")]
        model: String,
        #[arg(long)]
        cs: Option<CsMode>,
    },
    /// Aggregate every evaluated run into the report tables.
    Report,
    /// Every stage in order, the standard runs and the report.
    Pipeline,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply_env(|k| std::env::var(k).ok())?;
    config.validate()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build_global()
        .map_err(|e| CliError::Invariant(e.to_string()))?;
    let mut ws = Workspace::open(config)?;
    ws.verbose = !cli.quiet;
    let cs_or_default = |cs: Option<CsMode>| cs.unwrap_or(ws.config.gen_cs);
    match cli.command {
        Command::GenData => pipeline::gen_data(&ws),
        Command::Pretrain => pipeline::pretrain(&ws),
        Command::Warmstart => pipeline::warmstart(&ws),
        Command::Collect => pipeline::collect(&ws),
        Command::TrainCritic => pipeline::train_critic(&ws).map(drop),
        Command::TrainRl { ablation } => {
            let ablation = match ablation {
                Some(a) => a,
                None => ws.config.ablation()?,
            };
            pipeline::train_rl(&ws, ablation)
        }
        Command::TrainRepair => pipeline::train_repair(&ws),
        Command::Generate { model, cs, trace } => pipeline::generate(&ws, &model, cs_or_default(cs), trace).map(drop),
        Command::Evaluate { model, cs } => {
            let run = pipeline::run_name(&model, cs_or_default(cs));
            let rows = pipeline::evaluate(&ws, &run)?;
            print!("{}", coderl::eval::to_csv(&rows));
            Ok(())
        }
        Command::Report => {
            pipeline::report(&ws)?;
            let path = ws.path(pipeline::REPORT_ABLATION);
            let table = std::fs::read_to_string(&path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            print!("{table}");
            Ok(())
        }
        Command::Pipeline => pipeline::run_all(&ws).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli).context("coderl failed") {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = err.downcast_ref::<CliError>().map_or(4, CliError::exit_code);
            eprintln!("error: {err:#}");
            ExitCode::from(code as u8)
        }
    }
}
