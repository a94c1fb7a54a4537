use std::path::PathBuf;
use std::process::ExitCode;

use charstyle::config::PipelineConfig;
use charstyle::pipeline;
use charstyle::Result;
use clap::{Parser, Subcommand};

/// Structured character-style extraction, dataset building and evaluation.
#[derive(Debug, Parser)]
#[command(name = "charstyle", version)]
struct Cli {
    /// Pipeline configuration (TOML). Relative paths inside resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `paths.out_dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// TF-PMI lexicon per character.
    Lexicon {
        #[arg(long)]
        character: Option<String>,
        /// Lexicon capacity; overrides `lexicon.capacity`.
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Rule ranking, syntactic vector and coverage per character.
    Syntax {
        #[arg(long)]
        character: Option<String>,
        /// Baseline treebank; defaults to the other characters' trees.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Train the pragmatic refiner, tune thresholds and label the corpus.
    Refine {
        /// Skip training (the untrained model cannot be used for prediction).
        #[arg(long)]
        no_train: bool,
    },
    /// Write one structured style vector per character.
    Assemble {
        #[arg(long)]
        character: Option<String>,
    },
    /// N-shot stability curves.
    Stability {
        #[arg(long)]
        character: Option<String>,
        /// Comma-separated sample sizes; overrides `stability.sizes`.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Build, oversample and validate the rewrite dataset.
    Dataset,
    /// Metric report, tau sensitivity and Pareto frontier.
    Eval {
        /// Scored-sample CSV; overrides `paths.scores`.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_path_overrides(
        std::env::vars_os().filter_map(|(k, v)| Some((k.into_string().ok()?, PathBuf::from(v)))),
    )?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.paths.out_dir = Some(dir.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Lexicon { character, top_k } => {
            pipeline::cmd_lexicon(&cfg, character.as_deref(), *top_k)
        }
        Command::Syntax {
            character,
            baseline,
        } => pipeline::cmd_syntax(&cfg, character.as_deref(), baseline.as_deref()),
        Command::Refine { no_train } => pipeline::cmd_refine(&cfg, *no_train),
        Command::Assemble { character } => pipeline::cmd_assemble(&cfg, character.as_deref()),
        Command::Stability { character, sizes } => {
            pipeline::cmd_stability(&cfg, character.as_deref(), sizes.as_deref())
        }
        Command::Dataset => pipeline::cmd_dataset(&cfg),
        Command::Eval { scores } => pipeline::cmd_eval(&cfg, scores.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(written) => {
            for p in written {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
