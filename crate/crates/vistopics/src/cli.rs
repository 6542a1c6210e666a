use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use vistopics_core::validation::TaskKind;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::pipeline::Pipeline;

const DEFAULT_CONFIG: &str = "vistopics.toml";

#[derive(Debug, Parser)]
#[command(name = "vistopics", version, about = "Visual topic modeling for video collections")]
pub struct Cli {
    /// Config file (default: ./vistopics.toml when present, else built-in defaults).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory; overrides `run_dir` from the config.
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,
    /// Worker threads for parallel stages (0 = one per CPU).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for every random choice; overrides `seed` from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Probe videos and extract frames at the target rate.
    Extract(InputArgs),
    /// Hash frames and drop near-duplicates within each video.
    Dedup,
    /// Caption every retained frame.
    Caption {
        /// Keep captions already marked ok in an existing captions.csv.
        #[arg(long)]
        resume: bool,
    },
    /// Clean captions and build the document-term corpus.
    Preprocess,
    /// Cross-validated search over K and alpha.
    Sweep,
    /// Fit the final model on all documents.
    Fit {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Write topic tables, the HTML gallery, and metrics.
    Report,
    /// Human validation tasks.
    #[command(subcommand)]
    Validate(ValidateCommand),
    /// Print the resource-metrics table for completed stages.
    Metrics,
    /// extract, dedup, caption, preprocess, sweep, fit, report.
    RunAll(InputArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Video directory; overrides `input_dir` from the config.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ValidateCommand {
    /// Generate image-intrusion and topic-matching items.
    Gen {
        /// Only this task kind.
        #[arg(long)]
        kind: Option<TaskKind>,
        #[arg(long)]
        n_items: Option<usize>,
    },
    /// Serve items to coders over HTTP.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Score recorded responses.
    Score,
}

impl Cli {
    pub fn load_config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None if std::path::Path::new(DEFAULT_CONFIG).is_file() => Config::load(DEFAULT_CONFIG.as_ref())?,
            None => Config::default(),
        };
        if let Some(dir) = &self.run_dir {
            cfg.run_dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Command::Extract(a) | Command::RunAll(a) = &self.command {
            if let Some(input) = &a.input {
                cfg.input_dir = input.clone();
            }
        }
        Ok(cfg)
    }

    pub fn run(self) -> Result<()> {
        let cfg = self.load_config()?;
        let p = Pipeline::new(cfg, self.jobs.unwrap_or(0))?;
        match self.command {
            Command::Extract(_) => p.extract(),
            Command::Dedup => p.dedup(),
            Command::Caption { resume } => p.caption(resume),
            Command::Preprocess => p.preprocess(),
            Command::Sweep => p.sweep(),
            Command::Fit { k, alpha } => {
                if k.is_some_and(|k| k < 2) || alpha.is_some_and(|a| a <= 0.0) {
                    return Err(Error::Config("--k must be >= 2 and --alpha > 0".into()));
                }
                p.fit(k, alpha)
            }
            Command::Report => p.report(),
            Command::Validate(ValidateCommand::Gen { kind, n_items }) => {
                let kinds = kind.map(|k| vec![k]).unwrap_or_else(|| TaskKind::ALL.to_vec());
                p.validate_gen(&kinds, n_items).map(|_| ())
            }
            Command::Validate(ValidateCommand::Serve { bind }) => p.validate_serve(bind.as_deref()),
            Command::Validate(ValidateCommand::Score) => p.validate_score(),
            Command::Metrics => {
                print!("{}", p.metrics_text()?);
                Ok(())
            }
            Command::RunAll(_) => p.run_all(),
        }
    }
}
