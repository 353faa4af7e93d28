//! `skelmax`: command-line driver for skeleton maximal operator experiments.
//!
//! Exit status is 0 on success, 1 when a run completes but its fitted slope
//! misses the prediction, and 2 on usage or configuration errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use skelmax::operators::Backend;
use skelmax::scaling::Candidate;

use crate::config::{parse_backend, parse_candidate, ExperimentConfig};

#[derive(Parser)]
#[command(name = "skelmax", version, about = "Skeleton maximal operator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by all subcommands; they override the config file.
#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// JSON experiment configuration (unknown keys are rejected).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// One or more comma-separated values of delta.
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// `exact` or `quadrature:<h>`.
    #[arg(long, value_parser = parse_backend)]
    backend: Option<Backend>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut c = ExperimentConfig::load(self.config.as_deref())?;
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.k {
            c.k = v;
        }
        if let Some(v) = self.p {
            c.p = v;
        }
        if let Some(v) = self.q {
            c.q = v;
        }
        if !self.delta.is_empty() {
            c.delta_list = self.delta.clone();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.backend {
            c.backend = v;
        }
        if let Some(v) = &self.out {
            c.output_dir = v.clone();
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Lists the k-faces of a cube as JSON lines.
    Faces {
        #[command(flatten)]
        common: Common,
        /// Cube center, comma separated (default: center of the unit cube).
        #[arg(long, value_delimiter = ',')]
        center: Vec<f64>,
        /// Half side length.
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        /// Write `faces.jsonl` into the output directory instead of stdout.
        #[arg(long)]
        to_file: bool,
    },
    /// Evaluates the maximal field of a grid-function or box-union file.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Payload encoding of the field file: csv or f64le.
        #[arg(long, default_value = "csv")]
        encoding: String,
    },
    /// Fits the norm growth exponent over the delta list.
    Scan {
        #[command(flatten)]
        common: Common,
        /// Comma-separated candidate names.
        #[arg(long, value_delimiter = ',', value_parser = parse_candidate)]
        candidates: Vec<Candidate>,
    },
    /// Runs the greedy face-selection growth experiment.
    Select {
        #[command(flatten)]
        common: Common,
        /// Comma-separated family sizes.
        #[arg(long, value_delimiter = ',')]
        m: Vec<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Tabulates level-set measures and implied weak-type constants.
    Weaktype {
        #[command(flatten)]
        common: Common,
        /// Comma-separated thresholds in (0, 1].
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        #[arg(long, value_delimiter = ',', value_parser = parse_candidate)]
        candidates: Vec<Candidate>,
    },
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Faces {
            common,
            center,
            r,
            to_file,
        } => commands::faces(&common.resolve()?, &center, r, to_file),
        Command::Eval {
            common,
            input,
            encoding,
        } => commands::eval(&common.resolve()?, &input, &encoding),
        Command::Scan { common, candidates } => {
            let mut c = common.resolve()?;
            if !candidates.is_empty() {
                c.candidates = candidates;
            }
            commands::scan(&c)
        }
        Command::Select { common, m, trials } => {
            let mut c = common.resolve()?;
            if !m.is_empty() {
                c.m_list = m;
            }
            if let Some(t) = trials {
                c.trials = t;
            }
            commands::select(&c)
        }
        Command::Weaktype {
            common,
            lambda,
            candidates,
        } => {
            let mut c = common.resolve()?;
            if !lambda.is_empty() {
                c.lambdas = lambda;
            }
            if !candidates.is_empty() {
                c.candidates = candidates;
            }
            commands::weaktype(&c)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
