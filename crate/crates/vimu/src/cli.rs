use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{self, LoadedConfig};
use crate::error::{exit, Error, Result};
use crate::exec::Exec;
use crate::pipeline::{self, Layout};

#[derive(Debug, Parser)]
#[command(name = "vimu", version, about = "Virtual IMU synthesis and activity-recognition training")]
pub struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Config override, e.g. `--set dataset.window_len=30`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pose sequences -> IMU sequences.
    Synth,
    /// IMU sequences -> filtered, windowed, normalized train/test datasets.
    Preprocess,
    /// Train the joint-loss network.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Retrain only the fully-connected layers of a checkpoint.
    Finetune {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Metrics, confusion table and heatmap for a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Re-render the summary and heatmap from a metrics report.
    Report {
        #[arg(long)]
        metrics: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<LoadedConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Usage("--config <path> is required for this command".into()))?;
    let mut overrides = cli
        .overrides
        .iter()
        .map(|s| config::parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), toml::Value::Integer(seed as i64)));
    }
    config::load(path, &overrides)
}

pub fn execute(cli: &Cli) -> Result<Vec<String>> {
    if cli.threads == 0 {
        return Err(Error::Usage("--threads must be at least 1".into()));
    }
    if let Command::Report { metrics } = &cli.command {
        return pipeline::report_cmd(metrics);
    }
    let lc = load_config(cli)?;
    let layout = Layout::new(&cli.out);
    let exec = Exec::for_threads(cli.threads);
    let run = || match &cli.command {
        Command::Synth => pipeline::synth(&lc, &layout),
        Command::Preprocess => pipeline::preprocess(&lc, &layout),
        Command::Train { data } => pipeline::train_cmd(&lc, &layout, data.as_deref(), exec),
        Command::Finetune { checkpoint, data } => {
            pipeline::finetune_cmd(&lc, &layout, checkpoint.as_deref(), data.as_deref(), exec)
        }
        Command::Eval { checkpoint, data } => {
            pipeline::eval_cmd(&lc, &layout, checkpoint.as_deref(), data.as_deref(), exec)
        }
        Command::Report { .. } => unreachable!(),
    };
    if cli.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {} threads: {e}", cli.threads)))?;
        pool.install(run)
    } else {
        run()
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            exit::OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
