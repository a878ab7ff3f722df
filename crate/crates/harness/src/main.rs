use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seqdac::commands::{self, default_bench_suite};
use seqdac::config::RawConfig;
use seqdac::{HarnessError, RunConfig};

#[derive(Parser)]
#[command(name = "seqdac", version, about = "Sequential multi-agent algorithm configuration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a learner on every configured seed.
    Train {
        /// Run configuration file.
        config: PathBuf,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
        /// Seeds trained concurrently.
        #[arg(short, long, default_value_t = 1)]
        jobs: usize,
        /// Extra `key=value` assignments applied after the file.
        #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Evaluate a checkpoint greedily.
    Eval {
        /// Checkpoint directory (`<run>/seed-<s>/checkpoint`).
        checkpoint: PathBuf,
        /// Environment configuration; defaults to the run's snapshot.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Metrics CSV (stdout when absent).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Per-step trajectory CSV.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Rank training runs by final evaluation score.
    Compare {
        /// Run directories written by `train`.
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Random-policy rollouts to check environments and measure step cost.
    Bench {
        /// Environment configuration; the built-in suite when absent.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write the IGD reference fronts as CSV files.
    Fronts {
        #[arg(short, long)]
        out: PathBuf,
        #[arg(short, default_value_t = 3)]
        m: usize,
    },
}

fn load_config(path: &PathBuf, overrides: &[String]) -> Result<RunConfig, HarnessError> {
    let mut raw = RawConfig::from_file(path)?;
    for item in overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
        // parsing the single assignment rejects unknown keys and empty values
        RawConfig::parse_str(&format!("{k} = {v}"))?;
        raw.set(k.trim(), v.trim());
    }
    raw.run_config()
}

fn emit(table: &seqdac::table::Table, out: Option<&PathBuf>) -> Result<(), HarnessError> {
    match out {
        Some(path) => table.write(path),
        None => {
            print!("{}", table.render());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train { config, out, jobs, set } => {
            let config = load_config(&config, &set)?;
            let results = commands::cmd_train(&config, &out, jobs)?;
            for r in results {
                println!("seed {}: step {} eval_mean {} eval_std {}", r.seed, r.step, r.eval_mean, r.eval_std);
            }
            Ok(())
        }
        Command::Eval {
            checkpoint,
            config,
            episodes,
            seed,
            out,
            trajectory,
        } => {
            let spec = match config {
                Some(path) => RawConfig::from_file(&path)?.env_spec()?,
                None => commands::env_for_checkpoint(&checkpoint)?,
            };
            let table = commands::cmd_eval(&checkpoint, &spec, episodes, seed, trajectory.as_deref())?;
            emit(&table, out.as_ref())
        }
        Command::Compare { runs, out } => {
            let table = commands::cmd_compare(&runs)?;
            print!("{}", table.pretty());
            if let Some(path) = out {
                table.write(&path)?;
            }
            Ok(())
        }
        Command::Bench {
            config,
            episodes,
            seed,
            out,
        } => {
            let suite = match config {
                Some(path) => {
                    let spec = RawConfig::from_file(&path)?.env_spec()?;
                    vec![(spec.kind().to_string(), spec)]
                }
                None => default_bench_suite(),
            };
            let table = commands::cmd_bench(&suite, episodes, seed)?;
            print!("{}", table.pretty());
            if let Some(path) = out {
                table.write(&path)?;
            }
            Ok(())
        }
        Command::Fronts { out, m } => {
            for path in commands::cmd_fronts(&out, m)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
