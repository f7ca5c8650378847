//! `pint` command line: run one experiment, sweep a key over values, or
//! validate a config. Exit codes: 0 converged, 1 not converged (or solver
//! failure), 2 configuration error.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use pint_cli::{output_paths, parse_config, run_experiment, sweep_config};

#[derive(Parser)]
#[command(name = "pint", about = "Parallel-in-time solvers for fourth-order PDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key=value config file.
    config: Option<PathBuf>,
    /// Inline overrides, e.g. --set alpha=0.01 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write <output>.csv / .trace.csv / .json.
    Run(ConfigArgs),
    /// Run the base config once per value of one key.
    Sweep {
        #[command(flatten)]
        base: ConfigArgs,
        /// Key to vary.
        #[arg(long)]
        key: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
    /// Validate the configuration and print the resolved values.
    Check(ConfigArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let cfg = match parse_config(args.config.as_deref(), &args.sets) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            match run_experiment(&cfg) {
                Ok(summary) => {
                    let r = &summary.report;
                    println!(
                        "{}: converged={} iterations={} final_error={:e} wrote {}",
                        cfg.problem.key(),
                        r.converged,
                        r.iterations,
                        r.errors.last().copied().unwrap_or(f64::NAN),
                        output_paths(&cfg).0.display(),
                    );
                    if r.converged {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Sweep { base, key, values } => {
            let base_cfg = match parse_config(base.config.as_deref(), &base.sets) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            if values.is_empty() {
                eprintln!("sweep needs at least one value");
                return ExitCode::from(2);
            }
            let mut all_converged = true;
            for value in &values {
                let cfg = match sweep_config(&base_cfg, &key, value) {
                    Ok(cfg) => cfg,
                    Err(e) => {
                        eprintln!("{e}");
                        return ExitCode::from(2);
                    }
                };
                match run_experiment(&cfg) {
                    Ok(summary) => {
                        let r = &summary.report;
                        println!(
                            "{key}={value}: converged={} iterations={} final_error={:e}",
                            r.converged,
                            r.iterations,
                            r.errors.last().copied().unwrap_or(f64::NAN),
                        );
                        all_converged &= r.converged;
                    }
                    Err(e) => {
                        eprintln!("{key}={value}: run failed: {e}");
                        all_converged = false;
                    }
                }
            }
            if all_converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Check(args) => match parse_config(args.config.as_deref(), &args.sets) {
            Ok(cfg) => {
                match serde_json::to_string_pretty(&cfg) {
                    Ok(text) => println!("{text}"),
                    Err(e) => eprintln!("config valid, echo failed: {e}"),
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(2)
            }
        },
    }
}
