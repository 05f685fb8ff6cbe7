use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracmv::harness::{run_rate_experiment, run_validation_suite, ExperimentConfig};
use fracmv::Error;

#[derive(Parser)]
#[command(name = "fracmv", version, about = "Small-noise rate experiments for fBm-driven mean-field SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a rate sweep and write rates.csv, fits.json and report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the property-check suite.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Closed-form reference values.
    Oracle {
        #[command(subcommand)]
        which: Oracle,
    },
}

#[derive(Subcommand)]
enum Oracle {
    /// Fisher distance of N(mu1, var1) to N(mu2, var2).
    GaussianFisher {
        #[arg(long, allow_hyphen_values = true)]
        mu1: f64,
        #[arg(long)]
        var1: f64,
        #[arg(long, allow_hyphen_values = true)]
        mu2: f64,
        #[arg(long)]
        var2: f64,
    },
}

const CONFIG_ERROR: u8 = 1;
const NUMERICAL_FAILURE: u8 = 2;
const ACCEPTANCE_FAILURE: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnknownModel(_) | Error::Json(_) => CONFIG_ERROR,
        _ => NUMERICAL_FAILURE,
    }
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run { config, out, jobs, seed } => {
            let config = load(&config, seed)?;
            let dir = out.or_else(|| config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let report = run_rate_experiment(&config, jobs)?;
            report.write(&dir)?;
            for f in &report.fits {
                println!(
                    "H={} {:<10} slope {:>7.3} ± {:.3}  (expected {:.2} ± {:.2})",
                    f.hurst, f.fit.quantity, f.fit.slope, f.fit.stderr, f.expected_slope, f.tolerance
                );
            }
            for s in &report.summaries {
                if let Some(d) = &s.degenerate {
                    println!("H={} degenerate: {d}", s.hurst);
                }
            }
            for failure in &report.failures {
                eprintln!("failure in {}: {}", failure.stage, failure.message);
            }
            println!("wrote {}", dir.display());
            Ok(if report.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(NUMERICAL_FAILURE) })
        }
        Command::Validate { config } => {
            let config = load(&config, None)?;
            let report = run_validation_suite(&config)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(ACCEPTANCE_FAILURE) })
        }
        Command::Oracle { which: Oracle::GaussianFisher { mu1, var1, mu2, var2 } } => {
            let value = fracmv::fisher::gaussian_fisher_oracle(mu1, var1, mu2, var2).map_err(|e| Error::Config(e.to_string()))?;
            println!("{value}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
