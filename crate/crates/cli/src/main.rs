//! `smd`: experiment runner for stochastic mirror descent.
//!
//! Exit codes: 0 success, 2 configuration error, 3 job failure.

mod config;
mod jobs;
mod summary;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use jobs::JobFilter;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "smd",
    about = "Stochastic mirror descent experiment harness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Replace the config's seed list (comma-separated).
    #[arg(long, global = true, value_delimiter = ',')]
    seed_override: Option<Vec<u64>>,

    /// Replace the config's output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Worker threads for (job, seed) pairs; the SMD_THREADS environment
    /// variable takes precedence. Defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every job listed in the config.
    Run { config: PathBuf },
    /// Execute only certification jobs (certify-vc, certify-lvc, sharpness).
    Certify { config: PathBuf },
    /// Execute only mean-dynamics jobs (flow, apt).
    Flow { config: PathBuf },
    /// List the problems addressable from configs.
    ListProblems,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_JOB: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Err(e) = install_thread_pool(cli.threads) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }

    let (path, filter) = match &cli.command {
        Command::ListProblems => {
            println!("available problems:");
            for (name, description) in smd_core::registry::names() {
                println!("  {name:<16} {description}");
            }
            return ExitCode::SUCCESS;
        }
        Command::Run { config } => (config, JobFilter::All),
        Command::Certify { config } => (config, JobFilter::CertificationOnly),
        Command::Flow { config } => (config, JobFilter::FlowOnly),
    };

    let mut config = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(seeds) = &cli.seed_override {
        config.seeds = seeds.clone();
    }
    if let Some(dir) = &cli.out_dir {
        config.out_dir = dir.display().to_string();
    }
    if let Err(e) = config.validate() {
        eprintln!("{e}");
        return ExitCode::from(EXIT_CONFIG);
    }

    match jobs::run_experiment(&config, filter) {
        Ok(summary) => {
            println!(
                "wrote {} (problem `{}`, {} seed(s), jobs {:?})",
                PathBuf::from(&config.out_dir).join("summary.json").display(),
                summary.problem,
                summary.seeds.len(),
                summary.jobs,
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("job failed: {e:#}");
            ExitCode::from(EXIT_JOB)
        }
    }
}

/// SMD_THREADS overrides --threads; both fall back to the core count.
fn install_thread_pool(flag: Option<usize>) -> Result<(), String> {
    let from_env = match std::env::var("SMD_THREADS") {
        Ok(v) => Some(
            v.parse::<usize>()
                .map_err(|_| format!("SMD_THREADS must be a positive integer, got `{v}`"))?,
        ),
        Err(_) => None,
    };
    let threads = from_env.or(flag);
    if let Some(n) = threads {
        if n == 0 {
            return Err("thread count must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}
