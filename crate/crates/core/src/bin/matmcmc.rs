use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use matmcmc::experiment::{exit_code, run, ExperimentConfig};
use matmcmc::Error;

#[derive(Parser)]
#[command(name = "matmcmc", version, about = "Run matrix-valued MCMC experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment and write its outputs.
    Run(Opts),
    /// Check a config without running it.
    Validate(Opts),
}

#[derive(Args)]
struct Opts {
    /// Config path (may also be given positionally).
    #[arg(long = "config", value_name = "PATH")]
    config_flag: Option<PathBuf>,
    #[arg(value_name = "CONFIG", conflicts_with = "config_flag")]
    config: Option<PathBuf>,
    /// Output directory, overriding the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "MATMCMC_THREADS")]
    threads: Option<usize>,
    /// Seed, overriding the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(opts: &Opts) -> Result<ExperimentConfig, Error> {
    let path = opts
        .config_flag
        .as_ref()
        .or(opts.config.as_ref())
        .ok_or_else(|| Error::Config("no config file given".into()))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = opts.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &opts.out {
        cfg = cfg.with_output_dir(out.clone());
    }
    Ok(cfg)
}

fn fail(stage: &str, e: &Error) -> ExitCode {
    eprintln!("{stage}: {e}");
    ExitCode::from(exit_code(e) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate(opts) => match load(&opts).and_then(|c| c.validate()) {
            Ok(()) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => fail("invalid config", &e),
        },
        Command::Run(opts) => {
            if let Some(n) = opts.threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: could not set thread count: {e}");
                }
            }
            let cfg = match load(&opts).and_then(|c| c.validate().map(|_| c)) {
                Ok(c) => c,
                Err(e) => return fail("invalid config", &e),
            };
            match run(&cfg) {
                Ok(m) => {
                    println!("{}: wrote {} files to {}", m.experiment, m.outputs.len() + 1, cfg.output_dir().display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&format!("{} failed", cfg.name()), &e),
            }
        }
    }
}
