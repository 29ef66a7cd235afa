use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ta_core::sim::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "ta-decode", version, about = "Turbo-annihilation decoding of hook errors in BB codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a logical-error-rate experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `[noise] seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `[stopping] workers`.
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides `[output] dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the built-in golden and oracle checks.
    Verify,
    /// Print the matrices and equalizer permutations of a preset code.
    DumpGraph {
        #[arg(long)]
        code: String,
    },
}

const CONFIG_ERROR: u8 = 1;
const RUNTIME_ERROR: u8 = 2;

fn run(config: PathBuf, seed: Option<u64>, workers: Option<usize>, out_dir: Option<PathBuf>) -> ExitCode {
    let mut cfg = match ExperimentConfig::load(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    if let Some(s) = seed {
        cfg.noise.seed = s;
    }
    if workers.is_some() {
        cfg.stopping.workers = workers;
    }
    if let Some(d) = out_dir {
        cfg.output.dir = d;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(CONFIG_ERROR);
    }
    let records = sim::run_experiment(&cfg, |r| {
        eprintln!(
            "{} {:>6} p={:<8} trials={:<8} failures={:<5} ler={:.3e} [{:.3e}, {:.3e}]",
            r.code, r.decoder, r.p, r.trials, r.failures, r.ler, r.ci_low, r.ci_high
        );
    });
    let written = records.and_then(|r| sim::write_outputs(&cfg, &r));
    match written {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(RUNTIME_ERROR)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            workers,
            out_dir,
        } => run(config, seed, workers, out_dir),
        Command::Verify => {
            let outcomes = sim::verify_all();
            for o in &outcomes {
                println!(
                    "{} {}: {}",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.name,
                    o.detail
                );
            }
            if outcomes.iter().all(|o| o.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(RUNTIME_ERROR)
            }
        }
        Command::DumpGraph { code } => match sim::dump_graph(&code) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(CONFIG_ERROR)
            }
        },
    }
}
