use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cajsim::harness::output::version_text;
use cajsim::harness::verify::run_verify;
use cajsim::harness::{
    catalog, default_workers, emit_analytic, emit_csv, find_scenario, run_scenario, RunManifest,
};
use cajsim::{CajError, Result};

#[derive(Parser)]
#[command(name = "cajsim", version, about = "Cooperative anti-jamming Monte Carlo simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the scenario catalog.
    ListScenarios,
    /// Run one scenario and write `<id>.csv` plus a manifest.
    Run {
        #[arg(long)]
        scenario: String,
        /// Trials per sweep point (defaults to the scenario's own count).
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to CAJSIM_WORKERS or all cores.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Write the closed-form outage curves of an outage scenario.
    Analytic {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Run the built-in numerical self-checks.
    Verify {
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CajError::io(dir, e))
}

fn workers_or_default(w: Option<usize>) -> Result<usize> {
    match w {
        Some(0) => Err(CajError::config("--workers must be at least 1")),
        Some(n) => Ok(n),
        None => default_workers(),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::ListScenarios => {
            for sc in catalog()? {
                println!("{:<16} {:<10} {}", sc.id, format!("{:?}", sc.kind).to_lowercase(), sc.title);
            }
        }
        Command::Run {
            scenario,
            trials,
            seed,
            workers,
            out,
        } => {
            let mut sc = find_scenario(&scenario)?;
            if let Some(t) = trials {
                sc = sc.with_trials(t)?;
            }
            if let Some(s) = seed {
                sc = sc.with_seed(s);
            }
            let workers = workers_or_default(workers)?;
            ensure_dir(&out)?;
            let started = chrono::Utc::now().to_rfc3339();
            let result = run_scenario(&sc, workers)?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            let csv_name = format!("{}.csv", sc.id);
            let csv_path = out.join(&csv_name);
            emit_csv(&result.records, &csv_path)?;
            let manifest = RunManifest {
                scenario: sc.id.clone(),
                version: version_text(),
                started,
                finished: chrono::Utc::now().to_rfc3339(),
                total_frames: result.total_frames,
                trials_per_point: sc.trials,
                master_seed: sc.master_seed,
                workers,
                outputs: vec![csv_name],
            };
            manifest.write(&out.join(format!("{}.manifest.json", sc.id)))?;
            println!("wrote {} ({} rows, {} frames)", csv_path.display(), result.records.len(), result.total_frames);
        }
        Command::Analytic { scenario, out } => {
            let sc = find_scenario(&scenario)?;
            ensure_dir(&out)?;
            let path = out.join(format!("{}.analytic.csv", sc.id));
            let records = emit_analytic(&sc, &path)?;
            println!("wrote {} ({} rows)", path.display(), records.len());
        }
        Command::Verify { workers } => {
            let workers = workers_or_default(workers)?;
            let mut all = true;
            for c in run_verify(workers)? {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                all &= c.passed;
            }
            return Ok(all);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
