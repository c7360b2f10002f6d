//! quicktalk-sim: run, batch, and validate simulation scenarios.
//!
//! CSV rows go to stdout (or `--out`); summaries and warnings go to stderr
//! so redirected output stays machine-readable. Exit codes: 0 success,
//! 1 load or usage error (nothing written), 2 panic inside a simulation.

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::{env, fs};

use clap::{Parser, Subcommand};
use quicktalk_core::report::{render_csv, ReportRow, Summary};
use quicktalk_core::scenario::{Scenario, Strictness};
use quicktalk_core::sim::{RunOutput, Simulation};
use rayon::prelude::*;

#[derive(Parser)]
#[command(
    name = "quicktalk-sim",
    version,
    about = "Deterministic QuickTalk protocol simulator",
    after_help = "Set QUICKTALK_STRICT=0 to downgrade unknown scenario keys to warnings."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario once and emit one CSV row per transaction.
    Run {
        /// Scenario file (.scn).
        scenario: PathBuf,
        /// Override the seed pinned in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        /// Write CSV to this file instead of stdout.
        #[arg(long, value_name = "FILE.csv")]
        out: Option<PathBuf>,
    },
    /// Run a scenario under several seeds and merge the rows.
    Batch {
        /// Scenario file (.scn).
        scenario: PathBuf,
        /// Comma-separated seed list, e.g. --seeds 1,2,3.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        /// Write merged CSV to this file instead of stdout.
        #[arg(long, value_name = "FILE.csv")]
        out: Option<PathBuf>,
    },
    /// Parse and check a scenario without running it.
    Validate {
        /// Scenario file (.scn).
        scenario: PathBuf,
    },
}

enum Failure {
    /// Load, usage, or I/O problem; exit 1.
    Fatal(String),
    /// A simulation violated an internal invariant; exit 2.
    Panicked(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version print to stdout and are not failures.
            let code = u8::from(err.use_stderr());
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Fatal(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(Failure::Panicked(message)) => {
            eprintln!("error: simulation panicked: {message}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { scenario, seed, out } => {
            let scenario = load(&scenario)?;
            let seed = seed.unwrap_or(scenario.seed);
            let output = run_guarded(&Simulation::new(scenario), seed)?;
            emit_csv(&output.rows, out.as_deref())?;
            print_summary(&format!("{} seed {seed}", output.scenario_name), &output.rows, output.download_mbps);
            Ok(())
        }
        Command::Batch { scenario, seeds, out } => {
            if seeds.is_empty() {
                return Err(Failure::Fatal("--seeds needs at least one seed".into()));
            }
            let scenario = load(&scenario)?;
            let name = scenario.name.clone();
            let sim = Simulation::new(scenario);
            // Buffer every run before emitting anything, so a late panic
            // cannot leave a truncated CSV behind.
            let outputs: Vec<Result<RunOutput, Failure>> =
                seeds.par_iter().map(|&seed| run_guarded(&sim, seed)).collect();
            let mut runs = Vec::with_capacity(outputs.len());
            for output in outputs {
                runs.push(output?);
            }
            let mut merged: Vec<ReportRow> =
                runs.iter().flat_map(|run| run.rows.iter().cloned()).collect();
            merged.sort_by_key(|row| (row.seed, row.txn_id));
            emit_csv(&merged, out.as_deref())?;
            for run in &runs {
                print_summary(
                    &format!("{name} seed {}", run.seed),
                    &run.rows,
                    run.download_mbps,
                );
            }
            let pooled_download = runs.iter().find_map(|run| run.download_mbps);
            print_summary(&format!("{name} pooled over {} seeds", runs.len()), &merged, pooled_download);
            Ok(())
        }
        Command::Validate { scenario: path } => {
            let scenario = load(&path)?;
            println!(
                "ok: {} (runs={}, seed={}, {} IoT device{}, {} CoAP session{}, download {})",
                scenario.name,
                scenario.runs,
                scenario.seed,
                scenario.iot.len(),
                if scenario.iot.len() == 1 { "" } else { "s" },
                scenario.coap.len(),
                if scenario.coap.len() == 1 { "" } else { "s" },
                if scenario.download.is_some() { "on" } else { "off" },
            );
            Ok(())
        }
    }
}

fn strictness() -> Strictness {
    match env::var("QUICKTALK_STRICT") {
        Ok(v) if v == "0" => Strictness::Lenient,
        _ => Strictness::Strict,
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let (scenario, warnings) = Scenario::load(path, strictness())
        .map_err(|err| Failure::Fatal(format!("{}: {err}", path.display())))?;
    for warning in warnings {
        eprintln!("warning: {}: {warning}", path.display());
    }
    Ok(scenario)
}

fn run_guarded(sim: &Simulation, seed: u64) -> Result<RunOutput, Failure> {
    panic::catch_unwind(AssertUnwindSafe(|| sim.run_with_seed(seed)))
        .map_err(|payload| Failure::Panicked(panic_message(&payload)))
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_owned()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown cause".to_owned()
    }
}

fn emit_csv(rows: &[ReportRow], out: Option<&Path>) -> Result<(), Failure> {
    let csv = render_csv(rows);
    match out {
        Some(path) => fs::write(path, csv)
            .map_err(|err| Failure::Fatal(format!("writing {}: {err}", path.display()))),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn print_summary(label: &str, rows: &[ReportRow], download_mbps: Option<f64>) {
    if rows.is_empty() {
        match download_mbps {
            Some(mbps) => eprintln!("[{label}] no transactions; download_mbps: {mbps:.3}"),
            None => eprintln!("[{label}] no transactions"),
        }
        return;
    }
    let summary = Summary::from_rows(label, rows).expect("rows are non-empty");
    eprint!("{}", summary.render());
}
