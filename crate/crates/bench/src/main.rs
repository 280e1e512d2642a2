use std::path::PathBuf;
use std::process::ExitCode;

use cdqaoa_bench::{cmd_generate, cmd_oracle, cmd_report, cmd_sweep, BenchError, SweepSpec};
use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "cdqaoa", version, about = "Counterdiabatic portfolio QAOA benchmarks")]
struct Cli {
    /// Sweep spec, JSON or `key = value` lines. Defaults to the default benchmark.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for generated instances (overrides `base_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Output path: a directory for generate/report, a CSV file for sweep.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the spec's instances as JSON files.
    Generate,
    /// Exact feasible-subspace extrema and penalty separation of one instance.
    Oracle { instance: PathBuf },
    /// Run every (instance, method, topology, p, alpha) cell and write CSV.
    Sweep,
    /// Pivot a sweep CSV into plot-data series.
    Report { csv: PathBuf },
}

#[derive(Serialize)]
struct Files {
    files: Vec<PathBuf>,
}

fn spec(cli: &Cli) -> Result<SweepSpec, BenchError> {
    let mut spec = match &cli.config {
        Some(path) => SweepSpec::load(path)?,
        None => SweepSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.base_seed = seed;
    }
    Ok(spec)
}

fn run(cli: &Cli) -> Result<String, BenchError> {
    let json = match &cli.command {
        Command::Generate => {
            let dir = cli.out.clone().unwrap_or_else(|| "instances".into());
            serde_json::to_string_pretty(&Files {
                files: cmd_generate(&spec(cli)?, &dir)?,
            })?
        }
        Command::Oracle { instance } => serde_json::to_string_pretty(&cmd_oracle(instance)?)?,
        Command::Sweep => {
            let spec = spec(cli)?;
            let out = cli
                .out
                .clone()
                .or_else(|| spec.out.clone())
                .unwrap_or_else(|| "results.csv".into());
            serde_json::to_string_pretty(&cmd_sweep(&spec, cli.jobs, &out)?)?
        }
        Command::Report { csv } => {
            let dir = cli.out.clone().unwrap_or_else(|| "report".into());
            serde_json::to_string_pretty(&Files {
                files: cmd_report(csv, &dir)?,
            })?
        }
    };
    Ok(json)
}

fn fail(code: &str, message: String) -> ExitCode {
    let body = serde_json::json!({ "error": code, "message": message });
    eprintln!("{body}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return fail("usage", e.to_string().trim_end().to_string());
        }
    };
    match run(&cli) {
        Ok(json) => {
            println!("{json}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.code(), e.to_string()),
    }
}
