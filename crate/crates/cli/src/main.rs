use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ekp_cli::sweep::{parse_manifest, run_sweep};
use ekp_cli::{configure_threads, execute, Invocation, EXIT_INVALID};

/// Euler-Korteweg-Poisson numerical laboratory.
///
/// Scenarios: simulate, madelung-check, extend, subsolution-check, whitney,
/// weak-strong. `sweep` takes a manifest as `--config` and runs each line as
/// its own process.
#[derive(Parser, Debug)]
#[command(name = "ekp", version)]
struct Cli {
    scenario: String,
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing; defaults to the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
}

fn sweep(cli: &Cli) -> Result<i32, String> {
    let text = std::fs::read_to_string(&cli.config).map_err(|e| format!("{}: {e}", cli.config.display()))?;
    let base = cli.config.parent().map(PathBuf::from).unwrap_or_default();
    let runs = parse_manifest(&text, &base)?;
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let codes = run_sweep(&exe, &runs, workers);
    for (run, code) in runs.iter().zip(&codes) {
        let out = run.out.as_ref().map_or(String::new(), |o| o.display().to_string());
        println!("{code} {} {} {out}", run.scenario, run.config.display());
    }
    Ok(codes.into_iter().max().unwrap_or(0))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads(std::env::var("EKP_THREADS").ok().as_deref()) {
        eprintln!("ekp: {e}");
        return ExitCode::from(EXIT_INVALID as u8);
    }
    let code = if cli.scenario == "sweep" {
        sweep(&cli).unwrap_or_else(|e| {
            eprintln!("ekp: {e}");
            EXIT_INVALID
        })
    } else {
        let outcome = execute(&Invocation {
            scenario: cli.scenario.clone(),
            config: cli.config.clone(),
            out: cli.out.clone(),
            seed: cli.seed,
        });
        if let Some(m) = &outcome.message {
            eprintln!("ekp: {m}");
        }
        outcome.code
    };
    ExitCode::from(code.clamp(0, 255) as u8)
}
