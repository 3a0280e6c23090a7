use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use magstark::harness::{emit_report, run_experiment, ExperimentKind, Format, ScenarioConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    /// Trapped phase-space volume, closed form and Monte Carlo
    Volume,
    /// Bottom-of-well levels against the harmonic prediction
    Bottom,
    /// Eigenvalue counts against the Weyl prediction
    Weyl,
    /// Widths of the resonances in the window
    Gap,
    /// Empty window and resolvent bounds without trapping
    Nontrap,
}

impl From<Command> for ExperimentKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Volume => ExperimentKind::Volume,
            Command::Bottom => ExperimentKind::Bottom,
            Command::Weyl => ExperimentKind::Weyl,
            Command::Gap => ExperimentKind::Gap,
            Command::Nontrap => ExperimentKind::Nontrap,
        }
    }
}

/// Resonance experiments for magnetic Stark Hamiltonians.
#[derive(Parser, Debug)]
#[command(name = "magstark", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scenario file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the scenario's `output` entry, then `out`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated output formats
    #[arg(long, value_delimiter = ',', default_value = "json,csv,svg")]
    emit: Vec<String>,
    /// Worker threads
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cli: Cli) -> Result<bool, String> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    let formats = cli.emit.iter().map(|s| s.parse::<Format>()).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let cfg = ScenarioConfig::load(&cli.config).map_err(|e| e.to_string())?;
    let out = cli.out.or_else(|| cfg.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    let report = run_experiment(cli.command.into(), &cfg).map_err(|e| e.to_string())?;
    for p in emit_report(&report, &formats, &out).map_err(|e| e.to_string())? {
        eprintln!("wrote {}", p.display());
    }
    for n in &report.notes {
        eprintln!("note: {n}");
    }
    for c in &report.verdicts {
        println!("{} {}: {} (value {}, tolerance {})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail, c.value, c.tolerance);
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
