use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use fracmax_cli::{run_config, ConfigSource, Experiment, RunError};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Maximal,
    DerivativeCheck,
    Inequalities,
    Converge,
    Tail,
    Uniform,
    #[value(name = "probe-1d")]
    Probe1d,
    OracleCompare,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Maximal => Experiment::Maximal,
            Command::DerivativeCheck => Experiment::DerivativeCheck,
            Command::Inequalities => Experiment::Inequalities,
            Command::Converge => Experiment::Converge,
            Command::Tail => Experiment::Tail,
            Command::Uniform => Experiment::Uniform,
            Command::Probe1d => Experiment::Probe1d,
            Command::OracleCompare => Experiment::OracleCompare,
        }
    }
}

/// Fractional maximal function experiments.
#[derive(Debug, Parser)]
#[command(name = "fracmax", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// `key=value` on a dotted config path, e.g. `grid.h=0.01`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<u8, RunError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool is configured once");
    }
    let experiment = Experiment::from(cli.command);
    let source = match &cli.config {
        Some(path) => ConfigSource::from_file(path)?,
        None => ConfigSource::from_text("<defaults>", ""),
    };
    let config = source.resolve_for(experiment, &cli.overrides)?;
    let out = cli
        .out
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(experiment.name()));
    let outcome = run_config(&config, &out)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!(
        "{experiment}: {} ({} files in {})",
        if outcome.flagged { "flagged" } else { "passed" },
        outcome.files.len(),
        out.display()
    );
    Ok(outcome.exit_code() as u8)
}
