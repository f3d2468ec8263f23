use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nlks_cli::{CliError, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "nlks", version, about = "Steady-state branches and evolution for the nonlocal KS equation")]
struct Cli {
    /// Output directory; overrides the one in the config.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace the configured branches and write branch files, profiles,
    /// the diagram and a diagnostics report.
    Run { config: PathBuf },
    /// Rerun the diagnostics on stored branch files.
    Diagnose {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Write the bifurcation diagram (CSV + SVG) for stored branch files.
    Diagram {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the configured time integrations.
    Evolve { config: PathBuf },
}

fn report<R: serde::Serialize>(outcome: nlks_cli::Outcome<R>) -> ExitCode {
    println!("{}", serde_json::to_string_pretty(&outcome.report).expect("report serializes"));
    if let Some(p) = &outcome.report_path {
        eprintln!("report written to {}", p.display());
    }
    ExitCode::from(outcome.exit_code() as u8)
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("nlks: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.output_dir.as_deref();
    let result = match cli.command {
        Command::Run { config } => nlks_cli::run(&config, out).map(report),
        Command::Diagnose { files } => nlks_cli::diagnose(&files, out).map(report),
        Command::Diagram { files, out: path } => nlks_cli::diagram(&files, &path).map(|(csv, svg)| {
            println!("{}\n{}", csv.display(), svg.display());
            ExitCode::SUCCESS
        }),
        Command::Evolve { config } => nlks_cli::evolve(&config, out).map(report),
    };
    result.unwrap_or_else(fail)
}
