use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use np_spectra_cli::{apply_thread_env, load, run, verify, CliError, RunOptions, VerifyOptions};
use np_spectra_core::GeometrySpec;

#[derive(Parser)]
#[command(name = "np-spectra", version, about = "Neumann-Poincare spectra on rough boundaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Exit with status 4 when any pass criterion fails.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run the built-in oracle suite.
    Verify {
        /// Circle oracles only.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value = "verify-output")]
        output_dir: PathBuf,
    },
    /// Print sampled points and normals of a geometry as CSV.
    Geometry {
        spec: PathBuf,
        #[arg(long)]
        sample: usize,
    },
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    apply_thread_env(std::env::var("NP_SPECTRA_THREADS").ok().as_deref())?;
    match cli.command {
        Command::Run { config, strict, output_dir } => {
            let loaded = load(&config)?;
            let outcome = run(&loaded, &RunOptions { strict, output_dir })?;
            println!("wrote {} files to {}", outcome.files.len() + 1, outcome.output_dir.display());
            for f in &outcome.failures {
                println!("FAIL {f}");
            }
            Ok(outcome.exit_code(strict))
        }
        Command::Verify { quick, output_dir } => {
            let start = Instant::now();
            let report = verify(&VerifyOptions { quick, output_dir, ..VerifyOptions::default() })?;
            print!("{}", report.table());
            println!("total: {:.2} s", start.elapsed().as_secs_f64());
            println!("{}", if report.all_pass() { "all oracles passed" } else { "some oracles FAILED" });
            Ok(report.exit_code())
        }
        Command::Geometry { spec, sample } => {
            let geom = GeometrySpec::load(&spec)?.build()?;
            print!("{}", np_spectra_cli::runner::sample_geometry(&geom, sample)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
