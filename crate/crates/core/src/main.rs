use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lowres_synth::cli::{load_spec, run_synthesis, verify, write_outputs, CliError};

#[derive(Parser)]
#[command(
    name = "synth",
    version,
    about = "Low-resolution DAC MIMO radar waveform synthesis"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a waveform and write CSV data plus a manifest.
    Run {
        /// Key-value config file or a manifest.json from an earlier run.
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `key=value`, applied after the file. Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the operator and scalar-function property checks.
    Verify {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Flip the sign of the forward DFT (negative control).
        #[arg(long, hide = true)]
        corrupt_dft_sign: bool,
    },
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SYNTH_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("SYNTH_THREADS must be a nonnegative integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn execute(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Run {
            config,
            out,
            overrides,
        } => {
            let spec = load_spec(&config, &overrides)?;
            let output = run_synthesis(&spec)?;
            write_outputs(&output, &out)?;
            let r = &output.result;
            eprintln!(
                "{} after {} iterations, final cost {:.6e}, {:.2} s",
                if r.converged {
                    "converged"
                } else {
                    "not converged"
                },
                r.iterations,
                r.final_cost,
                output.duration_s
            );
            Ok(if r.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Verify {
            config,
            overrides,
            corrupt_dft_sign,
        } => {
            let spec = load_spec(&config, &overrides)?;
            let checks = verify(&spec, corrupt_dft_sign)?;
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            Ok(if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    match execute(args.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
