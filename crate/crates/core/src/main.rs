use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use epmflux::cli::{self, Manifest, RunOptions, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "epmflux", version, about = "End-point-measurement fluctuation theorems on small quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario configuration.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Tolerance for whole-table identities.
        #[arg(long)]
        tol_identity: Option<f64>,
        /// Tolerance for row-wise identities.
        #[arg(long)]
        tol_row: Option<f64>,
    },
    /// Run a scenario once per value of a dotted parameter path.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Values as JSON literals, comma separated or repeated.
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol_identity: Option<f64>,
        #[arg(long)]
        tol_row: Option<f64>,
    },
    /// Coherence sweep of the unitary figure scenario.
    Fig2 {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Coherence sweep of the dissipative figure scenario.
    Fig3 {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn print_manifest(dir: &std::path::Path, m: &Manifest) {
    println!("{}: {} assertions, artifacts in {}", m.name, m.assertions.len(), dir.display());
    for a in m.failures() {
        let value = a.value.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        let detail = a.detail.as_deref().unwrap_or("");
        println!("  FAIL {}.{} value={value} defect={:?} tol={} {detail}", a.task, a.name, a.defect, a.tolerance);
    }
    println!("{}", if m.passed { "PASS" } else { "FAIL" });
}

fn main() -> ExitCode {
    let args = Cli::parse();
    if let Err(e) = cli::configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    let code = match args.command {
        Command::Run { config, out, seed, tol_identity, tol_row } => {
            let r = cli::run_scenario(&config, &RunOptions { out_dir: out, seed, tol_identity, tol_row });
            match &r {
                Ok(o) => print_manifest(&o.dir, &o.manifest),
                Err(e) => eprintln!("error: {e}"),
            }
            cli::exit_code(&r, |o| o.passed())
        }
        Command::Sweep { config, param, values, out, seed, tol_identity, tol_row } => {
            let values: Vec<_> = values.iter().map(|v| cli::parse_value(v)).collect();
            let r = cli::sweep(&config, &param, &values, &RunOptions { out_dir: out, seed, tol_identity, tol_row });
            match &r {
                Ok(o) => {
                    for p in &o.points {
                        println!("{param}={} {}", p.value, if p.passed { "PASS" } else { "FAIL" });
                        for f in &p.failures {
                            println!("  FAIL {f}");
                        }
                    }
                    println!("merged: {}", o.csv.display());
                    println!("{}", if o.passed { "PASS" } else { "FAIL" });
                }
                Err(e) => eprintln!("error: {e}"),
            }
            cli::exit_code(&r, |o| o.passed)
        }
        Command::Fig2 { out } => figure("fig2", out),
        Command::Fig3 { out } => figure("fig3", out),
    };
    ExitCode::from(code as u8)
}

fn figure(name: &str, out: PathBuf) -> i32 {
    let r = cli::run_builtin(name, &RunOptions::with_out(out));
    match &r {
        Ok(o) => print_manifest(&o.dir, &o.manifest),
        Err(e) => eprintln!("error: {e}"),
    }
    cli::exit_code(&r, |o| o.passed())
}
