use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zero_pi::config::RunConfig;
use zero_pi::output::{compare_files, format_number};
use zero_pi::scenario::{run, RunOptions, ScenarioName};

/// Single-photon propagation through a far-detuned Raman medium.
#[derive(Parser)]
#[command(name = "zero-pi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Key = value file applied on top of the command's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Agreement tolerance relative to max|f|.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Include optical pumping and the other loss channels.
    #[arg(long)]
    with_losses: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Output field at each configured depth.
    Propagate(Common),
    /// Damped pulse area against depth for three control levels.
    AreaScan(Common),
    /// Exit field for each configured two-photon detuning.
    DispersionScan(Common),
    /// Temporal modes of a readout train.
    Timebins(Common),
    /// Closed form against the direct integration of the field equations.
    OracleCompare(Common),
    /// Run a named scenario.
    Run {
        scenario: ScenarioName,
        #[command(flatten)]
        common: Common,
    },
    /// Max and L2 differences between two CSV series on the same grid.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
        /// Measure the max difference relative to the largest entry of A.
        #[arg(long)]
        relative: bool,
    },
}

fn load(name: ScenarioName, path: Option<&Path>) -> Result<RunConfig, ExitCode> {
    let base = name.default_config();
    match path {
        None => Ok(base),
        Some(p) => base.overlay_file(p).map_err(|e| {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }),
    }
}

fn scenario(name: ScenarioName, common: &Common) -> ExitCode {
    let cfg = match load(name, common.config.as_deref()) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let opts = RunOptions {
        tol: common.tol,
        with_losses: common.with_losses,
    };
    match run(name, &cfg, &common.out, &opts) {
        Ok(report) => {
            for c in &report.checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                println!(
                    "[{status}] {} = {} (target {})",
                    c.name,
                    format_number(c.value),
                    c.target
                );
            }
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Propagate(c) => scenario(ScenarioName::Custom, c),
        Command::AreaScan(c) => scenario(ScenarioName::AreaSweep, c),
        Command::DispersionScan(c) => scenario(ScenarioName::Fig4Dispersion, c),
        Command::Timebins(c) => scenario(ScenarioName::Fig5Timebins, c),
        Command::OracleCompare(c) => scenario(ScenarioName::OracleCompare, c),
        Command::Run {
            scenario: name,
            common,
        } => scenario(*name, common),
        Command::Compare {
            a,
            b,
            tol,
            relative,
        } => match compare_files(a, b) {
            Ok(d) => {
                let measured = if *relative { d.relative_max() } else { d.max };
                println!("rows = {}", d.rows);
                println!("max = {:e}", d.max);
                println!("max_relative = {:e}", d.relative_max());
                println!("l2 = {:e}", d.l2);
                if measured <= *tol {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
