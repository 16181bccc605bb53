use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use obrb::commands;
use obrb::config::{parse_config, RunConfig};
use obrb::suites::Suite;
use obrb::{Error, Result};

/// Built into the binary; used by `verify` when no config is given.
const DEFAULT_CONFIG: &str = include_str!("../configs/default.conf");

#[derive(Parser)]
#[command(name = "obrb", version, about = "Boussinesq convection with a non-local temperature boundary condition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration, writing diagnostics.csv and checkpoints.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `[run] out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite.
    Verify {
        #[arg(long, value_parser = clap::builder::ValueParser::new(|s: &str| s.parse::<Suite>()))]
        suite: Suite,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the steady state and write equilibrium.chk.
    Equilibrium {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate the linear stability condition; exits 1 when it fails.
    Stability {
        #[arg(long)]
        config: PathBuf,
    },
    /// Discrete Poincare constant of the rectangle.
    Poincare {
        #[arg(long)]
        nx: usize,
        #[arg(long)]
        ny: usize,
        #[arg(long)]
        lx: f64,
        #[arg(long)]
        ly: f64,
    },
}

fn print(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("output serialises"));
}

fn with_out(mut c: RunConfig, out: Option<PathBuf>) -> RunConfig {
    if let Some(out) = out {
        c.out_dir = out;
    }
    c
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config, out } => {
            let c = with_out(commands::load_config(&config)?, out);
            print(&commands::run(&c)?);
        }
        Command::Verify { suite, config, out } => {
            let c = match config {
                Some(p) => commands::load_config(&p)?,
                None => parse_config(DEFAULT_CONFIG).map_err(|source| Error::Config {
                    path: "<built-in default>".into(),
                    source,
                })?,
            };
            let c = with_out(c, out);
            match commands::verify(suite, &c) {
                Ok(report) => {
                    print(&report);
                    println!("suite {suite}: PASS");
                }
                Err(e @ Error::Assertion { .. }) => {
                    let report = c.out_dir.join(suite.name()).join("report.json");
                    eprintln!("{e}\nreport: {}", report.display());
                    println!("suite {suite}: FAIL");
                    return Ok(e.exit_code());
                }
                Err(e) => return Err(e),
            }
        }
        Command::Equilibrium { config } => print(&commands::equilibrium(&commands::load_config(&config)?)?),
        Command::Stability { config } => {
            let (v, ok) = commands::stability(&commands::load_config(&config)?)?;
            print(&v);
            if !ok {
                eprintln!("stability condition violated");
                return Ok(1);
            }
        }
        Command::Poincare { nx, ny, lx, ly } => print(&commands::poincare(nx, ny, lx, ly)?),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("obrb: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
