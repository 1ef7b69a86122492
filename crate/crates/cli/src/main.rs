use std::path::PathBuf;
use std::process::ExitCode;

use anisorib::experiment::{self, read_domain, read_segments, render_svg, write_rows, ExperimentConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anisorib", version, about = "Rib patterns that maximize the first eigenvalue of anisotropic membranes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Draw a segment CSV over a domain as SVG.
    Render {
        segments: PathBuf,
        /// TOML file with `outer`/`holes`, or a config with a `[domain]` table.
        domain: PathBuf,
        out: PathBuf,
    },
    /// Validate a config and its mesh feasibility without solving.
    Check { config: PathBuf },
}

fn run(cli: Cli) -> anisorib::Result<bool> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = experiment::run(&cfg)?;
            for p in &report.outputs {
                println!("wrote {}", p.display());
            }
            for c in &report.checks {
                println!("{c}");
            }
            Ok(report.passed())
        }
        Command::Render { segments, domain, out } => {
            let c = read_segments(&segments)?;
            let omega = read_domain(&domain)?;
            render_svg(&c, &omega, &out)?;
            println!("wrote {} ({} segments)", out.display(), c.len());
            Ok(true)
        }
        Command::Check { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (rows, checks) = experiment::check(&cfg)?;
            if !rows.is_empty() {
                std::fs::create_dir_all(&cfg.out)?;
                let p = cfg.out.join("feasibility.csv");
                write_rows(&rows, &p)?;
                println!("wrote {}", p.display());
            }
            for c in &checks {
                println!("{c}");
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
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
