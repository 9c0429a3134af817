use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use stratsmooth::harness::{self, CheckKind, PathSpec, RunConfig};

#[derive(Parser)]
#[command(name = "stratsmooth", version, about = "Smooth approximation on stratified sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    Frontier,
    Whitney,
    Flatness,
    Tube,
}

#[derive(Subcommand)]
enum Command {
    /// Certify, build g, verify, and write report.json and samples.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate g along segment:<from>:<to>:<steps> and print CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        path: String,
    },
    /// Run a single certificate and print it as JSON.
    Certify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        check: Check,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let code = match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            harness::exit_code_for(&e)
        }
    };
    eprintln!("elapsed: {:.3}s", start.elapsed().as_secs_f64());
    ExitCode::from(code as u8)
}

fn execute(command: Command) -> stratsmooth::Result<i32> {
    match command {
        Command::Run { config, out_dir, seed } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.sampling.seed = s;
            }
            let out = harness::run(&cfg, out_dir.as_deref())?;
            println!("{}: {}", out.report.status, out.report_path.display());
            for f in &out.report.failures {
                println!("  {f}");
            }
            Ok(out.report.exit_code())
        }
        Command::Sweep { config, path } => {
            let cfg = RunConfig::load(&config)?;
            let rows = harness::sweep(&cfg, &PathSpec::parse(&path)?)?;
            harness::write_sweep(std::io::stdout().lock(), &rows)?;
            Ok(harness::EXIT_PASS)
        }
        Command::Certify { config, check } => {
            let cfg = RunConfig::load(&config)?;
            let kind = match check {
                Check::Frontier => CheckKind::Frontier,
                Check::Whitney => CheckKind::Whitney,
                Check::Flatness => CheckKind::Flatness,
                Check::Tube => CheckKind::Tube,
            };
            let (json, pass) = harness::certify(&cfg, kind)?;
            println!("{}", serde_json::to_string_pretty(&json)?);
            Ok(if pass { harness::EXIT_PASS } else { harness::EXIT_CERTIFICATION })
        }
    }
}
