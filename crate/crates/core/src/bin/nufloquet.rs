use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nufloquet::error::Error;
use nufloquet::harness::{self, Engine, RunConfig};

/// Run a JSON-described experiment and write CSV/JSON artifacts.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the model and disorder seeds.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    engine: Option<Engine>,
}

fn load(args: &Args) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::from_path(&args.config)?;
    if let Some(s) = args.seed {
        cfg = cfg.with_seed(s);
    }
    if let Some(e) = args.engine {
        cfg.engine = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = load(&args).and_then(|cfg| harness::run(&cfg, &args.out, args.workers));
    match result {
        Ok(summary) => {
            println!("{}", serde_json::to_string(&summary).unwrap());
            if summary.passed { ExitCode::SUCCESS } else { ExitCode::from(harness::EXIT_NUMERICAL as u8) }
        }
        Err(e) => {
            let doc = harness::error_json(&e);
            if std::fs::create_dir_all(&args.out).is_ok() {
                let _ = harness::write_atomic(&args.out, "error.json", format!("{doc:#}\n").as_bytes());
            }
            eprintln!("{doc}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
