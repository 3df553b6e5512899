//! Runs a JSON experiment config and prints the manifest summary.

use std::path::Path;

use nufloquet::harness::{self, RunConfig};

fn main() -> nufloquet::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "crates/core/configs/verify_l6.json".into());
    let cfg = RunConfig::from_path(Path::new(&path))?;
    cfg.validate()?;
    let out = tempfile::tempdir()?;
    let summary = harness::run(&cfg, out.path(), None)?;
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(())
}
