//! Gaussian engine against the dense oracle on a six-site chain.

use std::f64::consts::PI;

use nufloquet::harness::{self, VerifyTask};
use nufloquet::majorana::{Boundary, ModelParams};

fn main() -> nufloquet::Result<()> {
    let p = ModelParams::uniform(6, 2.0, 0.2, 0.0, PI / 3.0, Boundary::Open);
    let (checks, _) = harness::verification_checks(&p, &VerifyTask::default())?;
    for c in checks {
        println!("{:<28} {:>10.2e} / {:<8.0e} {}", c.name, c.value, c.tol, if c.pass { "ok" } else { "FAIL" });
    }
    Ok(())
}
