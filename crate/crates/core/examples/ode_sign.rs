//! Sign of the cubic term in the imaginary-time flow, fixed by the dense oracle.

use std::f64::consts::PI;

use nufloquet::gaussian::{self, GaussianEngine};
use nufloquet::majorana::{Boundary, ModelParams};
use nufloquet::ode::{self, OdeOptions};

fn main() -> nufloquet::Result<()> {
    let report = ode::resolve_cubic_sign(5)?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    let p = ModelParams::uniform(8, 2.0, 0.2, 0.0, PI / 3.0, Boundary::Open);
    let engine = GaussianEngine::new(&p)?;
    let mut a = gaussian::initial_fock_state(&[true, false, true, true, false, false, true, false])?;
    let mut b = a.clone();
    let opts = OdeOptions { sign: report.chosen, ..Default::default() };
    for t in 1..=10 {
        a = engine.step(&a)?;
        b = ode::ode_period(&b, &p, &opts)?;
        println!("t = {t:>2}: ‖C_map - C_ode‖ = {:.2e}", gaussian::distance(&a, &b));
    }
    Ok(())
}
