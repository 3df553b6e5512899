//! Smallest eigenvalue of the boundary matrix M against chain length.

use std::f64::consts::PI;

use nufloquet::hp;
use nufloquet::majorana::{Boundary, ModelParams};

fn main() -> nufloquet::Result<()> {
    for h in [PI / 3.0, PI / 6.0] {
        for l in [50, 100, 200] {
            let e = hp::smallest_m_eigenvalue(&ModelParams::uniform(l, 2.0, 0.2, 0.0, h, Boundary::Open))?;
            println!("h = {h:.4}, L = {l:>3}: |μ| = {:.3e} ({:?})", e.value.norm(), e.route);
        }
    }
    Ok(())
}
