//! Quasi-energies of an open chain across the imaginary-gap transition.

use std::f64::consts::PI;

use nufloquet::floquet::{self, SpectrumOptions};
use nufloquet::majorana::{Boundary, ModelParams};

fn main() -> nufloquet::Result<()> {
    let opts = SpectrumOptions { skip_cond: true, ..Default::default() };
    println!("{:>8} {:>12} {:>12} {:>12} {:>4}", "h_y", "bulk gap", "mid Re", "mid Im", "π");
    for k in 1..10 {
        let h = k as f64 * PI / 20.0;
        let p = ModelParams::uniform(200, 2.0, 0.4, 1.0, h, Boundary::Open);
        let spec = floquet::quasi_energies(&floquet::build_floquet_matrix(&p, 0)?, &opts)?;
        let mid = spec.mid_gap_value().unwrap_or_default();
        println!("{h:>8.4} {:>12.4e} {:>12.4} {:>12.4e} {:>4}", spec.bulk_gap(), mid.re, mid.im, spec.pi_branch_count());
    }
    Ok(())
}
