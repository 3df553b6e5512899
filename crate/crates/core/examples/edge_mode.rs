//! Edge π-mode from the Floquet kernel, checked against the analytic decay rate.

use std::f64::consts::PI;

use nufloquet::edge::{self, KernelOptions, ModeSign, Side};
use nufloquet::floquet::{self, SpectrumOptions};
use nufloquet::majorana::{Boundary, ModelParams};

fn main() -> nufloquet::Result<()> {
    let (beta, h) = (2.0, PI / 3.0);
    let p = ModelParams::uniform(400, beta, 0.0, 0.0, h, Boundary::Open);
    let v = floquet::build_floquet_matrix(&p, 0)?;
    let spec = floquet::quasi_energies(&v, &SpectrumOptions { skip_cond: true, ..Default::default() })?;
    let mode = edge::floquet_kernel_mode(&v, &spec, ModeSign::Anticommuting, Side::Left, &KernelOptions::default())?;
    let report = edge::verify_mode(&v, &mode, 1e-8);
    let fit = edge::decay_fit(&mode, 1e-13)?;
    let analytic = edge::analytic_edge_mode(beta, h, p.l, Side::Left)?;
    println!("defect ‖(V + 1)F₀‖ = {:.2e}", report.defect);
    println!("decay slope {:.5}, ln|λ₁| = {:.5}", fit.slope, edge::lambda_1(beta, h).norm().ln());
    println!("overlap with analytic mode {:.12}", mode.overlap(&analytic));
    for (s, n) in mode.pair_norms().iter().take(8).enumerate() {
        println!("site {:>2}: {n:.3e}", s + 1);
    }
    Ok(())
}
