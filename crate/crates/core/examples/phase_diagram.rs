//! Analytic and numerical phase labels on a coarse (β, h_y) grid.

use std::f64::consts::PI;

use nufloquet::floquet::{self, ClassifyOptions, PhaseSource, SpectrumOptions};
use nufloquet::majorana::{Boundary, ModelParams};

fn main() -> nufloquet::Result<()> {
    let opts = SpectrumOptions { skip_cond: true, ..Default::default() };
    for i in 1..=5 {
        let beta = 0.5 * i as f64;
        let mut line = format!("β = {beta:.1}:");
        for j in 1..=7 {
            let h = j as f64 * PI / 16.0;
            let open = ModelParams::uniform(80, beta, 0.0, 0.0, h, Boundary::Open);
            let closed = ModelParams::uniform(80, beta, 0.0, 0.0, h, Boundary::Periodic);
            let so = floquet::quasi_energies(&floquet::build_floquet_matrix(&open, 0)?, &opts)?;
            let sc = floquet::quasi_energies(&floquet::build_floquet_matrix(&closed, 0)?, &opts)?;
            let numeric = floquet::classify_phase(beta, h, PhaseSource::Numeric { open: &so, bulk: Some(&sc) }, &ClassifyOptions::default())
                .map(|r| r.phase.label())
                .unwrap_or("?");
            line += &format!(" {}/{}", &floquet::classify_analytic(beta, h).label()[..3], &numeric[..3.min(numeric.len())]);
        }
        println!("{line}");
    }
    Ok(())
}
