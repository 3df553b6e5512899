//! Logarithmic versus area-law entanglement of the steady state.

use std::f64::consts::PI;

use nufloquet::floquet::SpectrumOptions;
use nufloquet::gaussian::{self, ModeSelection};
use nufloquet::harness;
use nufloquet::majorana::{Boundary, ModelParams};

fn main() -> nufloquet::Result<()> {
    let l = 120;
    let cuts: Vec<usize> = (1..l).collect();
    for (beta, selection) in [(0.2, ModeSelection::Parity(-1)), (2.0, ModeSelection::Auto)] {
        let p = ModelParams::uniform(l, beta, 0.0, 0.0, PI / 3.0, Boundary::Periodic);
        let ss = harness::steady_state_of(&p, selection, &SpectrumOptions::default())?;
        let s: Vec<f64> = cuts.iter().map(|&c| gaussian::entanglement_entropy(&ss, c)).collect::<Result<_, _>>()?;
        let e = harness::entropy_scaling(l, &cuts, &s);
        let fit = e.fit.expect("fit");
        println!("β = {beta}: S(L/2) = {:.4}, c = {:.4} (R² {:.4}), spread {:.2e}", s[l / 2 - 1], fit.slope, fit.r2, e.spread);
    }
    Ok(())
}
