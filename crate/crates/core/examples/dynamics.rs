//! Gaussian evolution from a Fock state into the steady state.

use std::f64::consts::PI;

use nufloquet::gaussian::{self, GaussianEngine};
use nufloquet::majorana::{Boundary, ModelParams};

fn main() -> nufloquet::Result<()> {
    let p = ModelParams::uniform(20, 2.0, 0.2, 0.0, PI / 3.0, Boundary::Open);
    let engine = GaussianEngine::new(&p)?;
    let v = nufloquet::floquet::build_floquet_matrix(&p, 0)?;
    let [even, odd] = gaussian::steady_states(&v)?;
    let occ: Vec<bool> = (0..p.l).map(|j| j % 3 == 0 || j == 1).collect();
    let mut s = gaussian::initial_fock_state(&occ)?;
    for t in 0..=20 {
        let o = gaussian::observables(&s)?;
        println!(
            "t = {t:>2}  ⟨Y⟩ = {:+.6}  ⟨ZZ⟩ = {:+.6}  d(even) = {:.2e}  d(odd) = {:.2e}",
            o.mean_y(),
            o.mean_zz(),
            gaussian::distance(&s, &even),
            gaussian::distance(&s, &odd)
        );
        s = engine.step(&s)?;
    }
    Ok(())
}
