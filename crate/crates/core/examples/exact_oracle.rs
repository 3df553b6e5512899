//! Period-doubled ⟨Z⟩ from a random Z-product state on the dense state vector.

use nufloquet::exact::{self, DenseState, YyPlacement};
use nufloquet::majorana::{Boundary, ModelParams};

fn main() -> nufloquet::Result<()> {
    let p = ModelParams::uniform(10, 0.75, 0.3, 0.0, 1.5, Boundary::Open).with_j_yy(0.3).with_seed(1);
    let start = DenseState::from_z_bits(&exact::random_z_bits(p.l, 1))?;
    let (_, m) = exact::trajectory(start, &p, 40, YyPlacement::AfterXx)?;
    for (t, m) in m.iter().enumerate() {
        println!("t = {t:>2}  ⟨Z⟩ = {:+.6}  ⟨Y⟩ = {:+.6}", m.mean_z(), m.mean_y());
    }
    Ok(())
}
