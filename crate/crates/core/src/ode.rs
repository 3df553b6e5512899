//! Correlation-matrix equation of motion for the imaginary-time factor.
//!
//! For `|ψ(x)⟩ ∝ e^{x Q}|ψ⟩` with `Q` quadratic, the matrix `C = ⟨v v†⟩`
//! obeys `dC/dx = {H, C} + s·2 C H C`, where `H` is the Nambu form of `Q`.
//! The sign `s` is a parameter; [`resolve_cubic_sign`] settles it against
//! the state-vector engine.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{self, DenseState};
use crate::floquet::{exp_factor, FloquetFactors};
use crate::gaussian::{self, w_matrix, CorrelationState};
use crate::linalg::{self, CMat};
use crate::majorana::{build_h_zz, Boundary, MajoranaMatrix, ModelParams};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CubicSign {
    /// `+2 C H C`
    Plus,
    /// `-2 C H C`
    Minus,
}

impl CubicSign {
    pub fn value(self) -> f64 {
        match self {
            CubicSign::Plus => 1.0,
            CubicSign::Minus => -1.0,
        }
    }
}

/// The sign that reproduces the state-vector engine (see [`resolve_cubic_sign`]).
pub const ORACLE_SIGN: CubicSign = CubicSign::Minus;

#[derive(Copy, Clone, Debug, Serialize)]
pub struct OdeOptions {
    pub sign: CubicSign,
    /// Local error tolerance per step (max-abs entry norm).
    pub tol: f64,
    pub initial_step: f64,
    pub min_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { sign: ORACLE_SIGN, tol: 1e-12, initial_step: 0.05, min_step: 1e-12 }
    }
}

/// Nambu generator `H = W† G* W / 2` of the map `α ↦ (e^{G}_c⁻¹)† α`, where
/// `e^{G}` is the single-particle matrix of the factor `e^{x Q}` at `x = 1`.
pub fn nambu_generator(g: &MajoranaMatrix) -> CMat {
    let l = g.dim() / 2;
    let w = w_matrix(l);
    linalg::adjoint(&w).dot(&linalg::conj(&g.entries)).dot(&w).mapv(|z| z / 2.0)
}

fn rhs(h: &CMat, c: &CMat, sign: f64) -> CMat {
    let hc = h.dot(c);
    let ch = c.dot(h);
    let chc = ch.dot(c);
    &hc + &ch + chc.mapv(|z| z * (2.0 * sign))
}

fn rk4(h: &CMat, c: &CMat, dx: f64, sign: f64) -> CMat {
    let k1 = rhs(h, c, sign);
    let k2 = rhs(h, &(c + &k1.mapv(|z| z * (dx / 2.0))), sign);
    let k3 = rhs(h, &(c + &k2.mapv(|z| z * (dx / 2.0))), sign);
    let k4 = rhs(h, &(c + &k3.mapv(|z| z * dx)), sign);
    c + &(k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * (dx / 6.0))
}

/// Integrates `C` over `x ∈ [0, duration]` with step-doubling RK4.
pub fn integrate(c0: &CMat, h: &CMat, duration: f64, opts: &OdeOptions) -> Result<CMat> {
    let sign = opts.sign.value();
    let mut c = c0.clone();
    let mut x = 0.0;
    let mut dx = opts.initial_step.min(duration);
    while x < duration {
        dx = dx.min(duration - x);
        if dx < opts.min_step {
            return Err(Error::StepSizeUnderflow { x });
        }
        let full = rk4(h, &c, dx, sign);
        let half = rk4(h, &rk4(h, &c, dx / 2.0, sign), dx / 2.0, sign);
        let err = linalg::max_abs(&(&full - &half)) / 15.0;
        if !err.is_finite() {
            return Err(Error::StepSizeUnderflow { x });
        }
        if err <= opts.tol {
            x += dx;
            c = &half + &(&half - &full).mapv(|z| z / 15.0);
            dx *= if err == 0.0 { 2.0 } else { (0.9 * (opts.tol / err).powf(0.2)).min(2.0) };
        } else {
            dx *= (0.9 * (opts.tol / err).powf(0.2)).max(0.1);
        }
    }
    Ok(c)
}

/// Rebuilds an isometry from the eigenvectors of `C` with eigenvalue above ½.
fn state_from_projector(c: &CMat, step: u64) -> Result<CorrelationState> {
    let n = c.nrows();
    let herm = (c + &linalg::adjoint(c)).mapv(|z| z / 2.0);
    let (_, vecs) = linalg::eigh(&herm)?;
    let u = vecs.slice(ndarray::s![.., n / 2..]).to_owned();
    let mut state = CorrelationState::from_annihilators(&u, step)?;
    state.c = c.clone();
    Ok(state)
}

/// Evolves `state` under the imaginary factor with Majorana matrix `g`
/// for `duration` (in units where `x = 1` is the full factor).
pub fn evolve_ode(state: &CorrelationState, g: &MajoranaMatrix, duration: f64, opts: &OdeOptions) -> Result<CorrelationState> {
    if duration == 0.0 {
        return Ok(state.clone());
    }
    let c = integrate(&state.c, &nambu_generator(g), duration, opts)?;
    state_from_projector(&c, state.step)
}

/// Majorana matrix `β ℋ_ZZ` of the imaginary factor of the drive.
pub fn imaginary_generator(params: &ModelParams) -> MajoranaMatrix {
    let mut g = build_h_zz(params);
    g.entries.mapv_inplace(|z| z * params.beta);
    g
}

/// One period: the unitary part exactly, then the imaginary factor by the ODE.
pub fn ode_period(state: &CorrelationState, params: &ModelParams, opts: &OdeOptions) -> Result<CorrelationState> {
    let factors = FloquetFactors::new(params, state.step)?;
    let w = w_matrix(params.l);
    let k = linalg::adjoint(&w).dot(&linalg::conj(&factors.unitary())).dot(&w).mapv(|z| z / 2.0);
    let rotated = CorrelationState::from_annihilators(&k.dot(&state.u), state.step)?;
    let mut out = evolve_ode(&rotated, &imaginary_generator(params), 1.0, opts)?;
    out.step = state.step + 1;
    Ok(out)
}

/// Outcome of comparing both cubic signs against the state-vector engine.
#[derive(Clone, Debug, Serialize)]
pub struct SignReport {
    pub l: usize,
    pub steps: u64,
    /// Largest `|C^m|` entry error of the ODE with `+2CHC`.
    pub plus_error: f64,
    /// Same with `-2CHC`.
    pub minus_error: f64,
    pub chosen: CubicSign,
    pub agrees_with_builtin: bool,
}

/// Runs `steps` periods with each sign on an `L = 4` chain and keeps the
/// sign that tracks the dense engine.
pub fn resolve_cubic_sign(steps: u64) -> Result<SignReport> {
    let params = ModelParams::uniform(4, 0.6, 0.3, 0.0, 0.7, Boundary::Open);
    let occ = [true, false, false, true];
    let mut errors = [0.0_f64; 2];
    for (slot, sign) in [CubicSign::Plus, CubicSign::Minus].into_iter().enumerate() {
        let opts = OdeOptions { sign, ..Default::default() };
        let mut g = gaussian::initial_fock_state(&occ)?;
        let mut d = DenseState::from_fock(&occ)?;
        for t in 0..steps {
            g = match ode_period(&g, &params, &opts) {
                Ok(s) => s,
                Err(_) => {
                    errors[slot] = f64::INFINITY;
                    break;
                }
            };
            d = exact::apply_floquet(&d, &params, t)?;
            let cm_d = exact::majorana_correlation(&d)?;
            let w = w_matrix(4);
            let cm_g = w.dot(&g.c).dot(&linalg::adjoint(&w));
            errors[slot] = errors[slot].max(linalg::max_abs(&(&cm_g - &cm_d)));
        }
    }
    let chosen = if errors[1] <= errors[0] { CubicSign::Minus } else { CubicSign::Plus };
    Ok(SignReport { l: 4, steps, plus_error: errors[0], minus_error: errors[1], chosen, agrees_with_builtin: chosen == ORACLE_SIGN })
}

/// The imaginary factor applied through its single-particle matrix instead.
pub fn imaginary_step(state: &CorrelationState, params: &ModelParams) -> Result<CorrelationState> {
    let f = exp_factor(&build_h_zz(params), C64::from(params.beta), &vec![1.0; params.n_bonds()])?;
    let w = w_matrix(params.l);
    let k = linalg::adjoint(&w).dot(&linalg::conj(&f.to_dense())).dot(&w).mapv(|z| z / 2.0);
    CorrelationState::from_annihilators(&k.dot(&state.u), state.step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{build_floquet_matrix, diagonalize_hamiltonian, floquet_hamiltonian, quasi_energies, SpectrumOptions};
    use crate::gaussian::{steady_state, ModeSelection};

    #[test]
    fn zero_duration_is_identity() {
        let s = gaussian::initial_fock_state(&[true, false, true]).unwrap();
        let p = ModelParams::uniform(3, 0.8, 0.0, 0.0, 0.0, Boundary::Open);
        let out = evolve_ode(&s, &imaginary_generator(&p), 0.0, &OdeOptions::default()).unwrap();
        assert_eq!(out.c, s.c);
    }

    #[test]
    fn matches_exact_factor() {
        let p = ModelParams::uniform(4, 0.9, 0.0, 0.0, 0.0, Boundary::Open);
        let mut s = gaussian::initial_fock_state(&[true, false, false, true]).unwrap();
        // rotate away from a fixed point first
        let v = build_floquet_matrix(&ModelParams::uniform(4, 0.0, 0.4, 0.2, 0.6, Boundary::Open), 0).unwrap();
        s = gaussian::step(&s, &v).unwrap();
        let a = evolve_ode(&s, &imaginary_generator(&p), 1.0, &OdeOptions::default()).unwrap();
        let b = imaginary_step(&s, &p).unwrap();
        assert!(linalg::max_abs(&(&a.c - &b.c)) < 1e-6);
    }

    #[test]
    fn oracle_picks_builtin_sign() {
        let r = resolve_cubic_sign(5).unwrap();
        assert!(r.agrees_with_builtin, "{r:?}");
        assert!(r.minus_error < 1e-6, "{r:?}");
        assert!(r.plus_error > 1e-3, "{r:?}");
    }

    #[test]
    fn steady_state_is_stationary() {
        let p = ModelParams::uniform(6, 0.7, 0.0, 0.0, 0.9, Boundary::Open);
        let v = build_floquet_matrix(&p, 0).unwrap();
        let spec = quasi_energies(&v, &SpectrumOptions::default()).unwrap();
        let h = diagonalize_hamiltonian(&floquet_hamiltonian(&spec).unwrap()).unwrap();
        let ss = steady_state(&h, ModeSelection::Auto).unwrap();
        let next = ode_period(&ss, &p, &OdeOptions::default()).unwrap();
        assert!(linalg::max_abs(&(&next.c - &ss.c)) < 1e-8);
    }
}
