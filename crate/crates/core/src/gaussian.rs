//! Pure fermionic Gaussian states and their evolution under `V`.
//!
//! A state is stored through an orthonormal basis of its annihilators
//! `d_j = α_jᵀ* v`, where `v = (c_1 … c_L, c_1† … c_L†)`. The `2L × L`
//! matrix of the `α_j` is the isometry `U`, and `C = U U†` is the matrix of
//! `⟨v v†⟩`. Majorana correlations follow from `γ = W v` as `W C W†`.

use ndarray as nd;
use ndarray_linalg::{EigValsh, UPLO};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::floquet::{self, FloquetMatrix, HamiltonianSpectrum, SpectrumOptions};
use crate::linalg::{self, CMat};
use crate::majorana::{a_index, b_index, ModelParams};
use crate::pfaffian::pfaffian;

/// Columns whose norm after projection falls below this fraction of the
/// largest are treated as linearly dependent.
pub const RANK_TOL: f64 = 1e-13;

/// Change of basis `γ = W v`; `W W† = 2`.
pub fn w_matrix(l: usize) -> CMat {
    let mut w = CMat::zeros((2 * l, 2 * l));
    for j in 0..l {
        w[[b_index(j), j]] = C64::i();
        w[[b_index(j), l + j]] = -C64::i();
        w[[a_index(j), j]] = C64::from(1.0);
        w[[a_index(j), l + j]] = C64::from(1.0);
    }
    w
}

/// Annihilator vector `α` of the Majorana-linear operator `fᵀγ`.
pub fn majorana_to_nambu(f: &CMat) -> CMat {
    let l = f.nrows() / 2;
    linalg::adjoint(&w_matrix(l)).dot(&linalg::conj(f))
}

/// Inverse of [`majorana_to_nambu`].
pub fn nambu_to_majorana(alpha: &CMat) -> CMat {
    let l = alpha.nrows() / 2;
    linalg::conj(&w_matrix(l).dot(alpha)).mapv(|z| z / 2.0)
}

#[derive(Clone, Debug)]
pub struct CorrelationState {
    /// `2L × L` isometry of annihilator coefficients.
    pub u: CMat,
    /// `U U†`.
    pub c: CMat,
    pub step: u64,
}

impl CorrelationState {
    /// Orthonormalizes the columns of `alpha` and wraps them as a state.
    pub fn from_annihilators(alpha: &CMat, step: u64) -> Result<Self> {
        let l = alpha.ncols();
        if alpha.nrows() != 2 * l {
            return Err(Error::InvalidParams(format!("annihilator matrix must be 2L x L, got {:?}", alpha.dim())));
        }
        linalg::check_finite(alpha, "annihilators")?;
        let (u, ratio) = linalg::orthonormalize(alpha)?;
        if ratio < RANK_TOL {
            return Err(Error::RankCollapse { ratio });
        }
        let c = u.dot(&linalg::adjoint(&u));
        Ok(Self { u, c, step })
    }

    pub fn l(&self) -> usize {
        self.u.ncols()
    }

    /// `⟨γ_μ γ_ν⟩` in canonical Majorana order.
    pub fn majorana_correlation(&self) -> CMat {
        let w = w_matrix(self.l());
        w.dot(&self.c).dot(&linalg::adjoint(&w))
    }

    pub fn invariants(&self) -> InvariantReport {
        let l = self.l();
        let id_l = linalg::identity(l);
        let id = linalg::identity(2 * l);
        let swapped = {
            let perm: Vec<usize> = (0..2 * l).map(|i| (i + l) % (2 * l)).collect();
            self.c.t().select(nd::Axis(0), &perm).select(nd::Axis(1), &perm)
        };
        InvariantReport {
            isometry: linalg::max_abs(&(linalg::adjoint(&self.u).dot(&self.u) - id_l)),
            hermiticity: linalg::max_abs(&(&self.c - &linalg::adjoint(&self.c))),
            idempotency: linalg::max_abs(&(self.c.dot(&self.c) - &self.c)),
            trace: (self.c.diag().sum() - l as f64).norm(),
            particle_hole: linalg::max_abs(&(swapped - (id - &self.c))),
        }
    }
}

/// Deviations of the defining identities of a pure Gaussian state.
#[derive(Copy, Clone, Debug, Serialize)]
pub struct InvariantReport {
    /// `max |U†U - 1|`
    pub isometry: f64,
    /// `max |C - C†|`
    pub hermiticity: f64,
    /// `max |C² - C|`
    pub idempotency: f64,
    /// `|tr C - L|`
    pub trace: f64,
    /// `max |S Cᵀ S - (1 - C)|`
    pub particle_hole: f64,
}

impl InvariantReport {
    pub fn max(&self) -> f64 {
        [self.isometry, self.hermiticity, self.idempotency, self.trace, self.particle_hole]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Fock state in the Y basis; `true` marks an occupied site (`⟨Y⟩ = +1`).
pub fn initial_fock_state(occupations: &[bool]) -> Result<CorrelationState> {
    let l = occupations.len();
    let mut alpha = CMat::zeros((2 * l, l));
    for (j, &occ) in occupations.iter().enumerate() {
        alpha[[if occ { l + j } else { j }, j]] = C64::from(1.0);
    }
    CorrelationState::from_annihilators(&alpha, 0)
}

/// `∏_j (2n_j - 1)`.
pub fn fock_parity(occupations: &[bool]) -> i8 {
    occupations.iter().fold(1, |p, &o| if o { p } else { -p })
}

/// The map `α ↦ (𝒱_c⁻¹)† α` with `𝒱_c = W†𝒱W/2`, equal to `W† 𝒱* W / 2`
/// because `𝒱` is complex orthogonal.
pub fn nambu_propagator(v: &FloquetMatrix) -> CMat {
    let w = w_matrix(v.l());
    linalg::adjoint(&w).dot(&linalg::conj(&v.entries)).dot(&w).mapv(|z| z / 2.0)
}

/// One normalized period.
pub fn step(state: &CorrelationState, v: &FloquetMatrix) -> Result<CorrelationState> {
    step_with(state, &nambu_propagator(v))
}

/// One period with a precomputed [`nambu_propagator`].
pub fn step_with(state: &CorrelationState, propagator: &CMat) -> Result<CorrelationState> {
    let next = CorrelationState::from_annihilators(&propagator.dot(&state.u), state.step + 1)?;
    CorrelationState::from_annihilators(&restore_particle_hole(&next.u), next.step)
}

/// First-order projection of an isometry back onto Bogoliubov form.
///
/// The annihilators anticommute exactly when `A = Uᵀ S U` vanishes, `S`
/// swapping the particle and hole halves. `U - ½ S U* A` removes the
/// violation to first order; without it round-off in the non-unitary
/// steps builds up in `S Cᵀ S = 1 - C`.
pub fn restore_particle_hole(u: &CMat) -> CMat {
    let n = u.nrows();
    let l = n / 2;
    let perm: Vec<usize> = (0..n).map(|i| (i + l) % n).collect();
    let su = u.select(nd::Axis(0), &perm);
    let a = u.t().dot(&su);
    let su_conj = linalg::conj(&su);
    u - &su_conj.dot(&a).mapv(|z| z / 2.0)
}

/// Evolves under `params`, rebuilding the Floquet matrix only when the
/// fields change from step to step.
pub struct GaussianEngine {
    params: ModelParams,
    fixed: Option<CMat>,
}

impl GaussianEngine {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let fixed = match params.disorder.kind {
            crate::majorana::DisorderKind::Stochastic => None,
            _ => Some(nambu_propagator(&floquet::build_floquet_matrix(params, 0)?)),
        };
        Ok(Self { params: params.clone(), fixed })
    }

    pub fn step(&self, state: &CorrelationState) -> Result<CorrelationState> {
        match &self.fixed {
            Some(p) => step_with(state, p),
            None => {
                let v = floquet::build_floquet_matrix(&self.params, state.step)?;
                step_with(state, &nambu_propagator(&v))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Observables {
    pub y: Vec<f64>,
    /// `⟨Z_j Z_{j+1}⟩` on the open-chain bonds.
    pub zz: Vec<f64>,
    pub parity: f64,
}

impl Observables {
    pub fn mean_y(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }

    pub fn mean_zz(&self) -> f64 {
        if self.zz.is_empty() { 0.0 } else { self.zz.iter().sum::<f64>() / self.zz.len() as f64 }
    }
}

pub fn observables(state: &CorrelationState) -> Result<Observables> {
    let l = state.l();
    let cm = state.majorana_correlation();
    let i = C64::i();
    let y = (0..l).map(|j| (i * cm[[b_index(j), a_index(j)]]).re).collect();
    let zz = (0..l - 1).map(|j| (-i * cm[[b_index(j), a_index(j + 1)]]).re).collect();
    Ok(Observables { y, zz, parity: parity_of(&cm)?.re })
}

/// `⟨∏ Y_j⟩ = i^L Pf(C^m - 1)`.
pub fn parity_of(cm: &CMat) -> Result<C64> {
    let l = cm.nrows() / 2;
    let a = connected(cm);
    Ok(C64::i().powu(l as u32) * pfaffian(&a)?)
}

fn connected(cm: &CMat) -> CMat {
    let mut a = cm - &linalg::identity(cm.nrows());
    // remove rounding asymmetry before the Pfaffian's antisymmetry check
    let t = a.t().to_owned();
    a = (&a - &t).mapv(|z| z / 2.0);
    a
}

/// `⟨Z_j Z_k⟩` for `j < k` (0-based sites) through the Jordan-Wigner string
/// `Z_j Z_k = -i^{k-j} b_j (b_{j+1} a_{j+1}) … (b_{k-1} a_{k-1}) a_k`.
pub fn string_correlator(state: &CorrelationState, j: usize, k: usize) -> Result<C64> {
    string_correlator_from(&state.majorana_correlation(), j, k)
}

pub fn string_correlator_from(cm: &CMat, j: usize, k: usize) -> Result<C64> {
    if j >= k || 2 * k >= cm.nrows() {
        return Err(Error::InvalidParams(format!("need j < k < L, got j = {j}, k = {k}")));
    }
    let mut idx = vec![b_index(j)];
    for s in j + 1..k {
        idx.push(b_index(s));
        idx.push(a_index(s));
    }
    idx.push(a_index(k));
    let a = connected(cm).select(nd::Axis(0), &idx).select(nd::Axis(1), &idx);
    Ok(-C64::i().powu((k - j) as u32) * pfaffian(&a)?)
}

/// `|⟨ψ₁|ψ₂⟩| = |det(U₁†U₂)|^{1/2}`.
///
/// States of opposite definite parity return exactly 0; the determinant alone
/// would leave a round-off floor of order `√ε` there.
pub fn overlap_magnitude(s1: &CorrelationState, s2: &CorrelationState) -> Result<f64> {
    let p1 = parity_of(&s1.majorana_correlation())?.re;
    let p2 = parity_of(&s2.majorana_correlation())?.re;
    if p1.abs() > 0.5 && p2.abs() > 0.5 && p1 * p2 < 0.0 {
        return Ok(0.0);
    }
    let m = linalg::adjoint(&s1.u).dot(&s2.u);
    Ok(linalg::det(&m)?.norm().sqrt().min(1.0))
}

pub const ENTROPY_CLIP: f64 = 1e-12;

/// Von Neumann entropy (nats) of sites `0 … cut-1`.
pub fn entanglement_entropy(state: &CorrelationState, cut: usize) -> Result<f64> {
    let l = state.l();
    if cut == 0 || cut >= l {
        return Err(Error::InvalidParams(format!("cut must be in 1..L, got {cut} for L = {l}")));
    }
    let idx: Vec<usize> = (0..cut).chain(l..l + cut).collect();
    let block = state.c.select(nd::Axis(0), &idx).select(nd::Axis(1), &idx);
    let block = (&block + &linalg::adjoint(&block)).mapv(|z| z / 2.0);
    let nu = block.eigvalsh(UPLO::Upper)?;
    Ok(-0.5
        * nu.iter()
            .map(|&v| {
                let v = v.clamp(ENTROPY_CLIP, 1.0 - ENTROPY_CLIP);
                v * v.ln() + (1.0 - v) * (1.0 - v).ln()
            })
            .sum::<f64>())
}

pub fn distance(s1: &CorrelationState, s2: &CorrelationState) -> f64 {
    linalg::frobenius(&(&s1.c - &s2.c))
}

/// How the occupation of a mode with vanishing `Im λ` is chosen.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ModeSelection {
    /// Fill by the sign of `Im λ`; fails if a mode is within tolerance of zero.
    Auto,
    /// Fill the other modes by sign and choose the mode closest to the real
    /// axis so that `⟨∏Y⟩` has this sign.
    Parity(i8),
}

pub const DEGENERACY_TOL: f64 = 1e-10;

/// Steady state of `e^{-iH_F}`: the annihilators span the eigenvectors whose
/// eigenvalues have positive imaginary part.
pub fn steady_state(spec: &HamiltonianSpectrum, selection: ModeSelection) -> Result<CorrelationState> {
    let n = spec.vectors.nrows();
    let l = n / 2;
    let mid = (0..l).min_by(|&a, &b| spec.lambdas[a].im.abs().total_cmp(&spec.lambdas[b].im.abs())).unwrap();
    let mut f = CMat::zeros((n, l));
    for j in 0..l {
        let col = if spec.lambdas[j].im > 0.0 { 2 * j } else { 2 * j + 1 };
        f.column_mut(j).assign(&spec.vectors.column(col));
    }
    match selection {
        ModeSelection::Auto => {
            let im = spec.lambdas[mid].im.abs();
            if im < DEGENERACY_TOL {
                return Err(Error::DegenerateImaginaryPart { im });
            }
            state_from_majorana(&f)
        }
        ModeSelection::Parity(p) => {
            let first = state_from_majorana(&f)?;
            let parity = observables(&first)?.parity;
            if parity.signum() as i8 == p.signum() {
                return Ok(first);
            }
            let current = if spec.lambdas[mid].im > 0.0 { 2 * mid } else { 2 * mid + 1 };
            f.column_mut(mid).assign(&spec.vectors.column(current ^ 1));
            state_from_majorana(&f)
        }
    }
}

/// Both steady states of a Floquet matrix, ordered even then odd parity.
pub fn steady_states(v: &FloquetMatrix) -> Result<[CorrelationState; 2]> {
    let spec = floquet::quasi_energies(v, &SpectrumOptions::default())?;
    let hf = floquet::floquet_hamiltonian(&spec)?;
    let diag = floquet::diagonalize_hamiltonian(&hf)?;
    Ok([steady_state(&diag, ModeSelection::Parity(1))?, steady_state(&diag, ModeSelection::Parity(-1))?])
}

fn state_from_majorana(f: &CMat) -> Result<CorrelationState> {
    CorrelationState::from_annihilators(&majorana_to_nambu(f), 0)
}

/// Outcome of [`run_until_converged`].
#[derive(Clone, Debug)]
pub struct Convergence {
    pub state: CorrelationState,
    pub steps: u64,
    pub converged: bool,
    pub last_change: f64,
}

/// Iterates until `‖C(t+2) - C(t)‖_F < tol` on `window` consecutive steps.
pub fn run_until_converged(
    engine: &GaussianEngine,
    mut state: CorrelationState,
    max_steps: u64,
    tol: f64,
    window: usize,
) -> Result<Convergence> {
    let mut history: std::collections::VecDeque<CMat> = std::collections::VecDeque::new();
    let mut streak = 0;
    let mut last_change = f64::INFINITY;
    for n in 0..max_steps {
        history.push_back(state.c.clone());
        if history.len() > 2 {
            history.pop_front();
        }
        state = engine.step(&state)?;
        if history.len() == 2 {
            last_change = linalg::frobenius(&(&state.c - &history[0]));
            streak = if last_change < tol { streak + 1 } else { 0 };
            if streak >= window {
                return Ok(Convergence { state, steps: n + 1, converged: true, last_change });
            }
        }
    }
    Ok(Convergence { state, steps: max_steps, converged: false, last_change })
}
