//! Dense state-vector engine for the spin chain itself.
//!
//! Basis index bit `L-1-j` holds site `j` (site 0 is the most significant
//! bit); bit value 0 is spin up (`Z = +1`). Everything here acts on spins,
//! so YY interactions and any field pattern are allowed; Majorana quantities
//! are obtained through explicit Jordan-Wigner strings.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::majorana::{Boundary, ModelParams};

pub const MAX_SITES: usize = 14;
pub const MAX_SPECTRAL_SITES: usize = 8;

/// Where the YY gate sits inside the unitary part of the drive.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum YyPlacement {
    /// Applied right after the XX gates (`… e^{-iJ_yy YY} e^{-iJ_xx XX} e^{-ihY}`).
    #[default]
    AfterXx,
    /// Applied right before the XX gates.
    BeforeXx,
}

#[derive(Clone, Debug)]
pub struct DenseState {
    pub amps: CVec,
    pub l: usize,
    pub step: u64,
}

fn guard(l: usize, max: usize) -> Result<()> {
    if l > max {
        Err(Error::SizeExceeded { l, max })
    } else {
        Ok(())
    }
}

#[inline]
fn mask(l: usize, site: usize) -> usize {
    1 << (l - 1 - site)
}

impl DenseState {
    /// Product state from one 2-vector `(up, down)` per site.
    pub fn product(sites: &[[C64; 2]]) -> Result<Self> {
        let l = sites.len();
        guard(l, MAX_SITES)?;
        let dim = 1usize << l;
        let amps = CVec::from_shape_fn(dim, |x| {
            sites.iter().enumerate().fold(C64::from(1.0), |acc, (j, s)| acc * s[(x >> (l - 1 - j)) & 1])
        });
        let mut s = Self { amps, l, step: 0 };
        s.normalize();
        Ok(s)
    }

    /// `Z`-basis product state; `true` means spin down.
    pub fn from_z_bits(down: &[bool]) -> Result<Self> {
        let l = down.len();
        guard(l, MAX_SITES)?;
        let mut amps = CVec::zeros(1 << l);
        let idx = down.iter().enumerate().fold(0, |acc, (j, &d)| if d { acc | mask(l, j) } else { acc });
        amps[idx] = C64::from(1.0);
        Ok(Self { amps, l, step: 0 })
    }

    /// Fock state in the `Y` basis; occupied sites have `⟨Y⟩ = +1`.
    pub fn from_fock(occupations: &[bool]) -> Result<Self> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sites: Vec<[C64; 2]> = occupations
            .iter()
            .map(|&o| [C64::from(s), C64::new(0.0, if o { s } else { -s })])
            .collect();
        Self::product(&sites)
    }

    pub fn norm(&self) -> f64 {
        linalg::vec_norm(self.amps.view())
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        self.amps.mapv_inplace(|z| z / n);
    }

    pub fn inner(&self, other: &DenseState) -> C64 {
        self.amps.iter().zip(other.amps.iter()).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Fair-coin `Z` bit string drawn from `seed`.
pub fn random_z_bits(l: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..l).map(|_| rng.random::<bool>()).collect()
}

/// `c² + s² - 1` to roughly twice working precision.
fn unit_residual(c: f64, s: f64) -> f64 {
    let (p, q) = (c * c, s * s);
    let (pe, qe) = (c.mul_add(c, -p), s.mul_add(s, -q));
    let sum = p + q;
    let bb = sum - p;
    let err = (p - (sum - bb)) + (q - bb);
    (sum - 1.0) + err + pe + qe
}

const UNIT_SEARCH_ULPS: i32 = 8;

fn ulp_shift(x: f64, k: i32) -> f64 {
    let mut y = x;
    for _ in 0..k.unsigned_abs() {
        y = if k > 0 { y.next_up() } else { y.next_down() };
    }
    y
}

/// `(cos x, sin x)` nudged by a few ulps each so that `c² + s²` is as close
/// to one as representable. Gates repeat every period, so any residual here
/// would accumulate linearly in the norm.
pub fn unit_cos_sin(x: f64) -> (f64, f64) {
    let (s0, c0) = x.sin_cos();
    let mut best = (c0, s0, unit_residual(c0, s0).abs());
    for i in -UNIT_SEARCH_ULPS..=UNIT_SEARCH_ULPS {
        let c = ulp_shift(c0, i);
        for j in -UNIT_SEARCH_ULPS..=UNIT_SEARCH_ULPS {
            let s = ulp_shift(s0, j);
            let r = unit_residual(c, s).abs();
            if r < best.2 {
                best = (c, s, r);
            }
        }
    }
    (best.0, best.1)
}

/// `a·c + b·s` with one rounding per component.
#[inline]
fn rot(a: C64, b: C64, c: f64, s: f64) -> C64 {
    C64::new(a.re.mul_add(c, b.re * s), a.im.mul_add(c, b.im * s))
}

fn apply_site_rotation(psi: &mut CVec, l: usize, site: usize, h: f64) {
    let m = mask(l, site);
    let (c, s) = unit_cos_sin(h);
    for x in 0..psi.len() {
        if x & m == 0 {
            let (up, dn) = (psi[x], psi[x | m]);
            psi[x] = rot(up, dn, c, -s);
            psi[x | m] = rot(dn, up, c, s);
        }
    }
}

fn bonds(params: &ModelParams) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
    (0..params.n_bonds()).map(move |k| {
        let (s, t) = params.bond_sites(k);
        (k, s, t)
    })
}

fn wrap_weight(params: &ModelParams, k: usize) -> f64 {
    if k + 1 == params.l { params.bc.wrap_sign() } else { 1.0 }
}

/// `cos J - i sin J · P_s P_t` for `P = X` (`yy = false`) or `P = Y`.
fn apply_pair_flip(psi: &mut CVec, l: usize, s: usize, t: usize, j: f64, yy: bool) {
    let m = mask(l, s) | mask(l, t);
    let (c, sn) = unit_cos_sin(j);
    let ms = mask(l, s);
    let mt = mask(l, t);
    let phase = |x: usize| -> C64 {
        if !yy {
            return C64::from(1.0);
        }
        // Y|0> = i|1>, Y|1> = -i|0>, evaluated on the source bits
        let p = |bit: bool| if bit { -C64::i() } else { C64::i() };
        p(x & ms != 0) * p(x & mt != 0)
    };
    let old = psi.clone();
    for y in 0..psi.len() {
        let x = y ^ m;
        psi[y] = old[y] * c - C64::i() * sn * phase(x) * old[x];
    }
}

fn zz_sum(x: usize, params: &ModelParams, weights: &[f64]) -> f64 {
    let l = params.l;
    bonds(params)
        .map(|(k, s, t)| {
            let zs = if x & mask(l, s) == 0 { 1.0 } else { -1.0 };
            let zt = if x & mask(l, t) == 0 { 1.0 } else { -1.0 };
            weights[k] * wrap_weight(params, k) * zs * zt
        })
        .sum()
}

/// One period of `V` without normalization.
pub fn apply_floquet_raw(psi: &mut CVec, params: &ModelParams, step: u64, yy: YyPlacement) {
    let l = params.l;
    let fields = params.y_fields(step);
    for (j, &h) in fields.iter().enumerate() {
        apply_site_rotation(psi, l, j, h);
    }
    let xx = |psi: &mut CVec| {
        for (k, s, t) in bonds(params) {
            apply_pair_flip(psi, l, s, t, params.j_xx[k] * wrap_weight(params, k), false);
        }
    };
    let yy_gates = |psi: &mut CVec| {
        for (k, s, t) in bonds(params) {
            if params.j_yy[k] != 0.0 {
                apply_pair_flip(psi, l, s, t, params.j_yy[k] * wrap_weight(params, k), true);
            }
        }
    };
    match yy {
        YyPlacement::AfterXx => {
            xx(psi);
            yy_gates(psi);
        }
        YyPlacement::BeforeXx => {
            yy_gates(psi);
            xx(psi);
        }
    }
    let ones = vec![1.0; params.n_bonds()];
    let mut phases: std::collections::HashMap<u64, C64> = std::collections::HashMap::new();
    for x in 0..psi.len() {
        let phase = zz_sum(x, params, &params.j_zz);
        let weight = params.beta * zz_sum(x, params, &ones);
        let u = *phases.entry(phase.to_bits()).or_insert_with(|| {
            let (c, s) = unit_cos_sin(-phase);
            C64::new(c, s)
        });
        psi[x] *= u * weight.exp();
    }
}

/// One normalized period.
pub fn apply_floquet(state: &DenseState, params: &ModelParams, step: u64) -> Result<DenseState> {
    apply_floquet_with(state, params, step, YyPlacement::default())
}

pub fn apply_floquet_with(state: &DenseState, params: &ModelParams, step: u64, yy: YyPlacement) -> Result<DenseState> {
    guard(params.l, MAX_SITES)?;
    params.validate()?;
    if state.l != params.l {
        return Err(Error::InvalidParams(format!("state has {} sites, params {}", state.l, params.l)));
    }
    let mut amps = state.amps.clone();
    apply_floquet_raw(&mut amps, params, step, yy);
    let mut out = DenseState { amps, l: state.l, step: state.step + 1 };
    let n = out.norm();
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::Linalg(format!("state norm {n} after step {}", state.step)));
    }
    out.normalize();
    Ok(out)
}

/// `γ_μ |ψ⟩` for the Majorana at canonical index `mu`.
pub fn apply_majorana(psi: &CVec, l: usize, mu: usize) -> CVec {
    let site = mu / 2;
    let is_b = mu.is_multiple_of(2);
    let m = mask(l, site);
    let mut out = CVec::zeros(psi.len());
    for x in 0..psi.len() {
        // string of Y on sites before `site`, then X (b) or Z (a) on `site`
        let (y, mut amp) = if is_b { (x ^ m, psi[x]) } else { (x, psi[x] * if x & m == 0 { 1.0 } else { -1.0 }) };
        for s in 0..site {
            amp *= if x & mask(l, s) == 0 { C64::i() } else { -C64::i() };
        }
        let mut target = y;
        for s in 0..site {
            target ^= mask(l, s);
        }
        out[target] += amp;
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct Measurement {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    /// `⟨Z_j Z_k⟩` for all site pairs.
    pub zz: Vec<Vec<f64>>,
    pub parity: f64,
}

impl Measurement {
    pub fn mean_z(&self) -> f64 {
        self.z.iter().sum::<f64>() / self.z.len() as f64
    }

    pub fn mean_y(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }
}

pub fn measure(state: &DenseState) -> Result<Measurement> {
    guard(state.l, MAX_SITES)?;
    let l = state.l;
    let probs: Vec<f64> = state.amps.iter().map(|a| a.norm_sqr()).collect();
    let zsign = |x: usize, j: usize| if x & mask(l, j) == 0 { 1.0 } else { -1.0 };
    let z = (0..l).map(|j| probs.iter().enumerate().map(|(x, p)| p * zsign(x, j)).sum()).collect();
    let zz = (0..l)
        .map(|j| (0..l).map(|k| probs.iter().enumerate().map(|(x, p)| p * zsign(x, j) * zsign(x, k)).sum()).collect())
        .collect();
    let y = (0..l)
        .map(|j| {
            let mut psi = state.amps.clone();
            apply_y(&mut psi, l, j);
            state.amps.iter().zip(psi.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().re
        })
        .collect();
    let mut psi = state.amps.clone();
    for j in 0..l {
        apply_y(&mut psi, l, j);
    }
    let parity = state.amps.iter().zip(psi.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().re;
    Ok(Measurement { z, y, zz, parity })
}

fn apply_y(psi: &mut CVec, l: usize, site: usize) {
    let m = mask(l, site);
    for x in 0..psi.len() {
        if x & m == 0 {
            let (up, dn) = (psi[x], psi[x | m]);
            psi[x] = -C64::i() * dn;
            psi[x | m] = C64::i() * up;
        }
    }
}

/// `⟨γ_μ γ_ν⟩` in canonical order.
pub fn majorana_correlation(state: &DenseState) -> Result<CMat> {
    guard(state.l, MAX_SITES)?;
    let n = 2 * state.l;
    let g: Vec<CVec> = (0..n).map(|mu| apply_majorana(&state.amps, state.l, mu)).collect();
    Ok(CMat::from_shape_fn((n, n), |(mu, nu)| g[mu].iter().zip(g[nu].iter()).map(|(a, b)| a.conj() * b).sum()))
}

/// Entropy (nats) of sites `0 … cut-1` from the Schmidt values.
pub fn entanglement_entropy(state: &DenseState, cut: usize) -> Result<f64> {
    guard(state.l, MAX_SITES)?;
    let l = state.l;
    if cut == 0 || cut >= l {
        return Err(Error::InvalidParams(format!("cut must be in 1..L, got {cut}")));
    }
    let m = state.amps.clone().into_shape_with_order((1 << cut, 1 << (l - cut))).map_err(|e| Error::Linalg(e.to_string()))?;
    let s = linalg::singular_values(&m)?;
    Ok(-s.iter().map(|v| v * v).filter(|&p| p > 1e-300).map(|p| p * p.ln()).sum::<f64>())
}

/// Dense matrix of `V` (columns are images of basis states).
pub fn dense_floquet(params: &ModelParams, step: u64, yy: YyPlacement) -> Result<CMat> {
    guard(params.l, MAX_SPECTRAL_SITES)?;
    params.validate()?;
    let dim = 1usize << params.l;
    let mut v = CMat::zeros((dim, dim));
    for x in 0..dim {
        let mut psi = CVec::zeros(dim);
        psi[x] = C64::from(1.0);
        apply_floquet_raw(&mut psi, params, step, yy);
        v.column_mut(x).assign(&psi);
    }
    Ok(v)
}

#[derive(Clone, Debug, Serialize)]
pub struct ManyBodySpectrum {
    /// Sorted by descending magnitude.
    pub eigenvalues: Vec<C64>,
    /// `⟨∏Y⟩` of each right eigenvector.
    pub parities: Vec<f64>,
}

pub fn spectral_decompose(params: &ModelParams) -> Result<ManyBodySpectrum> {
    let v = dense_floquet(params, 0, YyPlacement::default())?;
    let (vals, vecs) = linalg::eig(&v)?;
    let l = params.l;
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].norm().total_cmp(&vals[a].norm()));
    let parities = order
        .iter()
        .map(|&k| {
            let psi = vecs.column(k).to_owned();
            let mut py = psi.clone();
            for j in 0..l {
                apply_y(&mut py, l, j);
            }
            (psi.iter().zip(py.iter()).map(|(a, b)| a.conj() * b).sum::<C64>() / psi.iter().map(|a| a.norm_sqr()).sum::<f64>()).re
        })
        .collect();
    Ok(ManyBodySpectrum { eigenvalues: order.iter().map(|&k| vals[k]).collect(), parities })
}

/// All `2^L` products `∏_j e^{±iε_j}` of single-particle quasi-energies.
pub fn free_fermion_products(eps: &[C64]) -> Vec<C64> {
    let l = eps.len();
    (0..1usize << l)
        .map(|bits| (0..l).map(|j| if bits >> j & 1 == 1 { (C64::i() * eps[j]).exp() } else { (-C64::i() * eps[j]).exp() }).product())
        .collect()
}

/// Largest relative mismatch between two multisets after greedy matching,
/// minimized over a global sign.
pub fn multiset_mismatch(a: &[C64], b: &[C64]) -> f64 {
    let one = |sign: f64| {
        let mut used = vec![false; b.len()];
        let mut worst = 0.0_f64;
        for &x in a {
            let (k, d) = b
                .iter()
                .enumerate()
                .filter(|(k, _)| !used[*k])
                .map(|(k, &y)| (k, (sign * x - y).norm() / x.norm().max(1e-300)))
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .unwrap();
            used[k] = true;
            worst = worst.max(d);
        }
        worst
    };
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    one(1.0).min(one(-1.0))
}

/// The single-particle matrix `𝒱` read off from `V γ_ν V⁻¹ = Σ_μ (𝒱⁻¹)_{νμ} γ_μ`.
pub fn floquet_matrix_from_dense(params: &ModelParams) -> Result<CMat> {
    if params.bc != Boundary::Open {
        return Err(Error::InvalidParams("Majorana matrix extraction needs an open chain".into()));
    }
    let v = dense_floquet(params, 0, YyPlacement::default())?;
    let vinv = linalg::inv(&v)?;
    let l = params.l;
    let dim = 1usize << l;
    let gamma: Vec<CMat> = (0..2 * l)
        .map(|mu| {
            let mut g = CMat::zeros((dim, dim));
            for x in 0..dim {
                let mut e = CVec::zeros(dim);
                e[x] = C64::from(1.0);
                g.column_mut(x).assign(&apply_majorana(&e, l, mu));
            }
            g
        })
        .collect();
    let mut vinv_sp = CMat::zeros((2 * l, 2 * l));
    for nu in 0..2 * l {
        let conj = v.dot(&gamma[nu]).dot(&vinv);
        for mu in 0..2 * l {
            let t: C64 = (0..dim).map(|x| gamma[mu].row(x).dot(&conj.column(x))).sum();
            vinv_sp[[nu, mu]] = t / dim as f64;
        }
    }
    linalg::inv(&vinv_sp)
}

/// State vector annihilated by every `d_j = Σ_μ conj((W α_j)_μ)/2 · γ_μ`
/// for the columns `α_j` of a Gaussian isometry.
pub fn gaussian_state_vector(u: &CMat) -> Result<DenseState> {
    let l = u.ncols();
    guard(l, MAX_SPECTRAL_SITES)?;
    let dim = 1usize << l;
    let f = crate::gaussian::w_matrix(l).dot(u);
    let gamma: Vec<CMat> = (0..2 * l)
        .map(|mu| {
            let mut g = CMat::zeros((dim, dim));
            for x in 0..dim {
                let mut e = CVec::zeros(dim);
                e[x] = C64::from(1.0);
                g.column_mut(x).assign(&apply_majorana(&e, l, mu));
            }
            g
        })
        .collect();
    let mut stacked = CMat::zeros((l * dim, dim));
    for j in 0..l {
        let mut d = CMat::zeros((dim, dim));
        for mu in 0..2 * l {
            d.scaled_add(f[[mu, j]].conj() / 2.0, &gamma[mu]);
        }
        stacked.slice_mut(ndarray::s![j * dim..(j + 1) * dim, ..]).assign(&d);
    }
    // the common kernel is the eigenvector of D†D with the smallest eigenvalue
    let gram = linalg::adjoint(&stacked).dot(&stacked);
    let (w, v) = linalg::eigh(&gram)?;
    if w.len() > 1 && w[1] < 1e-8 {
        return Err(Error::Linalg("annihilators have a degenerate common kernel".into()));
    }
    let mut out = DenseState { amps: v.column(0).to_owned(), l, step: 0 };
    out.normalize();
    Ok(out)
}

/// Runs `steps` periods, recording a measurement after each.
pub fn trajectory(
    mut state: DenseState,
    params: &ModelParams,
    steps: u64,
    yy: YyPlacement,
) -> Result<(DenseState, Vec<Measurement>)> {
    let mut out = Vec::with_capacity(steps as usize + 1);
    out.push(measure(&state)?);
    for t in 0..steps {
        state = apply_floquet_with(&state, params, t, yy)?;
        out.push(measure(&state)?);
    }
    Ok((state, out))
}

/// Magnitude of the state overlap.
pub fn overlap_magnitude(a: &DenseState, b: &DenseState) -> f64 {
    a.inner(b).norm()
}
