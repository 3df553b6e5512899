//! Boundary i0 modes: transfer-matrix construction, the boundary matrix `M`,
//! and direct extraction from the Floquet matrix.
//!
//! Mode coefficients use the interleave `F = Σ v_{2j-1} a_j + v_{2j} b_j`,
//! i.e. `coeffs[2s]` multiplies `a_{s+1}` and `coeffs[2s + 1]` multiplies
//! `b_{s+1}`. [`EdgeMode::f0`] converts to the canonical `(b, a)` ordering.

use ndarray as nd;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{self, LineFit};
use crate::floquet::{FloquetFactors, FloquetMatrix, QuasiSpectrum};
use crate::linalg::{self, CMat, CVec};
use crate::majorana::{Boundary, ModelParams};

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[default]
    Left,
    Right,
}

/// Whether the mode anticommutes (`𝒱F₀ = -F₀`) or commutes (`𝒱F₀ = F₀`)
/// with the drive.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSign {
    #[default]
    Anticommuting,
    Commuting,
}

impl ModeSign {
    /// Eigenvalue of `𝒱` the mode is expected at.
    pub fn target(self) -> f64 {
        match self {
            ModeSign::Anticommuting => -1.0,
            ModeSign::Commuting => 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EdgeMode {
    /// `v_1 … v_{2L}`, unit norm, largest entry real positive.
    pub coeffs: CVec,
    pub side: Side,
    pub sign: ModeSign,
    /// `‖(𝒱 - target)F₀‖`.
    pub defect: f64,
}

impl EdgeMode {
    pub fn l(&self) -> usize {
        self.coeffs.len() / 2
    }

    /// Coefficients in canonical `(b_1, a_1, b_2, a_2, …)` order.
    pub fn f0(&self) -> CVec {
        site_order_to_canonical(&self.coeffs)
    }

    /// `‖(v_{2j}, v_{2j-1})‖` for each site `j`.
    pub fn pair_norms(&self) -> Vec<f64> {
        (0..self.l())
            .map(|s| (self.coeffs[2 * s].norm_sqr() + self.coeffs[2 * s + 1].norm_sqr()).sqrt())
            .collect()
    }

    /// `|⟨self|other⟩|` for unit vectors, insensitive to global phase.
    pub fn overlap(&self, other: &EdgeMode) -> f64 {
        self.coeffs.iter().zip(other.coeffs.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().norm()
    }
}

/// Swaps each `(a_j, b_j)` pair into canonical `(b_j, a_j)` order; an involution.
pub fn site_order_to_canonical(v: &CVec) -> CVec {
    let mut out = v.clone();
    for s in 0..v.len() / 2 {
        out[2 * s] = v[2 * s + 1];
        out[2 * s + 1] = v[2 * s];
    }
    out
}

pub fn canonical_to_site_order(f: &CVec) -> CVec {
    site_order_to_canonical(f)
}

/// Normalizes and rotates so that the largest-magnitude entry is real positive.
pub fn fix_phase(v: &mut CVec) {
    let norm = linalg::vec_norm(v.view());
    if norm == 0.0 {
        return;
    }
    let big = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
    let phase = big.conj() / big.norm();
    v.mapv_inplace(|z| z * phase / norm);
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferMatrix {
    pub entries: [[C64; 2]; 2],
    /// `(cos 2h, sin 2h, cosh 2β, i sinh 2β)`.
    pub alphas: [C64; 4],
}

impl TransferMatrix {
    pub fn det(&self) -> C64 {
        let t = &self.entries;
        t[0][0] * t[1][1] - t[0][1] * t[1][0]
    }

    /// Eigenvalues `(λ₁, λ₂)` with `λ₁ = i cot h coth β`.
    pub fn eigenvalues(&self) -> (C64, C64) {
        let t = &self.entries;
        let tr = t[0][0] + t[1][1];
        let disc = (tr * tr - 4.0 * self.det()).sqrt();
        let a = (tr + disc) / 2.0;
        let b = (tr - disc) / 2.0;
        if a.norm() >= b.norm() { (a, b) } else { (b, a) }
    }
}

/// Bulk recursion `(v_{2j+2}, v_{2j+1}) = T (v_{2j}, v_{2j-1})` for
/// `J_xx = J_zz = 0`.
pub fn transfer_matrix(beta: f64, h_y: f64) -> Result<TransferMatrix> {
    let a1 = C64::from((2.0 * h_y).cos());
    let a2 = C64::from((2.0 * h_y).sin());
    let a3 = C64::from((2.0 * beta).cosh());
    let a4 = C64::new(0.0, (2.0 * beta).sinh());
    if a2.norm() < 1e-14 {
        return Err(Error::SingularParameters(format!("sin(2h) = 0 at h = {h_y}")));
    }
    if a4.norm() < 1e-14 {
        return Err(Error::SingularParameters(format!("sinh(2β) = 0 at β = {beta}")));
    }
    let s = a1 + a3;
    let entries = [
        [-(s * s + a4 * a4) / (a4 * a2), -s / a4],
        [-s / a4, -a2 / a4],
    ];
    Ok(TransferMatrix { entries, alphas: [a1, a2, a3, a4] })
}

/// `λ₁ = i cot(h) coth(β)`, the decay factor of the left mode per site.
pub fn lambda_1(beta: f64, h_y: f64) -> C64 {
    C64::new(0.0, 1.0 / (h_y.tan() * beta.tanh()))
}

fn uniform_open(l: usize, beta: f64, h_y: f64) -> ModelParams {
    ModelParams::uniform(l, beta, 0.0, 0.0, h_y, Boundary::Open)
}

/// Applies `𝒱` to a canonical-order vector through its factors.
pub fn apply_floquet(factors: &FloquetFactors, f: &CVec) -> CVec {
    let mut m = f.clone().insert_axis(nd::Axis(1));
    for fac in [&factors.y, &factors.xx, &factors.zz_j, &factors.zz_beta] {
        fac.apply_left(&mut m);
    }
    m.remove_axis(nd::Axis(1))
}

fn defect_with(factors: &FloquetFactors, f: &CVec, target: f64) -> f64 {
    let vf = apply_floquet(factors, f);
    linalg::vec_norm((&vf - &f.mapv(|z| z * target)).view())
}

/// Closed-form left or right i0 mode of the open chain with `J = 0`.
pub fn analytic_edge_mode(beta: f64, h_y: f64, l: usize, side: Side) -> Result<EdgeMode> {
    if l < 2 {
        return Err(Error::InvalidParams(format!("L must be at least 2, got {l}")));
    }
    let lam = lambda_1(beta, h_y);
    if !(lam.norm() < 1.0) {
        return Err(Error::NotLocalized { lambda: lam.norm() });
    }
    let (c, s) = (h_y.cos(), h_y.sin());
    let mut v = CVec::zeros(2 * l);
    for j in 1..=l {
        let (pw, vb, va) = match side {
            Side::Left => (j - 1, c, s),
            Side::Right => (l - j, s, -c),
        };
        let amp = lam.powu(pw as u32);
        v[2 * (j - 1) + 1] = amp * vb;
        v[2 * (j - 1)] = amp * va;
    }
    fix_phase(&mut v);
    let factors = FloquetFactors::new(&uniform_open(l, beta, h_y), 0)?;
    let defect = defect_with(&factors, &site_order_to_canonical(&v), -1.0);
    Ok(EdgeMode { coeffs: v, side, sign: ModeSign::Anticommuting, defect })
}

/// The boundary matrix `M` whose null vectors are anticommuting modes.
///
/// Writing `𝒱 = A X B` with `A = e^{βH_ZZ}`, `X = e^{-iJ_xx H_XX}` and
/// `B = e^{-ihH_Y}`, the condition `𝒱F₀ = -F₀` reads `(XB + A⁻¹)F₀ = 0`.
/// The result is expressed in the `v_1 … v_{2L}` ordering, where it is
/// banded up to the corner entries of closed chains.
pub fn boundary_matrix_m(params: &ModelParams) -> Result<CMat> {
    params.validate()?;
    if params.j_zz.iter().any(|&j| j != 0.0) || params.has_interactions() {
        return Err(Error::UnsupportedCouplingPattern(
            "M is only built for ZZ measurement, XX and Y terms; use floquet_kernel_mode".into(),
        ));
    }
    let factors = FloquetFactors::new(params, 0)?;
    let mut m = factors.y.to_dense();
    factors.xx.apply_left(&mut m);
    m += &factors.zz_beta.inverse().to_dense();
    let n = m.nrows();
    let perm: Vec<usize> = (0..n).map(|i| i ^ 1).collect();
    Ok(m.select(nd::Axis(0), &perm).select(nd::Axis(1), &perm))
}

/// Eigenvalue of `M` with the smallest magnitude and its unit eigenvector.
pub fn smallest_eigenpair(m: &CMat) -> Result<(C64, CVec)> {
    let (vals, vecs) = linalg::eig(m)?;
    let k = (0..vals.len()).min_by(|&a, &b| vals[a].norm().total_cmp(&vals[b].norm())).unwrap();
    let mut v = vecs.column(k).to_owned();
    fix_phase(&mut v);
    Ok((vals[k], v))
}

#[derive(Copy, Clone, Debug, Serialize)]
#[derive(Default)]
pub struct KernelOptions {
    /// Largest accepted `|m - target|`; defaults to `1e-6 · 2L`.
    pub defect_tol: Option<f64>,
}


/// Eigenvector of `𝒱` at `target = ∓1` localized on `side`.
///
/// The two i0 modes of an open chain are (nearly) degenerate, so the solver
/// may return any combination of them; the pair closest to the target is
/// rotated to the combination with the most weight on the requested half.
pub fn floquet_kernel_mode(
    v: &FloquetMatrix,
    spectrum: &QuasiSpectrum,
    sign: ModeSign,
    side: Side,
    opts: &KernelOptions,
) -> Result<EdgeMode> {
    let l = v.l();
    let target = C64::from(sign.target());
    let tol = opts.defect_tol.unwrap_or(1e-6 * 2.0 * l as f64);
    let mut idx: Vec<usize> = (0..spectrum.raw.len()).collect();
    idx.sort_by(|&a, &b| (spectrum.raw[a] - target).norm().total_cmp(&(spectrum.raw[b] - target).norm()));
    let distance = (spectrum.raw[idx[0]] - target).norm();
    if distance > tol {
        return Err(Error::NoCandidateMode { target: sign.target(), distance, tol });
    }
    let close: Vec<usize> = idx.iter().copied().take(2).filter(|&i| (spectrum.raw[i] - target).norm() <= tol).collect();
    let basis = spectrum.right.select(nd::Axis(1), &close);
    let f = if basis.ncols() == 1 {
        basis.column(0).to_owned()
    } else {
        most_localized(&basis, side)?
    };
    let mut coeffs = canonical_to_site_order(&f);
    fix_phase(&mut coeffs);
    let f0 = site_order_to_canonical(&coeffs);
    let defect = linalg::vec_norm((v.entries.dot(&f0) - &f0.mapv(|z| z * target)).view());
    Ok(EdgeMode { coeffs, side, sign, defect })
}

/// Unit combination of the columns of `basis` maximizing the weight on one
/// half of the chain.
fn most_localized(basis: &CMat, side: Side) -> Result<CVec> {
    let n = basis.nrows();
    let half = n / 2;
    let (q, _) = linalg::orthonormalize(basis)?;
    let part_q = match side {
        Side::Left => q.slice(nd::s![..half, ..]).to_owned(),
        Side::Right => q.slice(nd::s![half.., ..]).to_owned(),
    };
    let g = linalg::adjoint(&part_q).dot(&part_q);
    let (_, vecs) = linalg::eigh(&g)?;
    Ok(q.dot(&vecs.column(vecs.ncols() - 1)))
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeReport {
    pub defect: f64,
    pub defect_ok: bool,
    /// A mode linear in Majoranas is parity-odd, so `{F, P} = 0` always.
    pub parity_anticommutation: bool,
    /// `F² = (Σ f_μ²)·1`; the value of `Σ f_μ²`.
    pub square: C64,
    pub decay_fit: Option<LineFit>,
}

/// Checks a mode against the i0 conditions.
pub fn verify_mode(v: &FloquetMatrix, mode: &EdgeMode, tol: f64) -> ModeReport {
    let f0 = mode.f0();
    let target = mode.sign.target();
    let defect = linalg::vec_norm((v.entries.dot(&f0) - &f0.mapv(|z| z * target)).view());
    let square = linalg::bilinear(f0.view(), f0.view());
    ModeReport {
        defect,
        defect_ok: defect <= tol,
        parity_anticommutation: true,
        square,
        decay_fit: decay_fit(mode, 1e-13).ok(),
    }
}

/// Least-squares slope of `ln ‖(v_{2j}, v_{2j-1})‖` against the distance from
/// the mode's own boundary, over sites `2 … L/4`. Points below `floor` times
/// the largest pair norm are dropped as rounding noise.
pub fn decay_fit(mode: &EdgeMode, floor: f64) -> Result<LineFit> {
    let norms = mode.pair_norms();
    let l = norms.len();
    let max = norms.iter().cloned().fold(0.0, f64::max);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for d in 2..=(l / 4).max(3) {
        let j = match mode.side {
            Side::Left => d,
            Side::Right => l + 1 - d,
        };
        let n = norms[j - 1];
        if n <= floor * max {
            break;
        }
        x.push(d as f64);
        y.push(n.ln());
    }
    fit::line_fit(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn det_is_one_at_reference_point() {
        let t = transfer_matrix(2.0, PI / 3.0).unwrap();
        assert!((t.det() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn transfer_is_i_times_real_symmetric() {
        let t = transfer_matrix(0.7, 0.4).unwrap();
        let e = t.entries;
        for row in e {
            for z in row {
                assert!(z.re.abs() < 1e-14);
            }
        }
        assert!((e[0][1] - e[1][0]).norm() < 1e-14);
    }

    #[test]
    fn eigenvalues_match_closed_form() {
        let (b, h) = (2.0_f64, PI / 3.0);
        let (l1, l2) = transfer_matrix(b, h).unwrap().eigenvalues();
        let e1 = C64::new(0.0, h.cos() * b.cosh() / (h.sin() * b.sinh()));
        let e2 = C64::new(0.0, -h.sin() * b.sinh() / (h.cos() * b.cosh()));
        let (small, large) = if e1.norm() < e2.norm() { (e1, e2) } else { (e2, e1) };
        assert!((l1 - large).norm() < 1e-12 && (l2 - small).norm() < 1e-12);
        assert!((lambda_1(b, h).norm() - 0.598_893_933_246_411_4).abs() < 1e-12);
    }

    #[test]
    fn singular_parameters() {
        assert!(matches!(transfer_matrix(0.0, 0.3), Err(Error::SingularParameters(_))));
        assert!(matches!(transfer_matrix(1.0, 0.0), Err(Error::SingularParameters(_))));
    }

    #[test]
    fn trivial_phase_not_localized() {
        match analytic_edge_mode(2.0, PI / 6.0, 50, Side::Left) {
            Err(Error::NotLocalized { lambda }) => assert!((lambda - 1.796_681_799_739_234).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn analytic_modes_are_kernel_vectors() {
        for side in [Side::Left, Side::Right] {
            let m = analytic_edge_mode(2.0, PI / 3.0, 60, side).unwrap();
            assert!(m.defect < 1e-12, "{side:?} {}", m.defect);
        }
    }

    #[test]
    fn m_boundary_rows() {
        let (b, h, l) = (2.0, PI / 3.0, 5);
        let m = boundary_matrix_m(&ModelParams::uniform(l, b, 0.0, 0.0, h, Boundary::Open)).unwrap();
        let (a1, a2) = ((2.0 * h).cos(), (2.0 * h).sin());
        // a_1 row: (α₁ + 1) v₁ - α₂ v₂
        assert!((m[[0, 0]] - (a1 + 1.0)).norm() < 1e-13);
        assert!((m[[0, 1]] + a2).norm() < 1e-13);
        assert!(m.row(0).iter().skip(2).all(|z| z.norm() < 1e-15));
        // b_L row: (α₁ + 1) v_{2L} + α₂ v_{2L-1}
        let r = 2 * l - 1;
        assert!((m[[r, r]] - (a1 + 1.0)).norm() < 1e-13);
        assert!((m[[r, r - 1]] - a2).norm() < 1e-13);
    }

    #[test]
    fn m_rejects_zz_rotation() {
        let p = ModelParams::uniform(5, 1.0, 0.1, 0.3, 0.5, Boundary::Open);
        assert!(matches!(boundary_matrix_m(&p), Err(Error::UnsupportedCouplingPattern(_))));
    }

    #[test]
    fn m_annihilates_analytic_mode() {
        let (b, h, l) = (2.0, PI / 3.0, 60);
        let m = boundary_matrix_m(&ModelParams::uniform(l, b, 0.0, 0.0, h, Boundary::Open)).unwrap();
        let mode = analytic_edge_mode(b, h, l, Side::Left).unwrap();
        let r = m.dot(&mode.coeffs);
        assert!(linalg::vec_norm(r.view()) < 1e-10);
    }
}
