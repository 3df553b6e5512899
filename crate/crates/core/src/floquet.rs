//! Single-particle Floquet matrix, complex quasi-energies and phase labels.
//!
//! A factor `e^{θ Σ_b H_b}` built from disjoint bonds is a product of
//! commuting 2×2 rotations, so the Floquet matrix is assembled by row
//! operations only. Its eigenvalues `m` come in pairs `(m, 1/m)`, written as
//! `m = e^{-2iε}`, which is the convention for every quasi-energy below.

use std::f64::consts::{FRAC_PI_2, PI};

use ndarray as nd;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{self, DecayVerdict};
use crate::linalg::{self, CMat};
use crate::majorana::{build_h_xx, build_h_y, build_h_zz, Boundary, MajoranaMatrix, ModelParams};

/// One 2×2 block `[[c, s], [-s, c]]` acting on indices `(mu, nu)`.
#[derive(Copy, Clone, Debug)]
pub struct Rotation {
    pub mu: usize,
    pub nu: usize,
    pub c: C64,
    pub s: C64,
}

/// Exponential of a disjoint-bond quadratic form, kept in block form.
#[derive(Clone, Debug)]
pub struct Factor {
    pub dim: usize,
    pub blocks: Vec<Rotation>,
}

impl Factor {
    pub fn identity(dim: usize) -> Self {
        Self { dim, blocks: Vec::new() }
    }

    /// `exp(Σ_b θ_b H_b)` with one complex angle per bond of `m`.
    pub fn from_angles(m: &MajoranaMatrix, angles: &[C64]) -> Result<Self> {
        m.check_disjoint()?;
        if angles.len() != m.bonds.len() {
            return Err(Error::InvalidParams(format!(
                "{} weights for {} bonds",
                angles.len(),
                m.bonds.len()
            )));
        }
        let blocks = m
            .bonds
            .iter()
            .zip(angles)
            .map(|(b, &t)| {
                let x = t * b.coeff;
                Rotation { mu: b.mu, nu: b.nu, c: x.cos(), s: x.sin() }
            })
            .collect();
        Ok(Self { dim: m.dim(), blocks })
    }

    pub fn inverse(&self) -> Self {
        let blocks = self.blocks.iter().map(|r| Rotation { s: -r.s, ..*r }).collect();
        Self { dim: self.dim, blocks }
    }

    pub fn to_dense(&self) -> CMat {
        let mut a = linalg::identity(self.dim);
        for r in &self.blocks {
            a[[r.mu, r.mu]] = r.c;
            a[[r.mu, r.nu]] = r.s;
            a[[r.nu, r.mu]] = -r.s;
            a[[r.nu, r.nu]] = r.c;
        }
        a
    }

    /// `a ← F a`.
    pub fn apply_left(&self, a: &mut CMat) {
        for r in &self.blocks {
            let (mut rows_mu, mut rows_nu) = a.multi_slice_mut((nd::s![r.mu, ..], nd::s![r.nu, ..]));
            nd::Zip::from(&mut rows_mu).and(&mut rows_nu).for_each(|x, y| {
                let (u, v) = (*x, *y);
                *x = r.c * u + r.s * v;
                *y = -r.s * u + r.c * v;
            });
        }
    }

    /// `a ← a F`.
    pub fn apply_right(&self, a: &mut CMat) {
        for r in &self.blocks {
            let (mut col_mu, mut col_nu) = a.multi_slice_mut((nd::s![.., r.mu], nd::s![.., r.nu]));
            nd::Zip::from(&mut col_mu).and(&mut col_nu).for_each(|x, y| {
                let (u, v) = (*x, *y);
                *x = r.c * u - r.s * v;
                *y = r.s * u + r.c * v;
            });
        }
    }
}

/// `exp(scale · Σ_b weight_b · H_b)` for a matrix whose bonds are disjoint.
pub fn exp_factor(m: &MajoranaMatrix, scale: C64, weights: &[f64]) -> Result<Factor> {
    let angles: Vec<C64> = weights.iter().map(|&w| scale * w).collect();
    Factor::from_angles(m, &angles)
}

/// The single-particle Floquet matrix `𝒱 = e^{-iH_F}` in Majorana space.
#[derive(Clone, Debug)]
pub struct FloquetMatrix {
    pub entries: CMat,
}

impl FloquetMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn l(&self) -> usize {
        self.dim() / 2
    }

    /// `max |𝒱ᵀ𝒱 - 1|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let p = self.entries.t().dot(&self.entries) - linalg::identity(self.dim());
        linalg::max_abs(&p)
    }
}

/// The four factors of one period, kept separate for the two evolution
/// methods. `𝒱 = zz_beta · zz_j · xx · y`, rightmost first; the two ZZ
/// factors share bonds and commute.
#[derive(Clone, Debug)]
pub struct FloquetFactors {
    pub zz_beta: Factor,
    pub zz_j: Factor,
    pub xx: Factor,
    pub y: Factor,
}

impl FloquetFactors {
    pub fn new(params: &ModelParams, step: u64) -> Result<Self> {
        params.validate()?;
        if params.has_interactions() {
            return Err(Error::UnsupportedCouplingPattern(
                "YY interactions are not quadratic; use the exact engine".into(),
            ));
        }
        let zz = build_h_zz(params);
        let xx = build_h_xx(params);
        let (y, fields) = build_h_y(params, step);
        let i = C64::i();
        Ok(Self {
            zz_beta: exp_factor(&zz, C64::from(params.beta), &vec![1.0; zz.bonds.len()])?,
            zz_j: exp_factor(&zz, -i, &params.j_zz)?,
            xx: exp_factor(&xx, -i, &params.j_xx)?,
            y: exp_factor(&y, -i, &fields)?,
        })
    }

    /// Real (norm-preserving) part `zz_j · xx · y`.
    pub fn unitary(&self) -> CMat {
        let mut a = self.y.to_dense();
        self.xx.apply_left(&mut a);
        self.zz_j.apply_left(&mut a);
        a
    }

    pub fn product(&self) -> FloquetMatrix {
        let mut a = self.unitary();
        self.zz_beta.apply_left(&mut a);
        FloquetMatrix { entries: a }
    }
}

pub fn build_floquet_matrix(params: &ModelParams, step: u64) -> Result<FloquetMatrix> {
    Ok(FloquetFactors::new(params, step)?.product())
}

#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumOptions {
    /// Pairing tolerance, scaled by `1 + |ε|`.
    pub pair_tol: f64,
    /// Largest accepted condition number of the eigenvector matrix.
    pub cond_max: f64,
    /// Distance from `±π/2` and from zero imaginary part for the π branch.
    pub branch_tol: f64,
    /// Skip the SVD-based condition estimate (costly for large matrices).
    pub skip_cond: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { pair_tol: 1e-6, cond_max: 1e10, branch_tol: 1e-6, skip_cond: false }
    }
}

/// Complex quasi-energies of a Floquet matrix.
#[derive(Clone, Debug)]
pub struct QuasiSpectrum {
    /// One representative per `±ε` pair, sorted by descending imaginary part.
    pub pairs: Vec<C64>,
    /// Raw indices `(representative, partner)` into `raw` and `right`.
    pub members: Vec<(usize, usize)>,
    /// Eigenvalues `m` of `𝒱`.
    pub raw: nd::Array1<C64>,
    /// Right eigenvectors, unit 2-norm columns.
    pub right: CMat,
    /// Pairs sitting on the `Re ε = π/2` branch with `m` doubly degenerate.
    pub pi_branch: Vec<bool>,
    /// Index into `pairs` of the isolated pair closest to the real axis.
    pub mid_gap: Option<usize>,
    /// Condition number of `right` (NaN when skipped).
    pub cond: f64,
}

impl QuasiSpectrum {
    pub fn l(&self) -> usize {
        self.pairs.len()
    }

    pub fn pi_branch_count(&self) -> usize {
        self.pi_branch.iter().filter(|&&b| b).count()
    }

    /// Smallest `|Im ε|` among pairs other than the mid-gap one.
    pub fn bulk_gap(&self) -> f64 {
        self.pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != self.mid_gap)
            .map(|(_, e)| e.im.abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn mid_gap_value(&self) -> Option<C64> {
        self.mid_gap.map(|i| self.pairs[i])
    }

    /// Left eigenvectors as rows, normalized against `right`.
    pub fn left(&self) -> Result<CMat> {
        linalg::inv(&self.right)
    }
}

/// `ε = (i/2) Log m` on the principal branch.
pub fn quasi_energy(m: C64) -> C64 {
    C64::i() * m.ln() / 2.0
}

/// Real part reduced to `(-π/2, π/2]`.
pub fn wrap_half_pi(e: C64) -> C64 {
    let mut re = e.re - PI * (e.re / PI).round();
    if re <= -FRAC_PI_2 {
        re += PI;
    }
    C64::new(re, e.im)
}

fn rep_order(a: C64, b: C64, tol: f64) -> bool {
    if (a.im - b.im).abs() > tol {
        return a.im > b.im;
    }
    wrap_half_pi(a).re >= wrap_half_pi(b).re
}

pub fn quasi_energies(v: &FloquetMatrix, opts: &SpectrumOptions) -> Result<QuasiSpectrum> {
    linalg::check_finite(&v.entries, "Floquet matrix")?;
    let (raw, right) = linalg::eig(&v.entries)?;
    let cond = if opts.skip_cond { f64::NAN } else { linalg::cond(&right)? };
    if cond > opts.cond_max {
        return Err(Error::IllConditioned { cond });
    }
    let eps: Vec<C64> = raw.iter().map(|&m| quasi_energy(m)).collect();
    let n = eps.len();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eps[b].im.abs().total_cmp(&eps[a].im.abs()));
    let mut paired = vec![false; n];
    let mut members = Vec::with_capacity(n / 2);
    for &i in &order {
        if paired[i] {
            continue;
        }
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for j in 0..n {
            if j == i || paired[j] {
                continue;
            }
            let d = wrap_half_pi(eps[i] + eps[j]).norm();
            if d < best_d {
                best_d = d;
                best = Some(j);
            }
        }
        let tol = opts.pair_tol * (1.0 + eps[i].norm());
        let j = match best {
            Some(j) if best_d <= tol => j,
            _ => {
                return Err(Error::PairingFailed { value: format!("{}", eps[i]), residual: best_d });
            }
        };
        paired[i] = true;
        paired[j] = true;
        let (r, p) = if rep_order(eps[i], eps[j], opts.pair_tol) { (i, j) } else { (j, i) };
        members.push((r, p));
    }
    members.sort_by(|a, b| eps[b.0].im.total_cmp(&eps[a.0].im));

    let pairs: Vec<C64> = members
        .iter()
        .map(|&(r, _)| {
            let mut e = wrap_half_pi(eps[r]);
            if (e.re - FRAC_PI_2).abs() < 1e-15 {
                e.re = FRAC_PI_2;
            }
            e
        })
        .collect();
    let pi_branch = members
        .iter()
        .zip(&pairs)
        .map(|(&(r, p), e)| {
            let on_branch = (e.re.abs() - FRAC_PI_2).abs() < opts.branch_tol && e.im.abs() < opts.branch_tol;
            on_branch && (raw[r] - raw[p]).norm() < 2.0 * opts.branch_tol
        })
        .collect();

    let mut by_im: Vec<usize> = (0..pairs.len()).collect();
    by_im.sort_by(|&a, &b| pairs[a].im.abs().total_cmp(&pairs[b].im.abs()));
    let mid_gap = match by_im.as_slice() {
        [only] => Some(*only),
        [first, second, ..] if pairs[*first].im.abs() < 0.5 * pairs[*second].im.abs() => Some(*first),
        _ => None,
    };

    Ok(QuasiSpectrum { pairs, members, raw, right, pi_branch, mid_gap, cond })
}

/// Translation-invariant quasi-energies `(ε(k), -ε(k))` for `J_xx = J_zz = 0`.
pub fn analytic_spectrum(beta: f64, h_y: f64, k: f64) -> (C64, C64) {
    let z = C64::new((2.0 * beta).cosh() * (2.0 * h_y).cos(), (2.0 * beta).sinh() * (2.0 * h_y).sin() * k.cos());
    let root = (C64::from(1.0) - z * z).sqrt();
    let m = z + C64::i() * root;
    let e = quasi_energy(m);
    (e, -e)
}

/// Allowed momenta for a closed chain.
pub fn momentum_grid(l: usize, bc: Boundary) -> Vec<f64> {
    let shift = if bc == Boundary::Antiperiodic { 0.5 } else { 0.0 };
    (0..l)
        .map(|n| {
            let k = 2.0 * PI * (n as f64 + shift) / l as f64;
            if k > PI { k - 2.0 * PI } else { k }
        })
        .collect()
}

/// Largest distance between the numerical pairs and the analytic momentum
/// values after greedy matching, comparing `±ε` modulo `π`.
pub fn analytic_deviation(spec: &QuasiSpectrum, beta: f64, h_y: f64, bc: Boundary) -> f64 {
    let analytic: Vec<C64> = momentum_grid(spec.l(), bc).into_iter().map(|k| analytic_spectrum(beta, h_y, k).0).collect();
    let dist = |a: C64, b: C64| wrap_half_pi(a - b).norm().min(wrap_half_pi(a + b).norm());
    let mut used = vec![false; analytic.len()];
    let mut worst = 0.0_f64;
    for &e in &spec.pairs {
        let best = (0..analytic.len())
            .filter(|&k| !used[k])
            .min_by(|&a, &b| dist(e, analytic[a]).total_cmp(&dist(e, analytic[b])));
        match best {
            Some(k) => {
                used[k] = true;
                worst = worst.max(dist(e, analytic[k]));
            }
            None => return f64::INFINITY,
        }
    }
    worst
}

/// `cosh(2β) cos(2h)`, the quantity whose magnitude sets the bulk gap.
pub fn phase_indicator(beta: f64, h_y: f64) -> f64 {
    (2.0 * beta).cosh() * (2.0 * h_y).cos()
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Oscillatory,
    TrivialDegenerate,
    Gapless,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Oscillatory => "oscillatory",
            Phase::TrivialDegenerate => "trivial-degenerate",
            Phase::Gapless => "gapless",
        }
    }
}

pub fn classify_analytic(beta: f64, h_y: f64) -> Phase {
    let p = phase_indicator(beta, h_y);
    if p < -1.0 {
        Phase::Oscillatory
    } else if p > 1.0 {
        Phase::TrivialDegenerate
    } else {
        Phase::Gapless
    }
}

#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyOptions {
    pub gap_tol: f64,
    pub split_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-3, split_tol: 1e-2 }
    }
}

#[derive(Copy, Clone, Debug, Serialize)]
pub struct PhaseReport {
    pub phase: Phase,
    /// Smallest bulk `|Im ε|`.
    pub im_gap: f64,
    /// `|ΔRe ε|` between the two mid-gap modes, in `[0, π]`; NaN if absent.
    pub re_splitting: f64,
}

pub enum PhaseSource<'a> {
    Analytic,
    /// Open-chain spectrum for the mid-gap pair, optionally a closed-chain
    /// spectrum for the bulk gap (edge modes do not pollute it).
    Numeric { open: &'a QuasiSpectrum, bulk: Option<&'a QuasiSpectrum> },
}

pub fn classify_phase(beta: f64, h_y: f64, source: PhaseSource, opts: &ClassifyOptions) -> Result<PhaseReport> {
    match source {
        PhaseSource::Analytic => {
            let phase = classify_analytic(beta, h_y);
            let p = phase_indicator(beta, h_y);
            let im_gap = if p.abs() > 1.0 { 0.5 * (p.abs() + (p * p - 1.0).sqrt()).ln() } else { 0.0 };
            let re_splitting = match phase {
                Phase::Oscillatory => PI,
                Phase::TrivialDegenerate => 0.0,
                Phase::Gapless => f64::NAN,
            };
            Ok(PhaseReport { phase, im_gap, re_splitting })
        }
        PhaseSource::Numeric { open, bulk } => classify_numeric(open, bulk, opts),
    }
}

fn classify_numeric(open: &QuasiSpectrum, bulk: Option<&QuasiSpectrum>, opts: &ClassifyOptions) -> Result<PhaseReport> {
    let im_gap = match bulk {
        Some(b) => b.pairs.iter().map(|e| e.im.abs()).fold(f64::INFINITY, f64::min),
        None => open.bulk_gap(),
    };
    let re_splitting = open.mid_gap_value().map_or(f64::NAN, |e| (2.0 * wrap_half_pi(e).re).abs());
    if (im_gap - opts.gap_tol).abs() < 0.1 * opts.gap_tol {
        return Err(Error::AmbiguousClassification(format!(
            "bulk gap {im_gap:.3e} is within 10% of gap_tol {:.1e}",
            opts.gap_tol
        )));
    }
    if im_gap < opts.gap_tol {
        return Ok(PhaseReport { phase: Phase::Gapless, im_gap, re_splitting });
    }
    let phase = if (re_splitting - PI).abs() < opts.split_tol {
        Phase::Oscillatory
    } else if re_splitting < opts.split_tol {
        Phase::TrivialDegenerate
    } else {
        return Err(Error::AmbiguousClassification(format!(
            "gapped (gap {im_gap:.3e}) but mid-gap splitting {re_splitting:.4} is neither 0 nor π"
        )));
    };
    Ok(PhaseReport { phase, im_gap, re_splitting })
}

#[derive(Clone, Debug, Serialize)]
pub struct SplittingScan {
    pub sizes: Vec<usize>,
    /// `|Im ε|` of the pair closest to the real axis at each size.
    pub splitting: Vec<f64>,
    pub verdict: Option<DecayVerdict>,
}

/// Mid-gap imaginary splitting of open chains over a list of sizes.
///
/// `params` supplies the couplings of the first bond and site; each size gets
/// a uniform open chain with those values.
pub fn finite_size_splitting(params: &ModelParams, sizes: &[usize], opts: &SpectrumOptions) -> Result<SplittingScan> {
    let mut splitting = Vec::with_capacity(sizes.len());
    for &l in sizes {
        let p = ModelParams::uniform(
            l,
            params.beta,
            params.j_xx.first().copied().unwrap_or(0.0),
            params.j_zz.first().copied().unwrap_or(0.0),
            params.h_y[0],
            Boundary::Open,
        );
        let spec = quasi_energies(&build_floquet_matrix(&p, 0)?, opts)?;
        let min = spec.pairs.iter().map(|e| e.im.abs()).fold(f64::INFINITY, f64::min);
        splitting.push(min);
    }
    let x: Vec<f64> = sizes.iter().map(|&l| l as f64).collect();
    let verdict = fit::exponential_decay(&x, &splitting, 0.99).ok();
    Ok(SplittingScan { sizes: sizes.to_vec(), splitting, verdict })
}

/// Result of diagonalizing an antisymmetric quadratic form.
#[derive(Clone, Debug)]
pub struct HamiltonianSpectrum {
    /// `λ_j`, one per pair, with `Re λ_j > 0` or `Im λ_j > 0` when imaginary.
    pub lambdas: Vec<C64>,
    /// Columns `v_{2j-1}` (eigenvalue `λ_j`) and `v_{2j}` (eigenvalue `-λ_j`),
    /// with `v_{2j-1}ᵀ v_{2j} = 1` and all other bilinear products zero.
    pub vectors: CMat,
    /// Complex-orthogonal `X` with `XᵀHX` block diagonal.
    pub x: CMat,
}

impl HamiltonianSpectrum {
    /// The block form `Σ` with `[[0, iλ_j], [-iλ_j, 0]]` blocks.
    pub fn sigma(&self) -> CMat {
        let n = 2 * self.lambdas.len();
        let mut s = CMat::zeros((n, n));
        for (j, &l) in self.lambdas.iter().enumerate() {
            s[[2 * j, 2 * j + 1]] = C64::i() * l;
            s[[2 * j + 1, 2 * j]] = -C64::i() * l;
        }
        s
    }
}

fn is_positive_branch(l: C64, tol: f64) -> bool {
    if l.re.abs() > tol { l.re > 0.0 } else { l.im > 0.0 }
}

/// Splits eigenpairs into `(p, q)` partners with `pᵀq = 1` and every other
/// bilinear product zero. Eigenvalue `k` is partnered with `negate(k)`;
/// clusters with `negate(k) ≈ k` are paired among themselves. `positive`
/// picks which member of a pair is `p`. Returns the eigenvalue of each `p`.
fn isotropic_pairs(
    keys: &[C64],
    vectors: &CMat,
    tol: f64,
    negate: impl Fn(C64) -> C64,
    positive: impl Fn(C64) -> bool,
) -> Result<(Vec<C64>, CMat)> {
    let n = keys.len();
    let mut used = vec![false; n];
    let mut clusters: Vec<(C64, Vec<usize>)> = Vec::new();
    for i in 0..n {
        if used[i] {
            continue;
        }
        let members: Vec<usize> = (i..n)
            .filter(|&j| !used[j] && (keys[j] - keys[i]).norm() < tol * (1.0 + keys[i].norm()))
            .collect();
        for &j in &members {
            used[j] = true;
        }
        let mean = members.iter().map(|&j| keys[j]).sum::<C64>() / members.len() as f64;
        clusters.push((mean, members));
    }

    let mut out_vals = Vec::with_capacity(n / 2);
    let mut out = CMat::zeros((vectors.nrows(), n));
    let mut col = 0;
    let mut done = vec![false; clusters.len()];
    for c in 0..clusters.len() {
        if done[c] {
            continue;
        }
        let (val, ref idx) = clusters[c];
        let target = negate(val);
        let self_paired = (target - val).norm() < tol * (1.0 + val.norm());
        if self_paired {
            done[c] = true;
            if idx.len() % 2 != 0 {
                return Err(Error::DegeneracyRepairFailed(format!(
                    "self-paired cluster at {val} has odd size {}",
                    idx.len()
                )));
            }
            let z = vectors.select(nd::Axis(1), idx);
            let e = bilinear_orthonormal(&z)?;
            let s = std::f64::consts::FRAC_1_SQRT_2;
            for k in 0..idx.len() / 2 {
                let e1 = e.column(2 * k);
                let e2 = e.column(2 * k + 1);
                let p = (&e1 + &e2.mapv(|x| x * C64::i())).mapv(|x| x * s);
                let q = (&e1 - &e2.mapv(|x| x * C64::i())).mapv(|x| x * s);
                out.column_mut(col).assign(&p);
                out.column_mut(col + 1).assign(&q);
                out_vals.push(val);
                col += 2;
            }
            continue;
        }
        let partner = (0..clusters.len())
            .filter(|&d| d != c && !done[d])
            .min_by(|&a, &b| (clusters[a].0 - target).norm().total_cmp(&(clusters[b].0 - target).norm()));
        let d = match partner {
            Some(d) if (clusters[d].0 - target).norm() < tol * (1.0 + val.norm()) && clusters[d].1.len() == idx.len() => d,
            _ => {
                return Err(Error::DegeneracyRepairFailed(format!(
                    "no partner cluster of matching size for {val}"
                )))
            }
        };
        done[c] = true;
        done[d] = true;
        let (pc, qc) = if positive(val) { (c, d) } else { (d, c) };
        let p_mat = vectors.select(nd::Axis(1), &clusters[pc].1);
        let q_mat = vectors.select(nd::Axis(1), &clusters[qc].1);
        let gram = q_mat.t().dot(&p_mat);
        let p_mat = p_mat.dot(&linalg::inv(&gram)?);
        for k in 0..p_mat.ncols() {
            out.column_mut(col).assign(&p_mat.column(k));
            out.column_mut(col + 1).assign(&q_mat.column(k));
            out_vals.push(clusters[pc].0);
            col += 2;
        }
    }
    Ok((out_vals, out))
}

/// Basis of the span of `z` orthonormal under the unconjugated product.
fn bilinear_orthonormal(z: &CMat) -> Result<CMat> {
    let k = z.ncols();
    let mut rest: Vec<nd::Array1<C64>> = (0..k).map(|i| z.column(i).to_owned()).collect();
    let mut basis: Vec<nd::Array1<C64>> = Vec::with_capacity(k);
    let scale = rest.iter().map(|v| linalg::vec_norm(v.view())).fold(0.0, f64::max).max(1e-300);
    while !rest.is_empty() {
        for v in rest.iter_mut() {
            for e in &basis {
                let c = linalg::bilinear(e.view(), v.view());
                *v = &*v - &e.mapv(|x| x * c);
            }
        }
        let norms: Vec<f64> = rest.iter().map(|v| linalg::bilinear(v.view(), v.view()).norm()).collect();
        let (best, &bn) = norms.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let mut v = if bn > 1e-8 * scale * scale {
            rest.swap_remove(best)
        } else if rest.len() >= 2 {
            let w = rest.swap_remove(1);
            let u = rest.swap_remove(0);
            let mut cand = &u + &w;
            if linalg::bilinear(cand.view(), cand.view()).norm() < 1e-8 * scale * scale {
                cand = &u + &w.mapv(|x| x * C64::i());
            }
            rest.push(u);
            cand
        } else {
            return Err(Error::DegeneracyRepairFailed("isotropic remainder in self-paired cluster".into()));
        };
        let nn = linalg::bilinear(v.view(), v.view()).sqrt();
        if nn.norm() < 1e-12 * scale {
            return Err(Error::DegeneracyRepairFailed("vanishing bilinear norm".into()));
        }
        v.mapv_inplace(|x| x / nn);
        basis.push(v);
        if basis.len() == k {
            break;
        }
    }
    let mut out = CMat::zeros((z.nrows(), k));
    for (i, e) in basis.iter().enumerate() {
        out.column_mut(i).assign(e);
    }
    Ok(out)
}

fn assemble_x(vectors: &CMat) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut x = CMat::zeros(vectors.dim());
    for j in 0..vectors.ncols() / 2 {
        let a = vectors.column(2 * j);
        let b = vectors.column(2 * j + 1);
        x.column_mut(2 * j).assign(&(&a + &b).mapv(|z| z * s));
        x.column_mut(2 * j + 1).assign(&(&a - &b).mapv(|z| z * C64::i() * s));
    }
    x
}

/// Pairs the eigenvectors of an antisymmetric `H` and builds `X` with
/// `XᵀX = 1` and `XᵀHX = Σ`.
pub fn diagonalize_hamiltonian(h: &MajoranaMatrix) -> Result<HamiltonianSpectrum> {
    let residual = h.antisymmetry_residual();
    if residual > 1e-10 {
        return Err(Error::NonAntisymmetricInput { residual });
    }
    let (vals, vecs) = linalg::eig(&h.entries)?;
    let scale = vals.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = 1e-7 * scale;
    let keys: Vec<C64> = vals.to_vec();
    let (lambdas, mut vectors) = isotropic_pairs(&keys, &vecs, tol, |l| -l, |l| is_positive_branch(l, tol))?;
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].re.total_cmp(&lambdas[a].re).then(lambdas[b].im.total_cmp(&lambdas[a].im)));
    let lambdas: Vec<C64> = order.iter().map(|&j| lambdas[j]).collect();
    let cols: Vec<usize> = order.iter().flat_map(|&j| [2 * j, 2 * j + 1]).collect();
    vectors = vectors.select(nd::Axis(1), &cols);
    let x = assemble_x(&vectors);
    let defect = linalg::max_abs(&(x.t().dot(&x) - linalg::identity(x.nrows())));
    if defect > 1e-8 {
        return Err(Error::DegeneracyRepairFailed(format!("XᵀX deviates from identity by {defect:.3e}")));
    }
    Ok(HamiltonianSpectrum { lambdas, vectors, x })
}

/// `H_F` with `𝒱 = e^{-iH_F}`, assembled as `Σ λ_j (p_j q_jᵀ - q_j p_jᵀ)`
/// from the paired eigenvectors so that it is antisymmetric by construction.
pub fn floquet_hamiltonian(spec: &QuasiSpectrum) -> Result<MajoranaMatrix> {
    let n = spec.raw.len();
    let keys = spec.raw.to_vec();
    let (ms, vecs) = isotropic_pairs(
        &keys,
        &spec.right,
        1e-7,
        |m| 1.0 / m,
        |m| {
            let e = quasi_energy(m);
            if e.im.abs() > 1e-12 { e.im > 0.0 } else { e.re > 0.0 }
        },
    )?;
    let p = vecs.slice(nd::s![.., ..;2]);
    let q = vecs.slice(nd::s![.., 1..;2]);
    let lam = nd::Array1::from_iter(ms.iter().map(|&m| 2.0 * quasi_energy(m)));
    let pl = &p * &lam.view().insert_axis(nd::Axis(0));
    let hf = pl.dot(&q.t()) - q.dot(&pl.t());
    debug_assert_eq!(hf.nrows(), n);
    Ok(MajoranaMatrix { entries: hf, bonds: Vec::new() })
}
