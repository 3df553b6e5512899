//! Extended-precision eigenvalues of the boundary matrix `M`.
//!
//! The smallest eigenvalues of `M` in the localized phase fall like
//! `|λ₁|^L` and leave double precision near `L ≈ 100`. Here `M` is rebuilt
//! from the same (exactly representable) angles in fixed-point complex
//! arithmetic, factored as a banded LU and probed by two-column inverse
//! subspace iteration.

use std::cell::Cell;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64 as C64;
use num_traits::{float::FloatCore, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::majorana::{build_h_xx, build_h_y, build_h_zz, Boundary, MajoranaMatrix, ModelParams};

/// Starting number of fractional bits; doubled until the eigenvalue is resolved.
pub const DEFAULT_BITS: u64 = 640;
pub const MAX_BITS: u64 = 10240;

thread_local! {
    static BITS: Cell<u64> = const { Cell::new(DEFAULT_BITS) };
}

fn prec() -> u64 {
    BITS.with(Cell::get)
}

/// Runs `f` with `bits` fractional bits on this thread.
pub fn with_precision<R>(bits: u64, f: impl FnOnce() -> R) -> R {
    let old = BITS.with(|b| b.replace(bits));
    let out = f();
    BITS.with(|b| b.set(old));
    out
}

/// Fixed-point complex number `(re + i·im) / 2^bits`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cx {
    pub re: BigInt,
    pub im: BigInt,
}

fn fx_from_f64(x: f64) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let (m, e, s) = FloatCore::integer_decode(x);
    let shift = e as i64 + prec() as i64;
    let mag = if shift >= 0 { BigInt::from(m) << shift as u64 } else { BigInt::from(m) >> (-shift) as u64 };
    if s < 0 { -mag } else { mag }
}

fn fx_to_f64(x: &BigInt) -> f64 {
    let bits = x.bits();
    let (head, shift) = if bits > 900 { (x >> (bits - 900), (bits - 900) as i32) } else { (x.clone(), 0) };
    let e = shift - prec() as i32;
    // split the scaling so neither factor leaves the normal range
    head.to_f64().unwrap_or(f64::NAN) * 2f64.powi(e / 2) * 2f64.powi(e - e / 2)
}

fn fx_one() -> BigInt {
    BigInt::from(1) << prec()
}

fn fx_sqrt(a: &BigInt) -> BigInt {
    if a.is_negative() {
        return BigInt::zero();
    }
    (a << prec()).sqrt()
}

impl Cx {
    pub fn zero() -> Self {
        Self { re: BigInt::zero(), im: BigInt::zero() }
    }

    pub fn one() -> Self {
        Self { re: fx_one(), im: BigInt::zero() }
    }

    pub fn from_c64(z: C64) -> Self {
        Self { re: fx_from_f64(z.re), im: fx_from_f64(z.im) }
    }

    pub fn to_c64(&self) -> C64 {
        C64::new(fx_to_f64(&self.re), fx_to_f64(&self.im))
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn add(&self, o: &Cx) -> Cx {
        Cx { re: &self.re + &o.re, im: &self.im + &o.im }
    }

    pub fn sub(&self, o: &Cx) -> Cx {
        Cx { re: &self.re - &o.re, im: &self.im - &o.im }
    }

    pub fn neg(&self) -> Cx {
        Cx { re: -&self.re, im: -&self.im }
    }

    pub fn conj(&self) -> Cx {
        Cx { re: self.re.clone(), im: -&self.im }
    }

    pub fn mul(&self, o: &Cx) -> Cx {
        Cx {
            re: (&self.re * &o.re - &self.im * &o.im) >> prec(),
            im: (&self.re * &o.im + &self.im * &o.re) >> prec(),
        }
    }

    pub fn div(&self, o: &Cx) -> Cx {
        let den = &o.re * &o.re + &o.im * &o.im;
        let re = &self.re * &o.re + &self.im * &o.im;
        let im = &self.im * &o.re - &self.re * &o.im;
        Cx { re: (re << prec()) / &den, im: (im << prec()) / &den }
    }

    fn div_int(&self, n: u64) -> Cx {
        Cx { re: &self.re / n, im: &self.im / n }
    }

    fn shr(&self, k: u64) -> Cx {
        Cx { re: &self.re >> k, im: &self.im >> k }
    }

    /// `ln |z|`, valid below the double-precision range.
    pub fn ln_abs(&self) -> f64 {
        let r2 = &self.re * &self.re + &self.im * &self.im;
        let bits = r2.bits();
        if bits == 0 {
            return f64::NEG_INFINITY;
        }
        let shift = bits.saturating_sub(64);
        let head = (&r2 >> shift).to_f64().unwrap_or(f64::NAN);
        0.5 * (head.ln() + (shift as f64 - 2.0 * prec() as f64) * std::f64::consts::LN_2)
    }

    /// `|z|²` in fixed point.
    pub fn abs2(&self) -> BigInt {
        (&self.re * &self.re + &self.im * &self.im) >> prec()
    }

    /// Principal square root.
    pub fn sqrt(&self) -> Cx {
        let r = (&self.re * &self.re + &self.im * &self.im).sqrt();
        let re = fx_sqrt(&((&r + &self.re) >> 1));
        let mut im = fx_sqrt(&((&r - &self.re) >> 1));
        if self.im.is_negative() {
            im = -im;
        }
        Cx { re, im }
    }

    pub fn exp(&self) -> Cx {
        let mag = self.to_c64().norm();
        let k = if mag > 0.0 { (mag.log2().ceil() as i64 + 12).max(0) as u64 } else { 0 };
        let w = self.shr(k);
        let mut sum = Cx::one();
        let mut term = Cx::one();
        for n in 1.. {
            term = term.mul(&w).div_int(n);
            if term.is_zero() {
                break;
            }
            sum = sum.add(&term);
        }
        for _ in 0..k {
            sum = sum.mul(&sum);
        }
        sum
    }

    /// `(cos z, sin z)`.
    pub fn cos_sin(&self) -> (Cx, Cx) {
        let iz = Cx { re: -&self.im, im: self.re.clone() };
        let e1 = iz.exp();
        let e2 = iz.neg().exp();
        let c = e1.add(&e2).shr(1);
        let d = e1.sub(&e2).shr(1);
        // sin = (e1 - e2) / 2i
        (c, Cx { re: d.im.clone(), im: -d.re })
    }
}

type SparseRows = Vec<BTreeMap<usize, Cx>>;

fn rotation_blocks(m: &MajoranaMatrix, angles: &[C64]) -> Vec<(usize, usize, Cx, Cx)> {
    m.bonds
        .iter()
        .zip(angles)
        .map(|(b, &t)| {
            let (c, s) = Cx::from_c64(t * b.coeff).cos_sin();
            (b.mu, b.nu, c, s)
        })
        .collect()
}

/// `M = X B + A⁻¹` in the `v_1 … v_{2L}` ordering, in fixed point.
pub fn boundary_matrix_hp(params: &ModelParams) -> Result<SparseRows> {
    params.validate()?;
    if params.j_zz.iter().any(|&j| j != 0.0) || params.has_interactions() {
        return Err(Error::UnsupportedCouplingPattern("M is only built for ZZ measurement, XX and Y terms".into()));
    }
    if params.bc != Boundary::Open {
        return Err(Error::InvalidParams("the banded M solver needs an open chain".into()));
    }
    let n = 2 * params.l;
    let i = C64::i();
    let (hy, fields) = build_h_y(params, 0);
    let hx = build_h_xx(params);
    let hz = build_h_zz(params);
    let y_angles: Vec<C64> = fields.iter().map(|&h| -i * h).collect();
    let x_angles: Vec<C64> = params.j_xx.iter().map(|&j| -i * j).collect();
    let z_angles: Vec<C64> = (0..hz.bonds.len()).map(|_| C64::from(params.beta)).collect();

    let mut rows: SparseRows = (0..n).map(|r| BTreeMap::from([(r, Cx::one())])).collect();
    for (mu, nu, c, s) in rotation_blocks(&hy, &y_angles) {
        rows[mu] = BTreeMap::from([(mu, c.clone()), (nu, s.clone())]);
        rows[nu] = BTreeMap::from([(mu, s.neg()), (nu, c)]);
    }
    for (mu, nu, c, s) in rotation_blocks(&hx, &x_angles) {
        let (rm, rn) = (rows[mu].clone(), rows[nu].clone());
        rows[mu] = combine(&c, &rm, &s, &rn);
        rows[nu] = combine(&s.neg(), &rm, &c, &rn);
    }
    // A⁻¹ has identity off its blocks
    let mut covered = vec![false; n];
    for (mu, nu, c, s) in rotation_blocks(&hz, &z_angles) {
        covered[mu] = true;
        covered[nu] = true;
        add_entry(&mut rows[mu], mu, &c);
        add_entry(&mut rows[mu], nu, &s.neg());
        add_entry(&mut rows[nu], mu, &s);
        add_entry(&mut rows[nu], nu, &c);
    }
    for r in 0..n {
        if !covered[r] {
            add_entry(&mut rows[r], r, &Cx::one());
        }
    }
    let perm = |k: usize| k ^ 1;
    Ok((0..n).map(|r| rows[perm(r)].iter().map(|(&c, v)| (perm(c), v.clone())).collect()).collect())
}

fn combine(a: &Cx, ra: &BTreeMap<usize, Cx>, b: &Cx, rb: &BTreeMap<usize, Cx>) -> BTreeMap<usize, Cx> {
    let mut out = BTreeMap::new();
    for (&k, v) in ra {
        add_entry(&mut out, k, &a.mul(v));
    }
    for (&k, v) in rb {
        add_entry(&mut out, k, &b.mul(v));
    }
    out
}

fn add_entry(row: &mut BTreeMap<usize, Cx>, col: usize, v: &Cx) {
    let e = row.entry(col).or_insert_with(Cx::zero);
    *e = e.add(v);
}

fn matvec(rows: &SparseRows, x: &[Cx]) -> Vec<Cx> {
    rows.iter().map(|r| r.iter().fold(Cx::zero(), |acc, (&c, v)| acc.add(&v.mul(&x[c])))).collect()
}

/// Banded LU factorization with partial pivoting.
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row `i` stores columns `i - kl ..= i + kl + ku`.
    data: Vec<Vec<Cx>>,
    piv: Vec<usize>,
}

impl BandLu {
    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as i64 - i as i64 + self.kl as i64;
        (off >= 0 && (off as usize) < self.width()).then_some(off as usize)
    }

    fn get(&self, i: usize, j: usize) -> Cx {
        self.slot(i, j).map(|s| self.data[i][s].clone()).unwrap_or_else(Cx::zero)
    }

    fn set(&mut self, i: usize, j: usize, v: Cx) {
        let s = self.slot(i, j).expect("band overflow");
        self.data[i][s] = v;
    }

    fn factor(rows: &SparseRows) -> Result<Self> {
        let n = rows.len();
        let (mut kl, mut ku) = (0, 0);
        for (i, r) in rows.iter().enumerate() {
            for &j in r.keys() {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let w = 2 * kl + ku + 1;
        let mut lu = Self { n, kl, ku, data: vec![vec![Cx::zero(); w]; n], piv: vec![0; n] };
        for (i, r) in rows.iter().enumerate() {
            for (&j, v) in r {
                lu.set(i, j, v.clone());
            }
        }
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let p = (k..=last).max_by(|&a, &b| lu.get(a, k).abs2().cmp(&lu.get(b, k).abs2())).unwrap();
            lu.piv[k] = p;
            let hi = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=hi {
                    let (a, b) = (lu.get(k, j), lu.get(p, j));
                    lu.set(k, j, b);
                    lu.set(p, j, a);
                }
            }
            let pivot = lu.get(k, k);
            if pivot.is_zero() {
                return Err(Error::Linalg("M is singular to working precision".into()));
            }
            for i in k + 1..=last {
                let f = lu.get(i, k).div(&pivot);
                if f.is_zero() {
                    lu.set(i, k, f);
                    continue;
                }
                for j in k + 1..=hi {
                    let u = lu.get(k, j);
                    if !u.is_zero() {
                        let v = lu.get(i, j).sub(&f.mul(&u));
                        lu.set(i, j, v);
                    }
                }
                lu.set(i, k, f);
            }
        }
        Ok(lu)
    }

    fn solve(&self, b: &[Cx]) -> Vec<Cx> {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            for i in k + 1..=(k + self.kl).min(n - 1) {
                let f = self.get(i, k);
                if !f.is_zero() {
                    x[i] = x[i].sub(&f.mul(&x[k]));
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k].clone();
            for j in k + 1..=(k + self.kl + self.ku).min(n - 1) {
                let u = self.get(k, j);
                if !u.is_zero() {
                    s = s.sub(&u.mul(&x[j]));
                }
            }
            x[k] = s.div(&self.get(k, k));
        }
        x
    }
}

fn dot(a: &[Cx], b: &[Cx]) -> Cx {
    a.iter().zip(b).fold(Cx::zero(), |acc, (x, y)| acc.add(&x.conj().mul(y)))
}

fn scale(v: &[Cx], s: &Cx) -> Vec<Cx> {
    v.iter().map(|x| x.mul(s)).collect()
}

/// Unit vector along `v`; entries are first shifted so the largest is of
/// order one, which keeps the norm inside the double range.
fn normalize(v: &[Cx]) -> Result<Vec<Cx>> {
    let top = v.iter().map(|x| x.re.bits().max(x.im.bits())).max().unwrap_or(0);
    if top == 0 {
        return Err(Error::Linalg("inverse iteration produced a zero vector".into()));
    }
    let k = top as i64 - prec() as i64;
    let shifted: Vec<Cx> = v
        .iter()
        .map(|x| if k >= 0 { x.shr(k as u64) } else { Cx { re: &x.re << (-k) as u64, im: &x.im << (-k) as u64 } })
        .collect();
    let n2: f64 = shifted.iter().map(|x| x.to_c64().norm_sqr()).sum();
    Ok(scale(&shifted, &Cx::from_c64(C64::from(1.0 / n2.sqrt()))))
}

#[derive(Clone, Debug, Serialize)]
pub struct HpEigen {
    /// The two Ritz values, smaller magnitude first.
    pub values: [C64; 2],
    /// `ln |·|` of the smaller value, finite even when it underflows a double.
    pub ln_abs: f64,
    pub iterations: usize,
    pub converged: bool,
    pub bits: u64,
}

impl HpEigen {
    pub fn smallest(&self) -> C64 {
        self.values[0]
    }
}

/// Two eigenvalues of `M` of smallest magnitude, by inverse subspace
/// iteration in current-precision fixed point. Converged when the smaller Ritz
/// value changes by less than `rel_tol` relative between iterations.
pub fn smallest_eigenvalues_hp(params: &ModelParams, max_iter: usize, rel_tol: f64) -> Result<HpEigen> {
    let rows = boundary_matrix_hp(params)?;
    let n = rows.len();
    let lu = BandLu::factor(&rows)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q: Vec<Vec<Cx>> = (0..2)
        .map(|_| (0..n).map(|_| Cx::from_c64(C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))).collect())
        .collect();
    let mut prev: Option<Cx> = None;
    let mut values = [C64::from(0.0); 2];
    let mut ln_abs = f64::NAN;
    for it in 1..=max_iter {
        let y0 = normalize(&lu.solve(&q[0]))?;
        let y1 = lu.solve(&q[1]);
        let proj = dot(&y0, &y1).div(&dot(&y0, &y0));
        let y1 = normalize(&y1.iter().zip(&y0).map(|(a, b)| a.sub(&proj.mul(b))).collect::<Vec<_>>())?;
        q = vec![y0, y1];
        let (small, large) = ritz_pair(&rows, &q);
        values = [small.to_c64(), large.to_c64()];
        ln_abs = small.ln_abs();
        if let Some(p) = &prev {
            if small.sub(p).ln_abs() - ln_abs <= rel_tol.ln() {
                return Ok(HpEigen { values, ln_abs, iterations: it, converged: true, bits: prec() });
            }
        }
        prev = Some(small);
    }
    Ok(HpEigen { values, ln_abs, iterations: max_iter, converged: false, bits: prec() })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenRoute {
    Double,
    Extended,
}

#[derive(Copy, Clone, Debug, Serialize)]
pub struct SmallestEigen {
    pub value: C64,
    pub ln_abs: f64,
    pub route: EigenRoute,
}

/// Below this fraction of `max |M_ij|` a double-precision eigenvalue is
/// refined in fixed point.
pub const REFINE_BELOW: f64 = 1e-8;

/// Smallest-magnitude eigenvalue of `M`: dense double precision when it is
/// resolvable there, otherwise [`smallest_eigenvalues_hp`].
pub fn smallest_m_eigenvalue(params: &ModelParams) -> Result<SmallestEigen> {
    let m = crate::edge::boundary_matrix_m(params)?;
    let (mu, _) = crate::edge::smallest_eigenpair(&m)?;
    let scale = crate::linalg::max_abs(&m);
    if mu.norm() > REFINE_BELOW * scale {
        return Ok(SmallestEigen { value: mu, ln_abs: mu.norm().ln(), route: EigenRoute::Double });
    }
    let mut bits = DEFAULT_BITS;
    loop {
        // accepted once the eigenvalue sits above half the working precision
        if let Ok(hp) = with_precision(bits, || smallest_eigenvalues_hp(params, 100, 1e-14)) {
            if hp.converged && hp.ln_abs > -0.5 * bits as f64 * std::f64::consts::LN_2 {
                return Ok(SmallestEigen { value: hp.smallest(), ln_abs: hp.ln_abs, route: EigenRoute::Extended });
            }
        }
        if bits >= MAX_BITS {
            return Err(Error::Linalg(format!("smallest eigenvalue of M unresolved at {bits} bits for L = {}", params.l)));
        }
        bits *= 2;
    }
}

/// Eigenvalues of `(Q†Q)⁻¹ Q†MQ`, smaller magnitude first.
fn ritz_pair(rows: &SparseRows, q: &[Vec<Cx>]) -> (Cx, Cx) {
    let mq: Vec<Vec<Cx>> = q.iter().map(|c| matvec(rows, c)).collect();
    let g = [[dot(&q[0], &q[0]), dot(&q[0], &q[1])], [dot(&q[1], &q[0]), dot(&q[1], &q[1])]];
    let h = [[dot(&q[0], &mq[0]), dot(&q[0], &mq[1])], [dot(&q[1], &mq[0]), dot(&q[1], &mq[1])]];
    let det_g = g[0][0].mul(&g[1][1]).sub(&g[0][1].mul(&g[1][0]));
    let ginv = [[g[1][1].div(&det_g), g[0][1].neg().div(&det_g)], [g[1][0].neg().div(&det_g), g[0][0].div(&det_g)]];
    let r = |a: usize, b: usize| ginv[a][0].mul(&h[0][b]).add(&ginv[a][1].mul(&h[1][b]));
    let (r00, r01, r10, r11) = (r(0, 0), r(0, 1), r(1, 0), r(1, 1));
    let half_tr = r00.add(&r11).shr(1);
    let det = r00.mul(&r11).sub(&r01.mul(&r10));
    let disc = half_tr.mul(&half_tr).sub(&det).sqrt();
    let (p, m) = (half_tr.add(&disc), half_tr.sub(&disc));
    let large = if p.to_c64().norm() >= m.to_c64().norm() { p } else { m };
    if large.is_zero() {
        return (Cx::zero(), Cx::zero());
    }
    (det.div(&large), large)
}
