//! Run parameters and the real-space Majorana coefficient matrices of each
//! term in the drive.
//!
//! Index convention used throughout the crate: for the 0-based site `s`, the
//! Majorana `b_s` sits at index `2s` and `a_s` at index `2s + 1`, so the vector
//! of operators reads `(b_1, a_1, b_2, a_2, ...)`. A quadratic operator is
//! stored as the antisymmetric matrix `H` of `γᵀ H γ / 4`; a term
//! `c · i γ_μ γ_ν` contributes `H[μ][ν] = 2ic` and `H[ν][μ] = -2ic`.
//!
//! The builders return unit-weight skeletons. Coupling strengths are applied
//! when the factors are exponentiated, which lets a single skeleton serve
//! disordered and time-dependent runs.

use ndarray as nd;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of `b` on a 0-based site.
#[inline]
pub fn b_index(site: usize) -> usize {
    2 * site
}

/// Index of `a` on a 0-based site.
#[inline]
pub fn a_index(site: usize) -> usize {
    2 * site + 1
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum MajoranaKind {
    B,
    A,
}

/// One entry of the canonical Majorana ordering.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct MajoranaLabel {
    /// 0-based site.
    pub site: usize,
    pub kind: MajoranaKind,
}

/// The index map used by every module: position `i` of the returned vector is
/// the Majorana stored at matrix index `i`.
pub fn canonical_ordering(l: usize) -> Vec<MajoranaLabel> {
    (0..2 * l)
        .map(|i| MajoranaLabel {
            site: i / 2,
            kind: if i % 2 == 0 { MajoranaKind::B } else { MajoranaKind::A },
        })
        .collect()
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
    Antiperiodic,
}

impl Boundary {
    pub fn is_closed(self) -> bool {
        !matches!(self, Boundary::Open)
    }

    /// Weight carried by the wrap-around bond.
    pub fn wrap_sign(self) -> f64 {
        match self {
            Boundary::Antiperiodic => -1.0,
            _ => 1.0,
        }
    }

    pub fn bond_count(self, l: usize) -> usize {
        if self.is_closed() { l } else { l - 1 }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisorderKind {
    #[default]
    None,
    /// One draw per site, fixed for the whole run.
    Quenched,
    /// Fresh draw per site at every time step.
    Stochastic,
}

/// Random Y fields `h_j = mean + delta * u_j`, `u_j` uniform in `[-1, 1]`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    #[serde(default)]
    pub kind: DisorderKind,
    #[serde(default)]
    pub mean: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for DisorderSpec {
    fn default() -> Self {
        Self { kind: DisorderKind::None, mean: 0.0, delta: 0.0, seed: 0 }
    }
}

impl DisorderSpec {
    pub fn quenched(mean: f64, delta: f64, seed: u64) -> Self {
        Self { kind: DisorderKind::Quenched, mean, delta, seed }
    }

    pub fn stochastic(mean: f64, delta: f64, seed: u64) -> Self {
        Self { kind: DisorderKind::Stochastic, mean, delta, seed }
    }

    /// Field values on `l` sites at time `step`.
    ///
    /// The draw is keyed by `(seed, step)` through the ChaCha stream id, so
    /// any worker can reproduce the fields of any step without replaying the
    /// ones before it. Quenched disorder always reads stream 0.
    pub fn fields(&self, l: usize, step: u64) -> Option<Vec<f64>> {
        let stream = match self.kind {
            DisorderKind::None => return None,
            DisorderKind::Quenched => 0,
            DisorderKind::Stochastic => step,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        Some(
            (0..l)
                .map(|_| self.mean + self.delta * rng.random_range(-1.0..=1.0))
                .collect(),
        )
    }
}

/// Full specification of a run.
///
/// Bond sequences have `L - 1` entries for open chains and `L` for closed
/// ones, the last closed bond being the wrap `(L, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    pub l: usize,
    pub beta: f64,
    pub j_xx: Vec<f64>,
    pub j_zz: Vec<f64>,
    pub j_yy: Vec<f64>,
    pub h_y: Vec<f64>,
    pub bc: Boundary,
    pub disorder: DisorderSpec,
    pub seed: u64,
}

impl ModelParams {
    /// Translation-invariant couplings.
    pub fn uniform(l: usize, beta: f64, j_xx: f64, j_zz: f64, h_y: f64, bc: Boundary) -> Self {
        let nb = if l >= 2 { bc.bond_count(l) } else { 0 };
        Self {
            l,
            beta,
            j_xx: vec![j_xx; nb],
            j_zz: vec![j_zz; nb],
            j_yy: vec![0.0; nb],
            h_y: vec![h_y; l],
            bc,
            disorder: DisorderSpec::default(),
            seed: 0,
        }
    }

    pub fn with_j_yy(mut self, j_yy: f64) -> Self {
        self.j_yy = vec![j_yy; self.n_bonds()];
        self
    }

    pub fn with_disorder(mut self, disorder: DisorderSpec) -> Self {
        self.disorder = disorder;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_bonds(&self) -> usize {
        self.bc.bond_count(self.l)
    }

    /// Sites joined by bond `k`.
    pub fn bond_sites(&self, k: usize) -> (usize, usize) {
        (k, (k + 1) % self.l)
    }

    pub fn has_interactions(&self) -> bool {
        self.j_yy.iter().any(|&j| j != 0.0)
    }

    pub fn is_free_of_xx_zz(&self) -> bool {
        self.j_xx.iter().chain(&self.j_zz).all(|&j| j == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return Err(Error::InvalidParams(format!("L must be at least 2, got {}", self.l)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidParams(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        let nb = self.n_bonds();
        for (name, seq) in [("j_xx", &self.j_xx), ("j_zz", &self.j_zz), ("j_yy", &self.j_yy)] {
            if seq.len() != nb {
                return Err(Error::InvalidParams(format!(
                    "{name} has {} entries, expected {nb} for L = {} with {:?} boundary",
                    seq.len(),
                    self.l,
                    self.bc
                )));
            }
        }
        if self.h_y.len() != self.l {
            return Err(Error::InvalidParams(format!(
                "h_y has {} entries, expected {}",
                self.h_y.len(),
                self.l
            )));
        }
        let all = self.j_xx.iter().chain(&self.j_zz).chain(&self.j_yy).chain(&self.h_y);
        if let Some(bad) = all.copied().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite coupling {bad}")));
        }
        if !(self.disorder.delta >= 0.0 && self.disorder.delta.is_finite() && self.disorder.mean.is_finite()) {
            return Err(Error::InvalidParams("disorder delta must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Y field on every site at time `step`; disorder replaces `h_y` when active.
    pub fn y_fields(&self, step: u64) -> Vec<f64> {
        self.disorder
            .fields(self.l, step)
            .unwrap_or_else(|| self.h_y.clone())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ScalarOrSeq {
    Scalar(f64),
    Seq(Vec<f64>),
}

impl ScalarOrSeq {
    fn broadcast(self, n: usize) -> Vec<f64> {
        match self {
            ScalarOrSeq::Scalar(x) => vec![x; n],
            ScalarOrSeq::Seq(v) => v,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawParams {
    #[serde(rename = "L")]
    l: usize,
    #[serde(default)]
    beta: f64,
    #[serde(default = "zero_coupling")]
    j_xx: ScalarOrSeq,
    #[serde(default = "zero_coupling")]
    j_zz: ScalarOrSeq,
    #[serde(default = "zero_coupling")]
    j_yy: ScalarOrSeq,
    #[serde(default = "zero_coupling")]
    h_y: ScalarOrSeq,
    #[serde(default = "open_bc")]
    bc: Boundary,
    #[serde(default)]
    disorder: DisorderSpec,
    #[serde(default)]
    seed: u64,
}

fn zero_coupling() -> ScalarOrSeq {
    ScalarOrSeq::Scalar(0.0)
}

fn open_bc() -> Boundary {
    Boundary::Open
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        if raw.l < 2 {
            return Err(Error::InvalidParams(format!("L must be at least 2, got {}", raw.l)));
        }
        let nb = raw.bc.bond_count(raw.l);
        let p = ModelParams {
            l: raw.l,
            beta: raw.beta,
            j_xx: raw.j_xx.broadcast(nb),
            j_zz: raw.j_zz.broadcast(nb),
            j_yy: raw.j_yy.broadcast(nb),
            h_y: raw.h_y.broadcast(raw.l),
            bc: raw.bc,
            disorder: raw.disorder,
            seed: raw.seed,
        };
        p.validate()?;
        Ok(p)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            l: p.l,
            beta: p.beta,
            j_xx: ScalarOrSeq::Seq(p.j_xx),
            j_zz: ScalarOrSeq::Seq(p.j_zz),
            j_yy: ScalarOrSeq::Seq(p.j_yy),
            h_y: ScalarOrSeq::Seq(p.h_y),
            bc: p.bc,
            disorder: p.disorder,
            seed: p.seed,
        }
    }
}

/// A single two-Majorana term `H[mu][nu] = coeff`, `H[nu][mu] = -coeff`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Bond {
    pub mu: usize,
    pub nu: usize,
    pub coeff: C64,
}

/// Antisymmetric `2L x 2L` coefficient matrix together with the bond list it
/// was assembled from.
#[derive(Clone, Debug)]
pub struct MajoranaMatrix {
    pub entries: nd::Array2<C64>,
    pub bonds: Vec<Bond>,
}

impl MajoranaMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { entries: nd::Array2::zeros((dim, dim)), bonds: Vec::new() }
    }

    /// Builds the matrix of `Σ c · i γ_μ γ_ν` from `(μ, ν, c)` triples.
    pub fn from_terms(dim: usize, terms: &[(usize, usize, C64)]) -> Self {
        let mut m = Self::zeros(dim);
        for &(mu, nu, c) in terms {
            m.push_term(mu, nu, c);
        }
        m
    }

    /// Adds `c · i γ_μ γ_ν`.
    pub fn push_term(&mut self, mu: usize, nu: usize, c: C64) {
        assert_ne!(mu, nu, "diagonal Majorana terms are constants");
        let coeff = 2.0 * C64::i() * c;
        self.entries[[mu, nu]] += coeff;
        self.entries[[nu, mu]] -= coeff;
        self.bonds.push(Bond { mu, nu, coeff });
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest `|H + Hᵀ|` entry relative to the largest `|H|` entry.
    pub fn antisymmetry_residual(&self) -> f64 {
        antisymmetry_residual(&self.entries)
    }

    /// Checks that no Majorana index appears in two bonds.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut seen = vec![false; self.dim()];
        for b in &self.bonds {
            for idx in [b.mu, b.nu] {
                if seen[idx] {
                    return Err(Error::OverlappingBonds { index: idx });
                }
                seen[idx] = true;
            }
        }
        Ok(())
    }
}

pub fn antisymmetry_residual(m: &nd::Array2<C64>) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..=i {
            worst = worst.max((m[[i, j]] + m[[j, i]]).norm());
        }
    }
    worst / scale
}

fn bond_sign(params: &ModelParams, k: usize) -> f64 {
    if k + 1 == params.l { params.bc.wrap_sign() } else { 1.0 }
}

/// `H_ZZ = -i Σ b_j a_{j+1}`, unit weight per bond.
pub fn build_h_zz(params: &ModelParams) -> MajoranaMatrix {
    let mut m = MajoranaMatrix::zeros(2 * params.l);
    for k in 0..params.n_bonds() {
        let (s, t) = params.bond_sites(k);
        m.push_term(b_index(s), a_index(t), C64::from(-bond_sign(params, k)));
    }
    m
}

/// `H_XX = i Σ a_j b_{j+1}`, unit weight per bond.
pub fn build_h_xx(params: &ModelParams) -> MajoranaMatrix {
    let mut m = MajoranaMatrix::zeros(2 * params.l);
    for k in 0..params.n_bonds() {
        let (s, t) = params.bond_sites(k);
        m.push_term(a_index(s), b_index(t), C64::from(bond_sign(params, k)));
    }
    m
}

/// `H_Y = i Σ b_j a_j` with unit weights, and the per-site fields at `step`.
pub fn build_h_y(params: &ModelParams, step: u64) -> (MajoranaMatrix, Vec<f64>) {
    let mut m = MajoranaMatrix::zeros(2 * params.l);
    for s in 0..params.l {
        m.push_term(b_index(s), a_index(s), C64::from(1.0));
    }
    (m, params.y_fields(step))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_term_follows_coefficient_rule() {
        let m = MajoranaMatrix::from_terms(2, &[(0, 1, C64::from(1.0))]);
        assert_eq!(m.entries[[0, 1]], C64::new(0.0, 2.0));
        assert_eq!(m.entries[[1, 0]], C64::new(0.0, -2.0));
        assert_eq!(m.entries.iter().filter(|z| z.norm() > 0.0).count(), 2);
    }

    #[test]
    fn zz_two_sites_open_is_single_bond() {
        let p = ModelParams::uniform(2, 0.0, 0.0, 0.0, 0.0, Boundary::Open);
        let m = build_h_zz(&p);
        assert_eq!(m.bonds.len(), 1);
        // b_1 = 0, a_2 = 3; -i prefactor gives 2i * (-1)
        assert_eq!(m.entries[[0, 3]], C64::new(0.0, -2.0));
        assert_eq!(m.entries[[3, 0]], C64::new(0.0, 2.0));
        assert_eq!(m.entries.iter().filter(|z| z.norm() > 0.0).count(), 2);
    }

    #[test]
    fn zz_three_sites_pattern() {
        let p = ModelParams::uniform(3, 0.0, 0.0, 0.0, 0.0, Boundary::Open);
        let m = build_h_zz(&p);
        let nz: Vec<(usize, usize)> = m
            .entries
            .indexed_iter()
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(ij, _)| ij)
            .collect();
        assert_eq!(nz, vec![(0, 3), (2, 5), (3, 0), (5, 2)]);
    }

    #[test]
    fn xx_two_sites_open_couples_a1_b2() {
        let p = ModelParams::uniform(2, 0.0, 0.0, 0.0, 0.0, Boundary::Open);
        let m = build_h_xx(&p);
        assert_eq!(m.bonds.len(), 1);
        assert_eq!(m.entries[[1, 2]], C64::new(0.0, 2.0));
    }

    #[test]
    fn wrap_bond_sign() {
        let p = ModelParams::uniform(3, 0.0, 0.0, 0.0, 0.0, Boundary::Antiperiodic);
        let m = build_h_zz(&p);
        // wrap bond couples b_3 (4) to a_1 (1) with flipped sign
        assert_eq!(m.entries[[4, 1]], C64::new(0.0, 2.0));
        let p = ModelParams::uniform(3, 0.0, 0.0, 0.0, 0.0, Boundary::Periodic);
        assert_eq!(build_h_zz(&p).entries[[4, 1]], C64::new(0.0, -2.0));
    }

    #[test]
    fn builders_antisymmetric_and_disjoint() {
        for l in 2..=8 {
            for bc in [Boundary::Open, Boundary::Periodic, Boundary::Antiperiodic] {
                let p = ModelParams::uniform(l, 0.3, 0.2, 0.1, 0.7, bc);
                for m in [build_h_zz(&p), build_h_xx(&p), build_h_y(&p, 0).0] {
                    assert!(m.antisymmetry_residual() < 1e-12);
                    m.check_disjoint().unwrap();
                }
            }
        }
    }

    #[test]
    fn bond_blocks_square_to_identity() {
        // each bond block [[0, q], [-q, 0]] squares to -q^2 on its own pair
        let p = ModelParams::uniform(5, 0.0, 0.0, 0.0, 0.0, Boundary::Periodic);
        for m in [build_h_zz(&p), build_h_xx(&p), build_h_y(&p, 0).0] {
            let sq = m.entries.dot(&m.entries);
            for b in &m.bonds {
                let expect = -b.coeff * b.coeff;
                assert!((sq[[b.mu, b.mu]] - expect).norm() < 1e-12);
                assert!((sq[[b.nu, b.nu]] - expect).norm() < 1e-12);
                assert!(sq[[b.mu, b.nu]].norm() < 1e-12);
            }
            let off: f64 = sq.indexed_iter().filter(|((i, j), _)| i != j).map(|(_, z)| z.norm()).sum();
            assert!(off < 1e-12);
        }
    }

    #[test]
    fn uniform_fields_are_constant() {
        let p = ModelParams::uniform(4, 0.0, 0.0, 0.0, 0.4, Boundary::Open);
        let (_, f) = build_h_y(&p, 7);
        assert!(f.iter().all(|&h| h == 0.4));
    }

    #[test]
    fn quenched_fields_ignore_step() {
        let p = ModelParams::uniform(6, 0.0, 0.0, 0.0, 0.0, Boundary::Open)
            .with_disorder(DisorderSpec::quenched(1.0, 0.3, 11));
        assert_eq!(p.y_fields(0), p.y_fields(5));
        let q = p.clone();
        assert_eq!(p.y_fields(3), q.y_fields(3));
    }

    #[test]
    fn stochastic_fields_reproducible_and_bounded() {
        let d = DisorderSpec::stochastic(1.2, 0.5, 42);
        let a = d.fields(10, 17).unwrap();
        let b = d.fields(10, 17).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d.fields(10, 18).unwrap());
        for step in 0..200 {
            for h in d.fields(10, step).unwrap() {
                assert!((0.7..=1.7).contains(&h));
            }
        }
    }

    #[test]
    fn json_broadcasts_scalars() {
        let p: ModelParams = serde_json::from_str(
            r#"{"L": 4, "beta": 2.0, "j_xx": 0.2, "j_zz": [0.1, 0.2, 0.3], "h_y": 1.0, "bc": "open",
                "disorder": {"kind": "stochastic", "mean": 1.5, "delta": 0.5, "seed": 3}, "seed": 9}"#,
        )
        .unwrap();
        assert_eq!(p.j_xx, vec![0.2; 3]);
        assert_eq!(p.j_zz, vec![0.1, 0.2, 0.3]);
        assert_eq!(p.j_yy, vec![0.0; 3]);
        assert_eq!(p.h_y, vec![1.0; 4]);
        assert_eq!(p.disorder.kind, DisorderKind::Stochastic);
        let back: ModelParams = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn json_rejects_bad_lengths() {
        let r: std::result::Result<ModelParams, _> =
            serde_json::from_str(r#"{"L": 4, "j_xx": [0.1, 0.2], "bc": "periodic"}"#);
        assert!(r.is_err());
        let r: std::result::Result<ModelParams, _> = serde_json::from_str(r#"{"L": 4, "beta": -1.0}"#);
        assert!(r.is_err());
    }

    #[test]
    fn ordering_interleaves_b_then_a() {
        let o = canonical_ordering(2);
        assert_eq!(o[0], MajoranaLabel { site: 0, kind: MajoranaKind::B });
        assert_eq!(o[1], MajoranaLabel { site: 0, kind: MajoranaKind::A });
        assert_eq!(o[3], MajoranaLabel { site: 1, kind: MajoranaKind::A });
    }
}
