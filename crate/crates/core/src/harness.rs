//! Reproducible experiment runner behind the `nufloquet` binary.
//!
//! A run is described by a JSON [`RunConfig`]; it writes CSV and JSON
//! artifacts into an output directory together with `manifest.json`.
//! Artifact bodies depend only on the config and seed.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::edge::{self, KernelOptions, ModeSign, Side};
use crate::error::{Error, Result};
use crate::exact::{self, DenseState, YyPlacement};
use crate::fit::{self, LineFit};
use crate::floquet::{self, ClassifyOptions, PhaseSource, SpectrumOptions};
use crate::gaussian::{self, CorrelationState, GaussianEngine, ModeSelection};
use crate::hp;
use crate::linalg::{self, CMat};
use crate::majorana::{Boundary, DisorderKind, ModelParams};
use crate::ode;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Gaussian,
    Exact,
    Both,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelParams,
    #[serde(default)]
    pub engine: Engine,
    #[serde(flatten)]
    pub task: Task,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "task", content = "options", rename_all = "kebab-case")]
pub enum Task {
    Spectrum(SpectrumTask),
    Edge(EdgeTask),
    Dynamics(DynamicsTask),
    PhaseDiagram(PhaseTask),
    Entanglement(EntanglementTask),
    Verify(VerifyTask),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Spectrum(_) => "spectrum",
            Task::Edge(_) => "edge",
            Task::Dynamics(_) => "dynamics",
            Task::PhaseDiagram(_) => "phase-diagram",
            Task::Entanglement(_) => "entanglement",
            Task::Verify(_) => "verify",
        }
    }
}

/// Sweeps of uniform `h_y` and/or `β`; absent lists keep the model value.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumTask {
    pub h_y: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    /// Open-chain sizes for the mid-gap splitting scan.
    pub sizes: Vec<usize>,
    pub tolerances: SpectrumOptions,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMethod {
    Analytic,
    #[default]
    Kernel,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EdgeTask {
    pub method: EdgeMethod,
    pub sign: ModeSign,
    pub side: Side,
    /// Sizes for the smallest-eigenvalue scan of `M`.
    pub m_sizes: Vec<usize>,
    pub defect_tol: Option<f64>,
    /// Relative amplitude below which sites are left out of the decay fit.
    pub decay_floor: f64,
    pub tolerances: SpectrumOptions,
}

impl Default for EdgeTask {
    fn default() -> Self {
        Self {
            method: EdgeMethod::Kernel,
            sign: ModeSign::Anticommuting,
            side: Side::Left,
            m_sizes: Vec::new(),
            defect_tol: None,
            decay_floor: 1e-13,
            tolerances: SpectrumOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// Y-basis occupations; `true` is `⟨Y⟩ = +1`.
    Fock(Vec<bool>),
    /// Z-basis bits; `true` is spin down.
    ZBits(Vec<bool>),
    /// Fair-coin Z bits drawn from the model seed.
    RandomZ,
    Vacuum,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DynamicsTask {
    pub steps: u64,
    pub initial: InitialState,
    #[serde(default)]
    pub yy_placement: YyPlacement,
    /// Entropy cut; defaults to `L/2`.
    #[serde(default)]
    pub cut: Option<usize>,
}

/// Inclusive evenly spaced grid.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.n <= 1 {
            return vec![self.min];
        }
        (0..self.n).map(|i| self.min + (self.max - self.min) * i as f64 / (self.n - 1) as f64).collect()
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMethod {
    #[default]
    Analytic,
    Numeric,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseTask {
    pub beta: Grid,
    pub h_y: Grid,
    #[serde(default)]
    pub method: PhaseMethod,
    #[serde(default)]
    pub classify: ClassifyOptions,
    #[serde(default)]
    pub tolerances: SpectrumOptions,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Occupation {
    #[default]
    Auto,
    Even,
    Odd,
}

impl Occupation {
    fn selection(self) -> ModeSelection {
        match self {
            Occupation::Auto => ModeSelection::Auto,
            Occupation::Even => ModeSelection::Parity(1),
            Occupation::Odd => ModeSelection::Parity(-1),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EntanglementTask {
    /// Subsystem sizes; defaults to `1 … L-1`.
    pub cuts: Option<Vec<usize>>,
    pub occupation: Occupation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyTask {
    pub steps: u64,
    pub tol: f64,
    pub ode_steps: u64,
    pub ode_tol: f64,
}

impl Default for VerifyTask {
    fn default() -> Self {
        Self { steps: 30, tol: 1e-7, ode_steps: 20, ode_tol: 1e-6 }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replaces the model and disorder seeds.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.model.seed = seed;
        self.model.disorder.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let uses_exact = matches!(self.engine, Engine::Exact | Engine::Both);
        let uses_gaussian = matches!(self.engine, Engine::Gaussian | Engine::Both);
        if uses_exact && self.model.l > exact::MAX_SITES {
            return Err(Error::Config(format!("engine exact needs L <= {}, got {}", exact::MAX_SITES, self.model.l)));
        }
        if uses_gaussian && self.model.has_interactions() && !matches!(self.task, Task::Verify(_)) {
            return Err(Error::Config("engine gaussian cannot run with j_yy != 0".into()));
        }
        match &self.task {
            Task::Dynamics(d) => {
                if uses_gaussian && matches!(d.initial, InitialState::ZBits(_) | InitialState::RandomZ) {
                    return Err(Error::Config(
                        "Z-product initial states have no definite parity; use engine exact".into(),
                    ));
                }
                let n = match &d.initial {
                    InitialState::Fock(v) | InitialState::ZBits(v) => Some(v.len()),
                    _ => None,
                };
                if n.is_some_and(|n| n != self.model.l) {
                    return Err(Error::Config(format!("initial state has {} sites, model has {}", n.unwrap(), self.model.l)));
                }
                if d.cut.is_some_and(|c| c == 0 || c >= self.model.l) {
                    return Err(Error::Config("cut must lie in 1..L".into()));
                }
            }
            Task::Entanglement(_) if self.engine != Engine::Gaussian => {
                return Err(Error::Config("entanglement scans use the gaussian engine".into()));
            }
            Task::Verify(_) if self.model.l > exact::MAX_SPECTRAL_SITES => {
                return Err(Error::Config(format!("verify runs at L <= {}", exact::MAX_SPECTRAL_SITES)));
            }
            Task::Verify(_) if self.model.has_interactions() || self.model.disorder.kind == DisorderKind::Stochastic => {
                return Err(Error::Config("verify needs a free, time-independent model".into()));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Output directory writer with temp-and-rename semantics.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir, name, bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    pub fn write_csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }
}

pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(dir.join(name)).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub task: String,
    pub artifacts: Vec<String>,
    pub wall_time_s: f64,
    /// False when a verification check failed.
    pub passed: bool,
}

/// Runs `config`, writing artifacts and `manifest.json` into `out`.
/// `workers = None` uses every available core.
pub fn run(config: &RunConfig, out: &Path, workers: Option<usize>) -> Result<RunSummary> {
    config.validate()?;
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut art = Artifacts::new(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let passed = pool.install(|| dispatch(config, &mut art))?;
    let wall = started.elapsed().as_secs_f64();
    let manifest = json!({
        "name": config.name,
        "task": config.task.name(),
        "config": config,
        "seed": config.model.seed,
        "engine": config.engine,
        "workers": pool.current_num_threads(),
        "version": env!("CARGO_PKG_VERSION"),
        "started_unix": started_unix,
        "wall_time_s": wall,
        "artifacts": art.files(),
        "passed": passed,
    });
    art.write_json("manifest.json", &manifest)?;
    Ok(RunSummary { task: config.task.name().into(), artifacts: art.files().to_vec(), wall_time_s: wall, passed })
}

/// Machine-readable error document.
pub fn error_json(err: &Error) -> serde_json::Value {
    json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": exit_code(err),
    })
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    if err.is_config_error() || matches!(err, Error::Io(_)) {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

fn dispatch(cfg: &RunConfig, art: &mut Artifacts) -> Result<bool> {
    match &cfg.task {
        Task::Spectrum(t) => spectrum_task(cfg, t, art).map(|_| true),
        Task::Edge(t) => edge_task(cfg, t, art).map(|_| true),
        Task::Dynamics(t) => dynamics_task(cfg, t, art).map(|_| true),
        Task::PhaseDiagram(t) => phase_task(cfg, t, art).map(|_| true),
        Task::Entanglement(t) => entanglement_task(cfg, t, art).map(|_| true),
        Task::Verify(t) => verify_task(cfg, t, art),
    }
}

fn with_uniform_field(p: &ModelParams, h: f64) -> ModelParams {
    let mut q = p.clone();
    q.h_y = vec![h; q.l];
    q
}

fn is_free_uniform(p: &ModelParams) -> bool {
    p.is_free_of_xx_zz()
        && !p.has_interactions()
        && p.disorder.kind == DisorderKind::None
        && p.h_y.iter().all(|&h| h == p.h_y[0])
}

#[derive(Serialize)]
struct SpectrumRow {
    pair_index: usize,
    re_eps: f64,
    im_eps: f64,
    is_mid_gap: u8,
    raw_re_m: f64,
    raw_im_m: f64,
}

#[derive(Serialize)]
struct SpectrumSummaryRow {
    file: String,
    beta: f64,
    h_y: f64,
    #[serde(rename = "L")]
    l: usize,
    bulk_gap: f64,
    mid_re: f64,
    mid_im: f64,
    pi_branch_count: usize,
    analytic_deviation: f64,
}

fn spectrum_task(cfg: &RunConfig, t: &SpectrumTask, art: &mut Artifacts) -> Result<()> {
    let betas = t.beta.clone().unwrap_or_else(|| vec![cfg.model.beta]);
    let fields: Vec<Option<f64>> = match &t.h_y {
        Some(v) => v.iter().map(|&h| Some(h)).collect(),
        None => vec![None],
    };
    let points: Vec<(usize, usize, f64, Option<f64>)> = betas
        .iter()
        .enumerate()
        .flat_map(|(ib, &b)| fields.iter().enumerate().map(move |(ih, &h)| (ib, ih, b, h)))
        .collect();
    let results: Vec<(String, Vec<SpectrumRow>, SpectrumSummaryRow)> = points
        .par_iter()
        .map(|&(ib, ih, beta, h)| {
            let mut p = match h {
                Some(h) => with_uniform_field(&cfg.model, h),
                None => cfg.model.clone(),
            };
            p.beta = beta;
            let spec = floquet::quasi_energies(&floquet::build_floquet_matrix(&p, 0)?, &t.tolerances)?;
            let rows = spec
                .pairs
                .iter()
                .enumerate()
                .map(|(k, e)| {
                    let m = spec.raw[spec.members[k].0];
                    SpectrumRow {
                        pair_index: k,
                        re_eps: e.re,
                        im_eps: e.im,
                        is_mid_gap: u8::from(spec.mid_gap == Some(k)),
                        raw_re_m: m.re,
                        raw_im_m: m.im,
                    }
                })
                .collect();
            let analytic = if p.bc.is_closed() && is_free_uniform(&p) {
                floquet::analytic_deviation(&spec, p.beta, p.h_y[0], p.bc)
            } else {
                f64::NAN
            };
            let mid = spec.mid_gap_value();
            let file = format!("spectrum_b{ib:03}_h{ih:03}.csv");
            let summary = SpectrumSummaryRow {
                file: file.clone(),
                beta,
                h_y: p.h_y[0],
                l: p.l,
                bulk_gap: spec.bulk_gap(),
                mid_re: mid.map_or(f64::NAN, |z| z.re),
                mid_im: mid.map_or(f64::NAN, |z| z.im),
                pi_branch_count: spec.pi_branch_count(),
                analytic_deviation: analytic,
            };
            Ok((file, rows, summary))
        })
        .collect::<Result<_>>()?;
    let mut summary = Vec::with_capacity(results.len());
    for (file, rows, s) in results {
        art.write_csv(&file, &rows)?;
        summary.push(s);
    }
    art.write_csv("spectrum_summary.csv", &summary)?;
    if t.sizes.is_empty() {
        return Ok(());
    }
    let scan = floquet::finite_size_splitting(&cfg.model, &t.sizes, &t.tolerances)?;
    let rows: Vec<SplittingRow> = scan.sizes.iter().zip(&scan.splitting).map(|(&l, &s)| SplittingRow { l, min_abs_im: s }).collect();
    art.write_csv("finite_size.csv", &rows)?;
    art.write_json("finite_size_fit.json", &json!({ "verdict": scan.verdict }))
}

#[derive(Serialize)]
struct SplittingRow {
    #[serde(rename = "L")]
    l: usize,
    min_abs_im: f64,
}

#[derive(Serialize)]
struct EdgeRow {
    site: usize,
    re_va: f64,
    im_va: f64,
    re_vb: f64,
    im_vb: f64,
    pair_norm: f64,
}

#[derive(Serialize)]
struct MScalingRow {
    #[serde(rename = "L")]
    l: usize,
    abs_eig_min: f64,
    ln_abs_eig_min: f64,
    route: hp::EigenRoute,
}

fn m_applicable(p: &ModelParams) -> bool {
    p.bc == Boundary::Open && p.j_zz.iter().all(|&j| j == 0.0) && !p.has_interactions()
}

fn edge_task(cfg: &RunConfig, t: &EdgeTask, art: &mut Artifacts) -> Result<()> {
    let p = &cfg.model;
    let v = floquet::build_floquet_matrix(p, 0)?;
    let mode = match t.method {
        EdgeMethod::Analytic => {
            if !is_free_uniform(p) {
                return Err(Error::Config("the analytic mode needs J_xx = J_zz = 0 and a uniform field".into()));
            }
            edge::analytic_edge_mode(p.beta, p.h_y[0], p.l, t.side)?
        }
        EdgeMethod::Kernel => {
            let spec = floquet::quasi_energies(&v, &t.tolerances)?;
            edge::floquet_kernel_mode(&v, &spec, t.sign, t.side, &KernelOptions { defect_tol: t.defect_tol })?
        }
    };
    let rows: Vec<EdgeRow> = (0..p.l)
        .map(|s| {
            let (a, b) = (mode.coeffs[2 * s], mode.coeffs[2 * s + 1]);
            EdgeRow { site: s + 1, re_va: a.re, im_va: a.im, re_vb: b.re, im_vb: b.im, pair_norm: (a.norm_sqr() + b.norm_sqr()).sqrt() }
        })
        .collect();
    art.write_csv("edge_mode.csv", &rows)?;

    let report = edge::verify_mode(&v, &mode, t.defect_tol.unwrap_or(1e-8));
    let fit = edge::decay_fit(&mode, t.decay_floor).ok();
    let slope_analytic = if is_free_uniform(p) { edge::lambda_1(p.beta, p.h_y[0]).norm().ln() } else { f64::NAN };
    let eig_min = if m_applicable(p) { Some(hp::smallest_m_eigenvalue(p)?) } else { None };

    let scaling: Vec<MScalingRow> = t
        .m_sizes
        .par_iter()
        .map(|&l| {
            let q = ModelParams::uniform(l, p.beta, p.j_xx.first().copied().unwrap_or(0.0), 0.0, p.h_y[0], Boundary::Open);
            let e = hp::smallest_m_eigenvalue(&q)?;
            Ok(MScalingRow { l, abs_eig_min: e.value.norm(), ln_abs_eig_min: e.ln_abs, route: e.route })
        })
        .collect::<Result<_>>()?;
    let scaling_fit = if scaling.len() >= 2 {
        let x: Vec<f64> = scaling.iter().map(|r| r.l as f64).collect();
        let y: Vec<f64> = scaling.iter().map(|r| r.ln_abs_eig_min).collect();
        fit::line_fit(&x, &y).ok()
    } else {
        None
    };
    if !scaling.is_empty() {
        art.write_csv("m_scaling.csv", &scaling)?;
    }
    art.write_json(
        "edge_report.json",
        &json!({
            "method": t.method,
            "sign": t.sign,
            "side": t.side,
            "L": p.l,
            "defect": report.defect,
            "defect_ok": report.defect_ok,
            "square": [report.square.re, report.square.im],
            "slope": fit.map(|f| f.slope),
            "slope_r2": fit.map(|f| f.r2),
            "slope_analytic": finite_or_null(slope_analytic),
            "eig_min_of_M": eig_min.map(|e| e.value.norm()),
            "ln_eig_min_of_M": eig_min.map(|e| e.ln_abs),
            "eig_min_route": eig_min.map(|e| e.route),
            "m_scaling_fit": scaling_fit,
        }),
    )
}

fn finite_or_null(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Serialize)]
struct GaussianRow {
    t: u64,
    #[serde(rename = "mean_Y")]
    mean_y: f64,
    #[serde(rename = "bond_ZZ_mean")]
    bond_zz_mean: f64,
    parity: f64,
    entropy_half_cut: f64,
    dist_to_ss1: f64,
    dist_to_ss2: f64,
}

#[derive(Serialize)]
struct ExactRow {
    t: u64,
    #[serde(rename = "mean_Z")]
    mean_z: f64,
    #[serde(rename = "mean_Y")]
    mean_y: f64,
    #[serde(rename = "bond_ZZ_mean")]
    bond_zz_mean: f64,
    parity: f64,
    entropy_half_cut: f64,
    dist_to_ss1: f64,
    dist_to_ss2: f64,
}

fn reference_steady_states(p: &ModelParams) -> Option<[CorrelationState; 2]> {
    if p.has_interactions() || p.disorder.kind == DisorderKind::Stochastic {
        return None;
    }
    gaussian::steady_states(&floquet::build_floquet_matrix(p, 0).ok()?).ok()
}

/// `C = W† C^m W / 4`.
pub fn nambu_correlation(cm: &CMat) -> CMat {
    let w = gaussian::w_matrix(cm.nrows() / 2);
    linalg::adjoint(&w).dot(cm).dot(&w).mapv(|z| z / 4.0)
}

fn dist_c(c: &CMat, ss: &Option<[CorrelationState; 2]>, k: usize) -> f64 {
    ss.as_ref().map_or(f64::NAN, |s| linalg::frobenius(&(c - &s[k].c)))
}

fn dynamics_task(cfg: &RunConfig, t: &DynamicsTask, art: &mut Artifacts) -> Result<()> {
    let p = &cfg.model;
    let cut = t.cut.unwrap_or(p.l / 2);
    let ss = reference_steady_states(p);
    let occupations = match &t.initial {
        InitialState::Fock(v) => Some(v.clone()),
        InitialState::Vacuum => Some(vec![false; p.l]),
        _ => None,
    };
    let mut gauss_rows = Vec::new();
    let mut exact_rows = Vec::new();
    let mut gauss_cm = Vec::new();
    let mut exact_cm = Vec::new();
    if matches!(cfg.engine, Engine::Gaussian | Engine::Both) {
        let engine = GaussianEngine::new(p)?;
        let mut s = gaussian::initial_fock_state(occupations.as_deref().unwrap())?;
        for step in 0..=t.steps {
            if step > 0 {
                s = engine.step(&s)?;
            }
            let o = gaussian::observables(&s)?;
            gauss_rows.push(GaussianRow {
                t: step,
                mean_y: o.mean_y(),
                bond_zz_mean: o.mean_zz(),
                parity: o.parity,
                entropy_half_cut: gaussian::entanglement_entropy(&s, cut)?,
                dist_to_ss1: dist_c(&s.c, &ss, 0),
                dist_to_ss2: dist_c(&s.c, &ss, 1),
            });
            if cfg.engine == Engine::Both {
                gauss_cm.push(s.majorana_correlation());
            }
        }
        art.write_csv(if cfg.engine == Engine::Both { "trajectory_gaussian.csv" } else { "trajectory.csv" }, &gauss_rows)?;
    }
    if matches!(cfg.engine, Engine::Exact | Engine::Both) {
        let mut d = match &t.initial {
            InitialState::Fock(v) => DenseState::from_fock(v)?,
            InitialState::Vacuum => DenseState::from_fock(&vec![false; p.l])?,
            InitialState::ZBits(b) => DenseState::from_z_bits(b)?,
            InitialState::RandomZ => DenseState::from_z_bits(&exact::random_z_bits(p.l, p.seed))?,
        };
        for step in 0..=t.steps {
            if step > 0 {
                d = exact::apply_floquet_with(&d, p, step - 1, t.yy_placement)?;
            }
            let m = exact::measure(&d)?;
            let (d1, d2) = if ss.is_some() {
                let c = nambu_correlation(&exact::majorana_correlation(&d)?);
                (dist_c(&c, &ss, 0), dist_c(&c, &ss, 1))
            } else {
                (f64::NAN, f64::NAN)
            };
            let nb = p.l - 1;
            exact_rows.push(ExactRow {
                t: step,
                mean_z: m.mean_z(),
                mean_y: m.mean_y(),
                bond_zz_mean: (0..nb).map(|j| m.zz[j][j + 1]).sum::<f64>() / nb as f64,
                parity: m.parity,
                entropy_half_cut: exact::entanglement_entropy(&d, cut)?,
                dist_to_ss1: d1,
                dist_to_ss2: d2,
            });
            if cfg.engine == Engine::Both {
                exact_cm.push(exact::majorana_correlation(&d)?);
            }
        }
        art.write_csv(if cfg.engine == Engine::Both { "trajectory_exact.csv" } else { "trajectory.csv" }, &exact_rows)?;
    }
    if cfg.engine == Engine::Both {
        let dev = |f: &dyn Fn(usize) -> f64| (0..gauss_rows.len()).map(f).fold(0.0, f64::max);
        art.write_json(
            "dynamics_comparison.json",
            &json!({
                "mean_Y": dev(&|i| (gauss_rows[i].mean_y - exact_rows[i].mean_y).abs()),
                "bond_ZZ_mean": dev(&|i| (gauss_rows[i].bond_zz_mean - exact_rows[i].bond_zz_mean).abs()),
                "parity": dev(&|i| (gauss_rows[i].parity - exact_rows[i].parity).abs()),
                "entropy_half_cut": dev(&|i| (gauss_rows[i].entropy_half_cut - exact_rows[i].entropy_half_cut).abs()),
                "majorana_correlation": dev(&|i| linalg::max_abs(&(&gauss_cm[i] - &exact_cm[i]))),
            }),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PhaseRow {
    beta: f64,
    h_y: f64,
    #[serde(rename = "L")]
    l: usize,
    label: String,
    im_gap: f64,
    re_splitting: f64,
}

fn phase_task(cfg: &RunConfig, t: &PhaseTask, art: &mut Artifacts) -> Result<()> {
    let p = &cfg.model;
    let points: Vec<(f64, f64)> = t.beta.values().into_iter().flat_map(|b| t.h_y.values().into_iter().map(move |h| (b, h))).collect();
    let rows: Vec<PhaseRow> = points
        .par_iter()
        .map(|&(beta, h)| {
            let report = match t.method {
                PhaseMethod::Analytic => floquet::classify_phase(beta, h, PhaseSource::Analytic, &t.classify),
                PhaseMethod::Numeric => {
                    let jxx = p.j_xx.first().copied().unwrap_or(0.0);
                    let jzz = p.j_zz.first().copied().unwrap_or(0.0);
                    let open = ModelParams::uniform(p.l, beta, jxx, jzz, h, Boundary::Open);
                    let closed = ModelParams::uniform(p.l, beta, jxx, jzz, h, Boundary::Periodic);
                    let so = floquet::quasi_energies(&floquet::build_floquet_matrix(&open, 0)?, &t.tolerances)?;
                    let sc = floquet::quasi_energies(&floquet::build_floquet_matrix(&closed, 0)?, &t.tolerances)?;
                    floquet::classify_phase(beta, h, PhaseSource::Numeric { open: &so, bulk: Some(&sc) }, &t.classify)
                }
            };
            Ok(match report {
                Ok(r) => PhaseRow { beta, h_y: h, l: p.l, label: r.phase.label().into(), im_gap: r.im_gap, re_splitting: r.re_splitting },
                Err(Error::AmbiguousClassification(_)) => {
                    PhaseRow { beta, h_y: h, l: p.l, label: "ambiguous".into(), im_gap: f64::NAN, re_splitting: f64::NAN }
                }
                Err(e) => return Err(e),
            })
        })
        .collect::<Result<_>>()?;
    art.write_csv("phase_diagram.csv", &rows)
}

#[derive(Serialize)]
struct EntropyRow {
    #[serde(rename = "L_A")]
    l_a: usize,
    #[serde(rename = "S")]
    s: f64,
}

/// Steady state of `params` with the given occupation of the mid-gap mode.
pub fn steady_state_of(params: &ModelParams, selection: ModeSelection, tol: &SpectrumOptions) -> Result<CorrelationState> {
    let v = floquet::build_floquet_matrix(params, 0)?;
    let spec = floquet::quasi_energies(&v, tol)?;
    let h = floquet::diagonalize_hamiltonian(&floquet::floquet_hamiltonian(&spec)?)?;
    gaussian::steady_state(&h, selection)
}

/// Fit of `S = a + c·ln sin(π L_A / L)` and the spread of `S` around `S(L/2)`
/// on `L/8 ≤ L_A ≤ 7L/8`.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyScaling {
    pub fit: Option<LineFit>,
    pub spread: f64,
}

pub fn entropy_scaling(l: usize, cuts: &[usize], s: &[f64]) -> EntropyScaling {
    let x: Vec<f64> = cuts.iter().map(|&c| (PI * c as f64 / l as f64).sin().ln()).collect();
    let fit = fit::line_fit(&x, s).ok();
    let mid = cuts.iter().position(|&c| c == l / 2).map(|i| s[i]);
    let spread = match mid {
        Some(m) => cuts
            .iter()
            .zip(s)
            .filter(|(&c, _)| 8 * c >= l && 8 * c <= 7 * l)
            .map(|(_, v)| (v - m).abs())
            .fold(0.0, f64::max),
        None => f64::NAN,
    };
    EntropyScaling { fit, spread }
}

fn entanglement_task(cfg: &RunConfig, t: &EntanglementTask, art: &mut Artifacts) -> Result<()> {
    let p = &cfg.model;
    let state = steady_state_of(p, t.occupation.selection(), &SpectrumOptions::default())?;
    let cuts = t.cuts.clone().unwrap_or_else(|| (1..p.l).collect());
    if let Some(&bad) = cuts.iter().find(|&&c| c == 0 || c >= p.l) {
        return Err(Error::Config(format!("cut {bad} outside 1..L")));
    }
    let s: Vec<f64> = cuts.par_iter().map(|&c| gaussian::entanglement_entropy(&state, c)).collect::<Result<_>>()?;
    let rows: Vec<EntropyRow> = cuts.iter().zip(&s).map(|(&l_a, &s)| EntropyRow { l_a, s }).collect();
    art.write_csv("entropy_scan.csv", &rows)?;
    let scaling = entropy_scaling(p.l, &cuts, &s);
    art.write_json(
        "entanglement_fit.json",
        &json!({
            "L": p.l,
            "a": scaling.fit.map(|f| f.intercept),
            "c": scaling.fit.map(|f| f.slope),
            "r2": scaling.fit.map(|f| f.r2),
            "spread": finite_or_null(scaling.spread),
        }),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn below(name: &str, value: f64, tol: f64) -> Self {
        Self { name: name.into(), value, tol, pass: value <= tol }
    }
}

/// The cross-method suite: every free-fermion path against the dense oracle.
pub fn verification_checks(p: &ModelParams, t: &VerifyTask) -> Result<(Vec<Check>, ode::SignReport)> {
    let mut checks = Vec::new();
    let v = floquet::build_floquet_matrix(p, 0)?;

    let dense_factors = {
        use crate::majorana::{build_h_xx, build_h_y, build_h_zz};
        let i = crate::C64::i();
        let weighted = |m: crate::majorana::MajoranaMatrix, w: &[f64], s: crate::C64| {
            let mut e = CMat::zeros(m.entries.dim());
            for (b, &wb) in m.bonds.iter().zip(w) {
                e[[b.mu, b.nu]] += s * wb * b.coeff;
                e[[b.nu, b.mu]] -= s * wb * b.coeff;
            }
            linalg::expm(&e)
        };
        let (hy, fields) = build_h_y(p, 0);
        let nb = p.n_bonds();
        weighted(build_h_zz(p), &vec![1.0; nb], crate::C64::from(p.beta))
            .dot(&weighted(build_h_zz(p), &p.j_zz, -i))
            .dot(&weighted(build_h_xx(p), &p.j_xx, -i))
            .dot(&weighted(hy, &fields, -i))
    };
    checks.push(Check::below("product_rule", linalg::max_abs(&(&v.entries - &dense_factors)), 1e-10));

    let spec = floquet::quasi_energies(&v, &SpectrumOptions::default())?;
    let mb = exact::spectral_decompose(p)?;
    if p.bc == Boundary::Open {
        let vd = exact::floquet_matrix_from_dense(p)?;
        checks.push(Check::below("floquet_matrix_vs_dense", linalg::max_abs(&(&v.entries - &vd)), 1e-10));
        let mismatch = exact::multiset_mismatch(&exact::free_fermion_products(&spec.pairs), &mb.eigenvalues);
        checks.push(Check::below("many_body_spectrum", mismatch, 1e-8));
    }

    let ss = reference_steady_states(p);
    let ss_dense = match &ss {
        Some(s) => Some([exact::gaussian_state_vector(&s[0].u)?, exact::gaussian_state_vector(&s[1].u)?]),
        None => None,
    };
    let occ: Vec<bool> = (0..p.l).map(|j| j % 3 == 0).collect();
    let engine = GaussianEngine::new(p)?;
    let mut g = gaussian::initial_fock_state(&occ)?;
    let mut d = DenseState::from_fock(&occ)?;
    let mut worst = [0.0_f64; 7];
    let mut inv = 0.0_f64;
    for step in 0..t.steps {
        g = engine.step(&g)?;
        d = exact::apply_floquet(&d, p, step)?;
        let m = exact::measure(&d)?;
        let o = gaussian::observables(&g)?;
        let cm = g.majorana_correlation();
        worst[0] = worst[0].max(linalg::max_abs(&(&cm - &exact::majorana_correlation(&d)?)));
        worst[1] = worst[1].max(o.y.iter().zip(&m.y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        for j in 0..p.l {
            for k in j + 1..p.l {
                let z = gaussian::string_correlator_from(&cm, j, k)?;
                worst[2] = worst[2].max((z - m.zz[j][k]).norm());
            }
        }
        worst[3] = worst[3].max((o.parity - m.parity).abs());
        let cut = p.l / 2;
        worst[4] = worst[4].max((gaussian::entanglement_entropy(&g, cut)? - exact::entanglement_entropy(&d, cut)?).abs());
        if let (Some(s), Some(sd)) = (&ss, &ss_dense) {
            for k in 0..2 {
                let og = gaussian::overlap_magnitude(&g, &s[k])?;
                let od = exact::overlap_magnitude(&sd[k], &d);
                worst[5] = worst[5].max((og - od).abs());
            }
        }
        inv = inv.max(g.invariants().max());
    }
    for (name, w) in ["majorana_correlation", "y", "zz_string", "parity", "entropy_half_cut"].iter().zip(worst) {
        checks.push(Check::below(name, w, t.tol));
    }
    if ss.is_some() {
        checks.push(Check::below("steady_state_overlap", worst[5], t.tol));
    }
    checks.push(Check::below("gaussian_invariants", inv, 1e-8));

    let sign = ode::resolve_cubic_sign(5)?;
    checks.push(Check { name: "ode_sign_builtin".into(), value: sign.minus_error, tol: 1e-6, pass: sign.agrees_with_builtin });
    let mut a = gaussian::initial_fock_state(&occ)?;
    let mut b = a.clone();
    let mut ode_dev = 0.0_f64;
    for _ in 0..t.ode_steps {
        a = engine.step(&a)?;
        b = ode::ode_period(&b, p, &ode::OdeOptions::default())?;
        ode_dev = ode_dev.max(linalg::max_abs(&(&a.c - &b.c)));
    }
    checks.push(Check::below("ode_vs_map", ode_dev, t.ode_tol));
    Ok((checks, sign))
}

fn verify_task(cfg: &RunConfig, t: &VerifyTask, art: &mut Artifacts) -> Result<bool> {
    let (checks, sign) = verification_checks(&cfg.model, t)?;
    let all = checks.iter().all(|c| c.pass);
    art.write_json("verify_summary.json", &json!({ "all_pass": all, "checks": checks, "ode_sign": sign }))?;
    Ok(all)
}
