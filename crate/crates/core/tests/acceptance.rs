//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use nufloquet::edge::{self, KernelOptions, ModeSign, Side};
use nufloquet::exact::{self, DenseState, YyPlacement};
use nufloquet::fit;
use nufloquet::floquet::{self, Phase, SpectrumOptions};
use nufloquet::gaussian::{self, GaussianEngine, ModeSelection};
use nufloquet::harness::{self, VerifyTask};
use nufloquet::hp;
use nufloquet::linalg::{self, CMat};
use nufloquet::majorana::{Boundary, DisorderSpec, ModelParams};
use nufloquet::ode::{self, OdeOptions};
use nufloquet::pfaffian::pfaffian;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn spectrum(p: &ModelParams) -> floquet::QuasiSpectrum {
    floquet::quasi_energies(&floquet::build_floquet_matrix(p, 0).unwrap(), &SpectrumOptions::default()).unwrap()
}

fn c1_analytic_spectrum() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for h in [PI / 6.0, PI / 3.0] {
        let p = ModelParams::uniform(500, 2.0, 0.0, 0.0, h, Boundary::Periodic);
        worst = worst.max(floquet::analytic_deviation(&spectrum(&p), 2.0, h, Boundary::Periodic));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(worst < 1e-8 && secs < 30.0, format!("max deviation {worst:.2e} (tol 1e-8), {secs:.1} s (limit 30 s)"))
}

fn c2_gap_closing_locus() -> Verdict {
    let n = 400;
    let step = PI / 2.0 / (n - 1) as f64;
    let hs: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
    let opts = SpectrumOptions { skip_cond: true, ..Default::default() };
    let gaps: Vec<f64> = hs
        .par_iter()
        .map(|&h| {
            let p = ModelParams::uniform(100, 2.0, 0.0, 0.0, h, Boundary::Periodic);
            let s = floquet::quasi_energies(&floquet::build_floquet_matrix(&p, 0).unwrap(), &opts).unwrap();
            s.pairs.iter().map(|e| e.im.abs()).fold(f64::INFINITY, f64::min)
        })
        .collect();
    let dips: Vec<usize> = (0..n).filter(|&i| gaps[i] < 1e-2).collect();
    let outside = dips.iter().filter(|&&i| floquet::phase_indicator(2.0, hs[i]).abs() >= 1.0).count();
    let c4 = 4.0_f64.cosh();
    let (lo, hi) = (0.5 * (1.0 / c4).acos(), 0.5 * (-1.0 / c4).acos());
    let (first, last) = match (dips.first(), dips.last()) {
        (Some(&a), Some(&b)) => (hs[a], hs[b]),
        _ => return verdict(false, "no gap closing found".into()),
    };
    let pass = outside == 0 && (first - lo).abs() <= step && (last - hi).abs() <= step;
    verdict(
        pass,
        format!(
            "{} dips, {outside} outside the band; edges {first:.5}/{last:.5} vs h* {lo:.5}/{hi:.5} (step {step:.5})",
            dips.len()
        ),
    )
}

fn c3_edge_decay() -> Verdict {
    let expected = ((PI / 3.0).tan().recip() * 2.0_f64.tanh().recip()).ln();
    let p = ModelParams::uniform(1000, 2.0, 0.0, 0.0, PI / 3.0, Boundary::Open);
    let v = floquet::build_floquet_matrix(&p, 0).unwrap();
    let opts = SpectrumOptions { skip_cond: true, ..Default::default() };
    let spec = floquet::quasi_energies(&v, &opts).unwrap();
    let mode = edge::floquet_kernel_mode(&v, &spec, ModeSign::Anticommuting, Side::Left, &KernelOptions::default()).unwrap();
    let report = edge::verify_mode(&v, &mode, 1e-8);
    let slope = edge::decay_fit(&mode, 1e-13).unwrap().slope;
    let rel = ((slope - expected) / expected).abs();
    let pass = rel < 0.01 && report.defect < 1e-8 && (expected + 0.5126).abs() < 1e-4;
    verdict(pass, format!("slope {slope:.5} vs {expected:.5} ({:.2}%), defect {:.2e}", 100.0 * rel, report.defect))
}

fn c4_m_scaling() -> Verdict {
    let sizes = [50usize, 100, 200, 400];
    let scan = |h: f64| -> Vec<f64> {
        sizes
            .par_iter()
            .map(|&l| hp::smallest_m_eigenvalue(&ModelParams::uniform(l, 2.0, 0.2, 0.0, h, Boundary::Open)).unwrap().value.norm())
            .collect()
    };
    let topo = scan(PI / 3.0);
    let x: Vec<f64> = sizes.iter().map(|&l| l as f64).collect();
    let fit = fit::log_linear_fit(&x, &topo).unwrap();
    let trivial = scan(PI / 6.0);
    let drop = trivial[0] / trivial.iter().cloned().fold(f64::INFINITY, f64::min);
    let pass = fit.slope < 0.0 && fit.r2 > 0.99 && drop <= 10.0;
    verdict(
        pass,
        format!(
            "π/3: |μ| {:.2e}..{:.2e}, slope {:.4}, R² {:.6}; π/6: largest drop {drop:.2}x",
            topo[0], topo[3], fit.slope, fit.r2
        ),
    )
}

fn c5_finite_size_splitting() -> Verdict {
    let h = 0.862;
    let oscillatory = floquet::classify_analytic(2.0, h) == Phase::Oscillatory;
    let p = ModelParams::uniform(20, 2.0, 0.0, 0.0, h, Boundary::Open);
    let scan = floquet::finite_size_splitting(&p, &[20, 40, 80, 160], &SpectrumOptions::default()).unwrap();
    let v = scan.verdict.unwrap();
    let pass = oscillatory && v.exponential.slope < 0.0 && v.exponential.r2 > 0.99;
    verdict(
        pass,
        format!(
            "h = {h}: splittings {:?}, slope {:.4}, R² {:.6}",
            scan.splitting.iter().map(|s| format!("{s:.2e}")).collect::<Vec<_>>(),
            v.exponential.slope,
            v.exponential.r2
        ),
    )
}

fn c6_oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let p = ModelParams::uniform(6, 2.0, 0.2, 0.0, PI / 3.0, Boundary::Open);
    let (checks, _) = harness::verification_checks(&p, &VerifyTask { steps: 30, tol: 1e-7, ..Default::default() }).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let wanted = ["majorana_correlation", "y", "zz_string", "entropy_half_cut", "steady_state_overlap"];
    let picked: Vec<_> = checks.iter().filter(|c| wanted.contains(&c.name.as_str())).collect();
    let pass = picked.len() == wanted.len() && picked.iter().all(|c| c.pass) && secs < 10.0;
    let worst = picked.iter().map(|c| c.value).fold(0.0, f64::max);
    verdict(pass, format!("worst of {} quantities {worst:.2e} (tol 1e-7), {secs:.2} s (limit 10 s)", picked.len()))
}

fn c7_steady_state() -> Verdict {
    let p = ModelParams::uniform(20, 2.0, 0.2, 0.0, PI / 3.0, Boundary::Open);
    let occ: Vec<bool> = (0..20).map(|j| j % 3 == 0 || j == 1).collect();
    assert_eq!(gaussian::fock_parity(&occ), 1);
    let engine = GaussianEngine::new(&p).unwrap();
    let conv = gaussian::run_until_converged(&engine, gaussian::initial_fock_state(&occ).unwrap(), 10_000, 1e-10, 5).unwrap();
    let ss = harness::steady_state_of(&p, ModeSelection::Parity(1), &SpectrumOptions::default()).unwrap();
    let d = gaussian::distance(&conv.state, &ss);
    verdict(conv.converged && d < 1e-6, format!("converged after {} steps, distance {d:.2e} (tol 1e-6)", conv.steps))
}

fn c8_ode_map() -> Verdict {
    let sign = ode::resolve_cubic_sign(5).unwrap();
    println!("    sign report: {}", serde_json::to_string(&sign).unwrap());
    let p = ModelParams::uniform(8, 2.0, 0.2, 0.0, PI / 3.0, Boundary::Open);
    let engine = GaussianEngine::new(&p).unwrap();
    let occ = [true, false, false, true, true, false, true, false];
    let mut a = gaussian::initial_fock_state(&occ).unwrap();
    let mut b = a.clone();
    let opts = OdeOptions { sign: sign.chosen, ..Default::default() };
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        a = engine.step(&a).unwrap();
        b = ode::ode_period(&b, &p, &opts).unwrap();
        worst = worst.max(linalg::max_abs(&(&a.c - &b.c)));
    }
    verdict(
        worst < 1e-6 && sign.agrees_with_builtin,
        format!("sign {:?}, max |ΔC| {worst:.2e} over 20 steps (tol 1e-6)", sign.chosen),
    )
}

/// `(-1)^t ⟨Z(t)⟩` for `t = 0 … 200` from a random Z-product state.
fn staggered_z(p: &ModelParams, seed: u64) -> Vec<f64> {
    let start = DenseState::from_z_bits(&exact::random_z_bits(p.l, seed)).unwrap();
    let (_, m) = exact::trajectory(start, p, 200, YyPlacement::AfterXx).unwrap();
    m.iter().enumerate().map(|(t, m)| if t % 2 == 0 { m.mean_z() } else { -m.mean_z() }).collect()
}

/// Constant sign and magnitude above half the `t = 20` value on `20 ≤ t ≤ 200`.
fn persistent(z: &[f64]) -> (bool, f64) {
    let ratio = z[20..=200].iter().map(|v| v / z[20]).fold(f64::INFINITY, f64::min);
    (z[20] != 0.0 && ratio > 0.5, ratio)
}

fn c9_oscillations() -> Verdict {
    let seed = 1;
    let base = |h: f64| ModelParams::uniform(10, 0.75, 0.3, 0.0, h, Boundary::Open).with_seed(seed);
    let h_osc = 1.5;
    let h_triv = PI / 10.0;

    let triv = staggered_z(&base(h_triv), seed);
    let flips = (20..200).filter(|&t| triv[t] * triv[t + 1] < 0.0).count();
    // staggered sign flips every step exactly when ⟨Z⟩ itself does not alternate
    let no_alternation = flips as f64 / 180.0 > 0.9 || !persistent(&triv).0;

    let (free, r_free) = persistent(&staggered_z(&base(h_osc), seed));
    let (inter, r_inter) = persistent(&staggered_z(&base(h_osc).with_j_yy(0.3), seed));
    let noisy = base(h_osc).with_j_yy(0.3).with_disorder(DisorderSpec::stochastic(h_osc, 0.5, seed));
    let (stoch, r_stoch) = persistent(&staggered_z(&noisy, seed));

    let part = |ok: bool| if ok { "ok" } else { "FAIL" };
    verdict(
        no_alternation && free && inter && stoch,
        format!(
            "trivial h = π/10 no alternation: {}; free h = {h_osc}: {} (min ratio {r_free:.3}); \
             J_yy = 0.3: {} ({r_inter:.3}); J_yy = 0.3, δ = 0.5: {} ({r_stoch:.3})",
            part(no_alternation),
            part(free),
            part(inter),
            part(stoch)
        ),
    )
}

fn c10_entanglement() -> Verdict {
    let l = 200;
    let cuts: Vec<usize> = (1..l).collect();
    let scan = |beta: f64, selection: ModeSelection| {
        let p = ModelParams::uniform(l, beta, 0.0, 0.0, PI / 3.0, Boundary::Periodic);
        let ss = harness::steady_state_of(&p, selection, &SpectrumOptions::default()).unwrap();
        let s: Vec<f64> = cuts.par_iter().map(|&c| gaussian::entanglement_entropy(&ss, c).unwrap()).collect();
        harness::entropy_scaling(l, &cuts, &s)
    };
    // the gapless chain has an exact zero mode; its occupation is fixed to odd parity
    let gapless = scan(0.2, ModeSelection::Parity(-1));
    let fit = gapless.fit.unwrap();
    let area = scan(2.0, ModeSelection::Auto);
    let pass = fit.slope > 0.0 && fit.r2 > 0.98 && area.spread < 0.05;
    verdict(
        pass,
        format!("β = 0.2: c = {:.4}, R² {:.5}; β = 2: max |S - S(L/2)| {:.2e} (tol 0.05)", fit.slope, fit.r2, area.spread),
    )
}

fn c11_invariants() -> Verdict {
    let p = ModelParams::uniform(16, 2.0, 0.2, 0.1, PI / 3.0, Boundary::Open);
    let engine = GaussianEngine::new(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let occ: Vec<bool> = (0..16).map(|_| rng.random()).collect();
    let mut s = gaussian::initial_fock_state(&occ).unwrap();
    let mut drift = 0.0_f64;
    for _ in 0..1000 {
        s = engine.step(&s).unwrap();
        drift = drift.max(s.invariants().max());
    }

    let mut pf = 0.0_f64;
    for _ in 0..100 {
        let n = 10;
        let mut a = CMat::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                a[[i, j]] = z;
                a[[j, i]] = -z;
            }
        }
        let (p2, det) = (pfaffian(&a).unwrap().powi(2), linalg::det(&a).unwrap());
        pf = pf.max((p2 - det).norm() / det.norm());
    }

    let mut det_t = 0.0_f64;
    for i in 0..20 {
        for j in 0..20 {
            let beta = 0.1 + 2.4 * i as f64 / 19.0;
            let h = (j as f64 + 0.5) / 20.0 * PI / 2.0;
            det_t = det_t.max((edge::transfer_matrix(beta, h).unwrap().det() - 1.0).norm());
        }
    }
    verdict(
        drift < 1e-8 && pf < 1e-10 && det_t < 1e-12,
        format!("Gaussian drift {drift:.2e} (1e-8), Pf² vs det {pf:.2e} (1e-10), |det T - 1| {det_t:.2e} (1e-12)"),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 11] = [
        ("analytic spectrum equality", c1_analytic_spectrum),
        ("gap-closing locus", c2_gap_closing_locus),
        ("edge-mode decay", c3_edge_decay),
        ("M-matrix scaling", c4_m_scaling),
        ("finite-size splitting", c5_finite_size_splitting),
        ("oracle equivalence", c6_oracle_equivalence),
        ("steady-state consistency", c7_steady_state),
        ("ODE/map equivalence", c8_ode_map),
        ("oscillation dynamics", c9_oscillations),
        ("entanglement scaling", c10_entanglement),
        ("invariant suite", c11_invariants),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| verdict(false, format!("panicked: {:?}", e.downcast_ref::<String>().cloned().unwrap_or_default())));
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag} {name}: {} [{:.1} s]", k + 1, v.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
