use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use nufloquet::edge::{self, KernelOptions, ModeSign, Side};
use nufloquet::exact::{self, DenseState};
use nufloquet::floquet::{self, ClassifyOptions, Phase, PhaseSource, SpectrumOptions};
use nufloquet::gaussian::{self, GaussianEngine};
use nufloquet::linalg::{self, CMat};
use nufloquet::majorana::{self, Boundary, DisorderSpec, MajoranaMatrix, ModelParams};
use nufloquet::ode::{self, OdeOptions};

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Open), Just(Boundary::Periodic), Just(Boundary::Antiperiodic)]
}

fn small_params() -> impl Strategy<Value = ModelParams> {
    (2usize..=6, boundary(), 0.0..1.5f64, -1.0..1.0f64, -1.0..1.0f64, 0.0..PI / 2.0)
        .prop_filter("closed chains need three sites", |(l, bc, ..)| *l >= 3 || *bc == Boundary::Open)
        .prop_map(|(l, bc, beta, jxx, jzz, h)| ModelParams::uniform(l, beta, jxx, jzz, h, bc))
}

fn dense_exp(m: &MajoranaMatrix, scale: C64, weights: &[f64]) -> CMat {
    let mut e = CMat::zeros(m.entries.dim());
    for (b, &w) in m.bonds.iter().zip(weights) {
        e[[b.mu, b.nu]] += scale * w * b.coeff;
        e[[b.nu, b.mu]] -= scale * w * b.coeff;
    }
    linalg::expm(&e)
}

fn sorted(mut v: Vec<C64>) -> Vec<C64> {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v
}

/// Greedy one-to-one matching distance between two multisets.
fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst = 0.0_f64;
    for x in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn builders_are_antisymmetric_with_disjoint_bonds(p in small_params()) {
        let (y, _) = majorana::build_h_y(&p, 0);
        for m in [majorana::build_h_zz(&p), majorana::build_h_xx(&p), y] {
            prop_assert!(m.antisymmetry_residual() < 1e-12);
            prop_assert!(m.check_disjoint().is_ok());
            let sq = m.entries.dot(&m.entries);
            for b in &m.bonds {
                let d = sq[[b.mu, b.mu]];
                prop_assert!((sq[[b.nu, b.nu]] - d).norm() < 1e-12);
                prop_assert!(sq[[b.mu, b.nu]].norm() < 1e-12);
                let outside: f64 = (0..m.dim())
                    .filter(|&k| k != b.mu && k != b.nu)
                    .map(|k| sq[[b.mu, k]].norm())
                    .sum();
                prop_assert!(outside < 1e-12);
            }
        }
    }

    #[test]
    fn quenched_fields_repeat_bit_for_bit(seed in any::<u64>(), mean in -2.0..2.0f64, delta in 0.0..1.0f64) {
        let d = DisorderSpec::quenched(mean, delta, seed);
        let a = d.fields(9, 0).unwrap();
        let b = DisorderSpec::quenched(mean, delta, seed).fields(9, 17).unwrap();
        prop_assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn factor_product_matches_dense_exponentials(p in small_params()) {
        let v = floquet::build_floquet_matrix(&p, 0).unwrap();
        let i = C64::i();
        let nb = p.n_bonds();
        let zz = majorana::build_h_zz(&p);
        let (y, fields) = majorana::build_h_y(&p, 0);
        let dense = dense_exp(&zz, C64::from(p.beta), &vec![1.0; nb])
            .dot(&dense_exp(&zz, -i, &p.j_zz))
            .dot(&dense_exp(&majorana::build_h_xx(&p), -i, &p.j_xx))
            .dot(&dense_exp(&y, -i, &fields));
        prop_assert!(linalg::max_abs(&(&v.entries - &dense)) < 1e-10);
    }

    #[test]
    fn paired_quasi_energies_reproduce_eigenvalues(p in small_params()) {
        let v = floquet::build_floquet_matrix(&p, 0).unwrap();
        let spec = floquet::quasi_energies(&v, &SpectrumOptions::default()).unwrap();
        let rebuilt: Vec<C64> = spec
            .pairs
            .iter()
            .flat_map(|e| [(-2.0 * C64::i() * e).exp(), (2.0 * C64::i() * e).exp()])
            .collect();
        let (eig, _) = linalg::eig(&v.entries).unwrap();
        let scale = eig.iter().map(|z| z.norm()).fold(1.0, f64::max);
        prop_assert!(multiset_distance(&sorted(rebuilt), &sorted(eig.to_vec())) < 1e-8 * scale);
    }

    #[test]
    fn closed_uniform_chain_matches_momentum_spectrum(
        l in 3usize..=24, beta in 0.0..2.5f64, h in 0.0..PI / 2.0, anti in any::<bool>()
    ) {
        let bc = if anti { Boundary::Antiperiodic } else { Boundary::Periodic };
        let p = ModelParams::uniform(l, beta, 0.0, 0.0, h, bc);
        let opts = SpectrumOptions { cond_max: f64::INFINITY, ..Default::default() };
        match floquet::quasi_energies(&floquet::build_floquet_matrix(&p, 0).unwrap(), &opts) {
            Ok(spec) => prop_assert!(floquet::analytic_deviation(&spec, beta, h, bc) < 1e-8),
            // exceptional points of the momentum blocks defeat the pairing; not a mismatch
            Err(e) => {
                let pairing = matches!(e, nufloquet::error::Error::PairingFailed { .. });
                prop_assert!(pairing, "{}", e);
            }
        }
    }

    #[test]
    fn transfer_matrix_is_unimodular(beta in 0.01..3.0f64, h in 0.01..(PI / 2.0 - 0.01)) {
        let t = edge::transfer_matrix(beta, h).unwrap();
        let (a, b) = t.eigenvalues();
        let scale = t.entries.iter().flatten().map(|z| z.norm_sqr()).fold(1.0, f64::max);
        prop_assert!((t.det() - 1.0).norm() < 1e-12 * scale);
        prop_assert!((a * b - 1.0).norm() < 1e-12 * scale);
    }

    #[test]
    fn localization_iff_oscillatory_indicator(beta in 0.01..3.0f64, h in 0.01..(PI / 2.0 - 0.01)) {
        let p = floquet::phase_indicator(beta, h);
        prop_assume!((p + 1.0).abs() > 1e-12);
        prop_assert_eq!(edge::lambda_1(beta, h).norm() < 1.0, p < -1.0);
    }

    #[test]
    fn unitary_drive_keeps_isometry(p in small_params(), steps in 1u64..40) {
        let mut q = p.clone();
        q.beta = 0.0;
        let engine = GaussianEngine::new(&q).unwrap();
        let mut s = gaussian::initial_fock_state(&(0..q.l).map(|j| j % 2 == 0).collect::<Vec<_>>()).unwrap();
        let k = gaussian::nambu_propagator(&floquet::build_floquet_matrix(&q, 0).unwrap());
        for _ in 0..steps {
            let (_, ratio) = linalg::orthonormalize(&k.dot(&s.u)).unwrap();
            prop_assert!((ratio - 1.0).abs() < 1e-12);
            s = engine.step(&s).unwrap();
        }
    }

    #[test]
    fn dense_norm_is_one_after_every_step(p in small_params(), seed in any::<u64>()) {
        let mut d = DenseState::from_z_bits(&exact::random_z_bits(p.l, seed)).unwrap();
        for t in 0..10 {
            d = exact::apply_floquet(&d, &p, t).unwrap();
            prop_assert!((d.norm() - 1.0).abs() < 1e-13);
        }
    }
}

#[test]
fn dense_unitary_drive_has_no_norm_drift() {
    let p = ModelParams::uniform(6, 0.0, 0.3, 0.2, 0.7, Boundary::Open).with_j_yy(0.25);
    let mut d = DenseState::from_z_bits(&[true, false, false, true, true, false]).unwrap();
    for t in 0..1000 {
        exact::apply_floquet_raw(&mut d.amps, &p, t, exact::YyPlacement::AfterXx);
    }
    assert!((d.norm() - 1.0).abs() < 1e-13, "{}", d.norm());
}

#[test]
fn many_body_spectrum_is_single_particle_products() {
    for (l, jxx, h) in [(3, 0.0, 0.4), (5, 0.3, 1.2), (6, 0.2, PI / 3.0)] {
        let p = ModelParams::uniform(l, 0.7, jxx, 0.1, h, Boundary::Open);
        let spec = floquet::quasi_energies(&floquet::build_floquet_matrix(&p, 0).unwrap(), &SpectrumOptions::default()).unwrap();
        let mb = exact::spectral_decompose(&p).unwrap();
        let products = exact::free_fermion_products(&spec.pairs);
        let scale = mb.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(exact::multiset_mismatch(&products, &mb.eigenvalues) < 1e-8 * scale, "L = {l}");
    }
}

fn band_excluded(beta: f64, h: f64, l: usize) -> bool {
    let p = floquet::phase_indicator(beta, h);
    let r = edge::lambda_1(beta, h).norm();
    let rho = r.min(1.0 / r);
    (p.abs() - 1.0).abs() < 0.3 || rho.powi(l as i32) > 1e-6
}

#[test]
fn analytic_and_numeric_phases_agree_off_the_boundary_band() {
    let l = 120;
    let mut checked = 0;
    for i in 0..20 {
        for j in 0..20 {
            let beta = 0.1 + 2.4 * i as f64 / 19.0;
            let h = 0.05 + (PI / 2.0 - 0.1) * j as f64 / 19.0;
            if band_excluded(beta, h, l) {
                continue;
            }
            let opts = ClassifyOptions::default();
            let analytic = floquet::classify_phase(beta, h, PhaseSource::Analytic, &opts).unwrap();
            let spectrum = |bc| {
                let p = ModelParams::uniform(l, beta, 0.0, 0.0, h, bc);
                floquet::quasi_energies(&floquet::build_floquet_matrix(&p, 0).unwrap(), &SpectrumOptions::default()).unwrap()
            };
            let (open, closed) = (spectrum(Boundary::Open), spectrum(Boundary::Periodic));
            let numeric = floquet::classify_phase(beta, h, PhaseSource::Numeric { open: &open, bulk: Some(&closed) }, &opts)
                .unwrap_or_else(|e| panic!("β = {beta}, h = {h}: {e}"));
            assert_eq!(numeric.phase, analytic.phase, "β = {beta}, h = {h}");

            let v = floquet::build_floquet_matrix(&ModelParams::uniform(l, beta, 0.0, 0.0, h, Boundary::Open), 0).unwrap();
            let found = edge::floquet_kernel_mode(&v, &open, ModeSign::Anticommuting, Side::Left, &KernelOptions::default()).is_ok();
            assert_eq!(found, analytic.phase == Phase::Oscillatory, "kernel mode at β = {beta}, h = {h}");
            checked += 1;
        }
    }
    assert!(checked > 300, "{checked}");
}

#[test]
fn left_and_right_modes_mirror() {
    let (beta, h, l) = (1.5, 1.2, 40);
    for (a, b) in [
        (edge::analytic_edge_mode(beta, h, l, Side::Left).unwrap(), edge::analytic_edge_mode(beta, h, l, Side::Right).unwrap()),
        {
            let v = floquet::build_floquet_matrix(&ModelParams::uniform(l, beta, 0.0, 0.0, h, Boundary::Open), 0).unwrap();
            let spec = floquet::quasi_energies(&v, &SpectrumOptions::default()).unwrap();
            let k = |side| edge::floquet_kernel_mode(&v, &spec, ModeSign::Anticommuting, side, &KernelOptions::default()).unwrap();
            (k(Side::Left), k(Side::Right))
        },
    ] {
        let (na, nb) = (a.pair_norms(), b.pair_norms());
        for s in 0..l {
            assert!((na[s] - nb[l - 1 - s]).abs() < 1e-8, "site {s}: {} vs {}", na[s], nb[l - 1 - s]);
        }
    }
}

#[test]
fn gaussian_invariants_do_not_drift() {
    let p = ModelParams::uniform(12, 0.8, 0.3, 0.2, 1.1, Boundary::Open);
    let engine = GaussianEngine::new(&p).unwrap();
    let mut s = gaussian::initial_fock_state(&[true, false, true, true, false, false, true, false, false, true, true, false]).unwrap();
    for _ in 0..1000 {
        s = engine.step(&s).unwrap();
        let r = s.invariants();
        assert!(r.max() < 1e-8, "{r:?}");
    }
}

#[test]
fn ode_and_map_agree() {
    for (l, beta, h) in [(4, 0.5, 0.9), (8, 2.0, PI / 3.0)] {
        let p = ModelParams::uniform(l, beta, 0.2, 0.1, h, Boundary::Open);
        let engine = GaussianEngine::new(&p).unwrap();
        let occ: Vec<bool> = (0..l).map(|j| j % 3 == 1).collect();
        let mut a = gaussian::initial_fock_state(&occ).unwrap();
        let mut b = a.clone();
        for _ in 0..20 {
            a = engine.step(&a).unwrap();
            b = ode::ode_period(&b, &p, &OdeOptions::default()).unwrap();
            assert!(linalg::max_abs(&(&a.c - &b.c)) < 1e-6);
        }
    }
}

#[test]
fn convergence_rate_is_at_least_the_imaginary_gap() {
    let p = ModelParams::uniform(16, 1.0, 0.0, 0.0, 0.5, Boundary::Open);
    let v = floquet::build_floquet_matrix(&p, 0).unwrap();
    let spec = floquet::quasi_energies(&v, &SpectrumOptions::default()).unwrap();
    let gap = spec.bulk_gap();
    let ss = gaussian::steady_states(&v).unwrap();
    let engine = GaussianEngine::new(&p).unwrap();
    let occ: Vec<bool> = (0..16).map(|j| j % 2 == 0).collect();
    let target = &ss[if gaussian::fock_parity(&occ) > 0 { 0 } else { 1 }];
    let mut s = gaussian::initial_fock_state(&occ).unwrap();
    let (mut t, mut d) = (Vec::new(), Vec::new());
    for n in 1..=12 {
        s = engine.step(&s).unwrap();
        let dist = gaussian::distance(&s, target);
        if dist > 1e-11 {
            t.push(n as f64);
            d.push(dist);
        }
    }
    let fit = nufloquet::fit::log_linear_fit(&t, &d).unwrap();
    assert!(fit.slope <= -2.0 * gap + 0.1, "slope {} gap {gap}", fit.slope);
}

#[test]
fn ode_steady_state_matches_gaussian_steady_state() {
    let p = ModelParams::uniform(6, 0.7, 0.2, 0.0, 0.9, Boundary::Open);
    let v = floquet::build_floquet_matrix(&p, 0).unwrap();
    let ss = gaussian::steady_states(&v).unwrap();
    for s in &ss {
        let next = ode::ode_period(s, &p, &OdeOptions::default()).unwrap();
        assert!(gaussian::distance(&next, s) < 1e-8);
    }
}
