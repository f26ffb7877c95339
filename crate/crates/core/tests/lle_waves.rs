mod common;

use std::f64::consts::PI;

use common::c;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use subharmonic::grids::*;
use subharmonic::lle::*;
use subharmonic::semigroup;

fn turing_params() -> LLEParams {
    let (alpha, rho) = (1.0f64, 1.05f64);
    let forcing = (rho * (1.0 + (alpha - rho) * (alpha - rho))).sqrt();
    LLEParams::new(alpha, -1.0, forcing, 2.0 * PI).unwrap()
}

fn turing_wave(m: usize) -> PeriodicWave {
    let p = turing_params();
    let base = constant_amplitudes(&p).unwrap()[0];
    let guess = seeded_guess(&p, base, 0.3, 1, m).unwrap();
    solve_profile(&p, &guess, NewtonOptions::default()).unwrap()
}

fn random_perturbation(rng: &mut impl Rng, grid: PeriodicGrid) -> PeriodicFunction {
    let pts = grid.points();
    let (a, b, k) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0..4) as f64);
    let k = 2.0 * PI * k / grid.length();
    let values = pts.iter().map(|x| c(a * (k * x).cos() + 0.3, 0.0)).chain(pts.iter().map(|x| c(b * (k * x).sin(), 0.0))).collect();
    PeriodicFunction::new(grid, 2, values).unwrap()
}

#[test]
fn profile_matches_direct_rhs() {
    let wave = turing_wave(64);
    assert!(wave.is_accepted());
    let p = wave.params();
    let psi: Vec<Complex64> = wave.u().iter().zip(wave.v()).map(|(&u, v)| c(u, v)).collect();
    let rhs = common::lle_rhs_direct(p.alpha, p.beta, p.forcing, p.period, &psi);
    let dx = p.period / 64.0;
    assert!(common::l2(&rhs, dx) <= 1e-9 * common::l2(&psi, dx));
    let spread = wave.u().iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - wave.u().iter().fold(f64::INFINITY, |a, &b| a.min(b));
    assert!(spread > 0.1, "collapsed to a constant: {spread}");
}

#[test]
fn zero_guess_reaches_constant_state() {
    let p = LLEParams::new(0.5, 1.0, 0.8, 3.0).unwrap();
    let guess = PeriodicFunction::zeros(PeriodicGrid::new(3.0, 1, 16).unwrap(), 2);
    let wave = solve_profile(&p, &guess, NewtonOptions::default()).unwrap();
    let states = constant_amplitudes(&p).unwrap();
    let psi = c(wave.u()[0], wave.v()[0]);
    assert!(states.iter().any(|s| (s - psi).norm() <= 1e-9));
}

#[test]
fn cubic_expansion_is_exact() {
    let wave = turing_wave(32);
    let grid = *wave.phi().grid();
    let op = linearized_operator(&wave).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    for _ in 0..5 {
        let w = random_perturbation(&mut rng, grid);
        let lhs = profile_residual(wave.params(), &wave.phi().add(&w).unwrap()).unwrap();
        let r0 = profile_residual(wave.params(), wave.phi()).unwrap();
        let rhs = r0.add(&op.apply_periodic(&w).unwrap()).unwrap().add(&evaluate_nonlinearity(&wave, &w).unwrap()).unwrap();
        let err = common::l2_diff(lhs.values(), rhs.values(), grid.spacing());
        assert!(err <= 1e-9 * common::l2(lhs.values(), grid.spacing()).max(1.0), "{err}");
    }
}

#[test]
fn nonlinearity_is_superlinear() {
    let wave = turing_wave(32);
    let grid = *wave.phi().grid();
    let mut rng = rand::rngs::StdRng::seed_from_u64(6);
    let w = random_perturbation(&mut rng, grid);
    let hs = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
    let norms: Vec<f64> = hs
        .iter()
        .map(|&h| common::l2(evaluate_nonlinearity(&wave, &w.scale(c(h, 0.0))).unwrap().values(), grid.spacing()))
        .collect();
    let logs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let lnorms: Vec<f64> = norms.iter().map(|n| n.ln()).collect();
    let slope = (lnorms[0] - lnorms[3]) / (logs[0] - logs[3]);
    assert!((slope - 2.0).abs() <= 0.05, "{slope}");
}

#[test]
fn self_adjoint_block_is_hermitian() {
    let wave = turing_wave(32);
    let l = self_adjoint_part(&wave).unwrap();
    for xi in [0.0, 0.2, -0.4] {
        let b = semigroup::assemble_bloch_block(&l, wave.params().period, xi, 8).unwrap();
        let m = b.matrix();
        assert!((m - m.adjoint()).norm() <= 1e-12 * m.norm());
    }
}

#[test]
fn constant_state_spectrum_matches_dispersion() {
    let p = turing_params();
    let wave = &solve_constant_state(&p, 16).unwrap()[0];
    let psi = c(wave.u()[0], wave.v()[0]);
    let (a, b) = (psi.re, psi.im);
    let rho = psi.norm_sqr();
    for xi in [0.0, 0.13, -0.37] {
        let spec = bloch_spectrum(wave, xi, 4).unwrap();
        let mut expect = Vec::new();
        for l in -4..=4 {
            let k = xi + 2.0 * PI * l as f64 / p.period;
            let lk = p.beta * k * k - p.alpha;
            let l11 = lk + rho + 2.0 * a * a;
            let l12 = 2.0 * a * b;
            let l22 = lk + rho + 2.0 * b * b;
            let m = [[c(-1.0 - l12, 0.0), c(-l22, 0.0)], [c(l11, 0.0), c(-1.0 + l12, 0.0)]];
            expect.extend(common::eig2(m));
        }
        for e in &expect {
            let nearest = spec.iter().map(|s| (s - e).norm()).fold(f64::INFINITY, f64::min);
            assert!(nearest <= 1e-9, "ξ={xi}: {e} missing");
        }
    }
}

#[test]
fn unstable_constant_state_is_flagged() {
    let p = turing_params();
    let wave = &solve_constant_state(&p, 32).unwrap()[0];
    let opts = StabilityOptions { xi_samples: 33, modes: 8, ..Default::default() };
    let v = stability_check(wave, opts).unwrap();
    assert_eq!(v.verdict, Verdict::Unstable);
    assert!(!v.cond1);
}

#[test]
fn spectrum_is_symmetric_in_xi() {
    let wave = turing_wave(32);
    for xi in [0.1, 0.25, 0.45] {
        let a = bloch_spectrum(&wave, xi, 8).unwrap();
        let b = bloch_spectrum(&wave, -xi, 8).unwrap();
        for z in &a {
            let nearest = b.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
            assert!(nearest <= 1e-8, "ξ={xi}: {z}");
        }
    }
}

#[test]
fn derivative_spans_kernel() {
    let wave = turing_wave(64);
    let op = linearized_operator(&wave).unwrap();
    let d = wave.derivative();
    let ad = op.apply_periodic(&d).unwrap();
    let dx = d.grid().spacing();
    assert!(common::l2(ad.values(), dx) <= 1e-8 * common::l2(d.values(), dx));
    let opts = StabilityOptions { xi_samples: 33, modes: 16, ..Default::default() };
    let v = stability_check(&wave, opts).unwrap();
    assert!(v.cond3, "{v:?}");
    assert!(v.cond3_zero_eig_error <= 1e-8);
    assert!(v.cond3_eigenfunction_residual <= 1e-8);
}

#[test]
fn neutral_mode_is_stationary() {
    let wave = turing_wave(64);
    let op = linearized_operator(&wave).unwrap();
    let d = wave.derivative();
    let dx = d.grid().spacing();
    for t in [0.25, 0.5, 1.0] {
        let out = semigroup::evolve_periodic(&op, &d, t, 32).unwrap();
        assert!(common::l2_diff(out.values(), d.values(), dx) <= 1e-6, "t = {t}");
    }
}

#[test]
fn leading_eigenvalues_settle_under_truncation() {
    let wave = turing_wave(64);
    for xi in [0.0, 0.2] {
        let mut a = bloch_spectrum(&wave, xi, 16).unwrap();
        a.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
        let b = bloch_spectrum(&wave, xi, 32).unwrap();
        for z in &a[..10] {
            let nearest = b.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            assert!(nearest <= 1e-8, "ξ={xi}: {z} drifted by {nearest:e}");
        }
    }
}

#[test]
fn verdict_serializes_lowercase() {
    assert_eq!(serde_json::to_string(&Verdict::Inconclusive).unwrap(), "\"inconclusive\"");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constant_root_count_matches_discriminant(alpha in -1.0f64..4.0, forcing in 0.05f64..3.0) {
        let p = LLEParams::new(alpha, 1.0, forcing, 1.0).unwrap();
        let disc = common::cubic_discriminant(1.0, -2.0 * alpha, 1.0 + alpha * alpha, -forcing * forcing);
        prop_assume!(disc.abs() > 1e-6);
        let roots = constant_amplitudes(&p).unwrap();
        prop_assert_eq!(roots.len(), if disc > 0.0 { 3 } else { 1 });
        for psi in roots {
            let lhs = c(1.0, alpha - psi.norm_sqr()) * psi;
            prop_assert!((lhs - forcing).norm() <= 1e-9 * forcing.max(1.0));
        }
    }
}
