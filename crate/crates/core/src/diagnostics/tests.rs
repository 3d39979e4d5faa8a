use super::*;
use crate::basis::{CoeffField, DomainConfig, SpectralBasis, TransverseBc};
use crate::error::ZkError;
use crate::integrator::{solve_path, ForcingTerm, SamplePath, SolverConfig};
use crate::noise::{NoiseKey, NoiseModel};
use crate::operators::GalerkinOperators;
use std::vec;
use std::vec::Vec;

fn setup(n: usize) -> (SpectralBasis, GalerkinOperators) {
    let b = SpectralBasis::build(DomainConfig::new(1, n, n, TransverseBc::Dirichlet)).unwrap();
    let ops = GalerkinOperators::assemble(&b, 0.0);
    (b, ops)
}

fn smooth_field(b: &SpectralBasis, amp: f64, seed: u64) -> CoeffField {
    let inc = NoiseKey::new(seed, 4321).increment(0, b.len(), 1.0).unwrap();
    let coeffs = inc
        .dw
        .iter()
        .enumerate()
        .map(|(i, v)| amp * v / (1.0 + b.eigenvalues()[i] / b.eigenvalues()[0]))
        .collect();
    CoeffField::from_coeffs(b, coeffs).unwrap()
}

fn model(b: &SpectralBasis, k: usize) -> NoiseModel {
    let g: Vec<f64> = (1..=k).map(|i| 0.5f64.powi(i as i32)).collect();
    NoiseModel::diagonal(b, g.clone(), g).unwrap()
}

fn run(b: &SpectralBasis, ops: &GalerkinOperators, cfg: &SolverConfig, m: &NoiseModel, u0: &CoeffField) -> SamplePath {
    solve_path(b, u0, cfg, ops, m, NoiseKey::new(11, 0)).unwrap()
}

#[test]
fn ledgers_close_as_bookkeeping() {
    let (b, ops) = setup(6);
    let m = model(&b, 9);
    let mut cfg = SolverConfig::new(1e-3, 0.05);
    cfg.epsilon = 0.05;
    cfg.c = 0.3;
    cfg.forcing.terms.push(ForcingTerm {
        mode: 1,
        amplitude: 0.5,
        omega: 2.0,
    });
    let p = run(&b, &ops, &cfg, &m, &smooth_field(&b, 1.0, 1));
    for ledger in [
        energy_budget(&b, &p, &ops, &m).unwrap(),
        weighted_energy_budget(&b, &p, &ops, &m).unwrap(),
    ] {
        assert_eq!(ledger.len(), p.len() - 1);
        for i in 0..ledger.len() {
            let sum: f64 = ledger.terms[i].iter().sum::<f64>() + ledger.residual[i];
            let scale: f64 = ledger.terms[i].iter().map(|t| t.abs()).sum::<f64>() + ledger.actual[i].abs();
            assert!((sum - ledger.actual[i]).abs() <= 4.0 * f64::EPSILON * scale);
            assert!(ledger.residual[i].is_finite());
        }
    }
}

#[test]
fn zero_path_gives_zero_ledgers() {
    let (b, ops) = setup(5);
    let m = NoiseModel::diagonal(&b, vec![0.3; 4], vec![0.0; 4]).unwrap();
    let p = run(&b, &ops, &SolverConfig::new(0.01, 0.1), &m, &CoeffField::zeros(&b));
    for ledger in [
        energy_budget(&b, &p, &ops, &m).unwrap(),
        weighted_energy_budget(&b, &p, &ops, &m).unwrap(),
    ] {
        assert!(ledger.actual.iter().all(|&v| v == 0.0));
        assert!(ledger.residual.iter().all(|&v| v == 0.0));
        assert!(ledger.terms.iter().flatten().all(|&v| v == 0.0));
    }
}

#[test]
fn ledger_preconditions() {
    let (b, ops) = setup(5);
    let m = model(&b, 4);
    let mut cfg = SolverConfig::new(0.01, 0.1);
    let mut p = run(&b, &ops, &cfg, &m, &smooth_field(&b, 1.0, 2));
    p.noise = None;
    assert!(matches!(energy_budget(&b, &p, &ops, &m), Err(ZkError::Validation(_))));
    cfg.record_every = 2;
    let sparse = run(&b, &ops, &cfg, &m, &smooth_field(&b, 1.0, 2));
    assert!(weighted_energy_budget(&b, &sparse, &ops, &m).is_err());
    let p = run(&b, &ops, &SolverConfig::new(0.01, 0.1), &m, &smooth_field(&b, 1.0, 2));
    assert!(energy_budget(&b, &p, &ops, &model(&b, 5)).is_err());
}

#[test]
fn linear_budget_residual_is_second_order() {
    let (b, ops) = setup(6);
    let u0 = smooth_field(&b, 1.0, 3);
    let scale = u0.l2_norm().powi(2);
    let mut worst = Vec::new();
    for dt in [4e-4, 2e-4] {
        let mut cfg = SolverConfig::new(dt, 0.02);
        cfg.nonlinear = false;
        cfg.epsilon = 0.01;
        let p = run(&b, &ops, &cfg, &NoiseModel::silent(), &u0);
        let plain = energy_budget(&b, &p, &ops, &NoiseModel::silent()).unwrap();
        let weighted = weighted_energy_budget(&b, &p, &ops, &NoiseModel::silent()).unwrap();
        worst.push((plain.max_abs_residual() / (dt * dt * scale), weighted.max_abs_residual() / (dt * dt * scale)));
    }
    // Normalised by dt², the residual must not grow as dt shrinks.
    assert!(worst[1].0 <= 1.2 * worst[0].0, "{worst:?}");
    assert!(worst[1].1 <= 1.2 * worst[0].1, "{worst:?}");
}

#[test]
fn cubic_term_is_resolved() {
    let (b, _) = setup(8);
    let fine = b.grid_with(4 * b.config().quad_x, 4 * b.config().quad_perp);
    for seed in 0..10 {
        let u = smooth_field(&b, 2.0, seed);
        let coarse = cubic_integral(&b, b.grid(), &u.coeffs);
        let dense = cubic_integral(&b, &fine, &u.coeffs);
        let abs3 = {
            let g = b.synthesize(&u.coeffs, crate::basis::Deriv::NONE);
            b.grid().integrate(&g.iter().map(|v| v.abs().powi(3)).collect::<Vec<_>>())
        };
        assert!((coarse - dense).abs() <= 1e-8 * abs3, "{coarse} vs {dense}");
    }
}

#[test]
fn deterministic_moments_have_zero_width() {
    let (b, ops) = setup(5);
    let p = run(&b, &ops, &SolverConfig::new(0.01, 0.2), &NoiseModel::silent(), &smooth_field(&b, 1.0, 5));
    let r = moment_estimate(&[p.clone(), p.clone(), p.clone()], 6.0).unwrap();
    let sup = p.l2_norms().iter().fold(0.0f64, |a, &n| a.max(n));
    assert!((r.estimate - sup.powi(6)).abs() <= 1e-12 * r.estimate);
    assert_eq!(r.ci_width(), 0.0);
    assert!(moment_estimate(&[], 2.0).is_err());
    assert!(moment_estimate(&[p], 0.0).is_err());
}

#[test]
fn running_moment_is_monotone() {
    let (b, ops) = setup(5);
    let m = model(&b, 6);
    let cfg = SolverConfig::new(0.01, 0.3);
    let norms: Vec<Vec<f64>> = (0..30)
        .map(|j| {
            solve_path(&b, &smooth_field(&b, 1.0, 7), &cfg, &ops, &m, NoiseKey::new(3, j))
                .unwrap()
                .l2_norms()
        })
        .collect();
    let r = running_moments(&norms, 2.0).unwrap();
    for w in r.windows(2) {
        assert!(w[1].estimate >= w[0].estimate);
    }
}

#[test]
fn moment_bound_fit_is_tight() {
    let times: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
    let bound = MomentBound::new(2.0, 1.0, &crate::integrator::Forcing::zero(), 4, &times);
    let est: Vec<f64> = times.iter().map(|t| (0.5 * t).exp() * 1.5).collect();
    let c = bound.fit(&est);
    assert!(c > 0.0);
    let slack: Vec<f64> = (0..times.len()).map(|i| bound.value(c, i) - est[i]).collect();
    assert!(slack.iter().all(|&s| s >= 0.0));
    assert!(slack.iter().any(|&s| s < 1e-9));
    let mk = |e: f64| MomentReport {
        p: 2.0,
        estimate: e,
        std_err: 0.0,
        ci_low: e,
        ci_high: e,
        samples: 1,
    };
    let pilot: Vec<MomentReport> = est.iter().map(|&e| mk(e)).collect();
    let high: Vec<MomentReport> = est.iter().map(|&e| mk(2.0 * e)).collect();
    assert!(check_moment_bound(&bound, &pilot, &pilot).unwrap().pass);
    assert!(!check_moment_bound(&bound, &pilot, &high).unwrap().pass);
}

#[test]
fn fractional_norm_trivial_cases() {
    let times: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
    let zero = vec![0.0; 101];
    assert_eq!(fractional_norm_scalar(&times, &zero, 0.3, 2.0).unwrap(), 0.0);
    let h0 = 1.7;
    let constant = vec![h0; 101];
    let v = fractional_norm_scalar(&times, &constant, 0.3, 3.0).unwrap();
    assert!((v - h0).abs() < 1e-12);
    assert!(fractional_norm_scalar(&times, &zero, 1.0, 2.0).is_err());
    assert!(fractional_norm_scalar(&times, &zero, 0.5, 1.5).is_err());
}

#[test]
fn fractional_norm_of_linear_path() {
    // ∫t² + ∬|t−s|^{1/2} = 1/3 + 8/15 on [0, 1].
    let exact = (13.0f64 / 15.0).sqrt();
    let times: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let v = fractional_norm_scalar(&times, &times, 0.25, 2.0).unwrap();
    assert!((v - exact).abs() < 0.01 * exact, "{v} vs {exact}");
}

#[test]
fn fractional_norm_is_a_norm() {
    let times: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
    for seed in 0..10u64 {
        let a = NoiseKey::new(seed, 0).increment(0, 200, 1.0).unwrap().dw;
        let c = NoiseKey::new(seed, 1).increment(0, 200, 1.0).unwrap().dw;
        let fa = fractional_norm_scalar(&times, &a, 0.3, 2.5).unwrap();
        let fc = fractional_norm_scalar(&times, &c, 0.3, 2.5).unwrap();
        let scaled: Vec<f64> = a.iter().map(|v| -3.0 * v).collect();
        let fs = fractional_norm_scalar(&times, &scaled, 0.3, 2.5).unwrap();
        assert!((fs - 3.0 * fa).abs() <= 1e-12 * fs);
        let sum: Vec<f64> = a.iter().zip(&c).map(|(x, y)| x + y).collect();
        let fsum = fractional_norm_scalar(&times, &sum, 0.3, 2.5).unwrap();
        assert!(fsum <= fa + fc + 1e-10);
    }
}

#[test]
fn traces_on_basis_vanish() {
    let (b, ops) = setup(6);
    assert_eq!(boundary_slope(&b, &vec![0.0; b.len()]), 0.0);
    let mut cfg = SolverConfig::new(1e-3, 0.02);
    cfg.record_every = 5;
    let rows = trace_convergence(&b, &ops, &model(&b, 9), &smooth_field(&b, 1.0, 1), &cfg, &[0.25, 0.0625], NoiseKey::new(1, 1))
        .unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!(r.in_basis <= 1e-8);
        assert!(r.off_basis > 0.0 && r.off_basis.is_finite());
    }
    assert!(trace_convergence(&b, &ops, &model(&b, 9), &CoeffField::zeros(&b), &cfg, &[0.1, 0.2], NoiseKey::new(1, 1)).is_err());
}

#[test]
fn uniqueness_identical_data() {
    let (b, ops) = setup(6);
    let cfg = SolverConfig::new(1e-3, 0.05);
    let u0 = smooth_field(&b, 1.0, 2);
    let r = uniqueness_experiment(&b, &ops, &model(&b, 9), &cfg, &u0, 1e6, NoiseKey::new(5, 5), 0.0).unwrap();
    assert_eq!(r.sup_diff, 0.0);
    assert!(r.pass);
    assert!((r.tau_m - 0.05).abs() < 1e-12);
}

#[test]
fn uniqueness_small_radius_stops_early() {
    let (b, ops) = setup(6);
    let cfg = SolverConfig::new(1e-3, 0.05);
    let u0 = smooth_field(&b, 1.0, 2);
    let e0 = 2.0 * u0.l2_norm().powi(2);
    let r = uniqueness_experiment(&b, &ops, &model(&b, 9), &cfg, &u0, 1.05 * e0, NoiseKey::new(5, 5), 1e-6).unwrap();
    assert!(r.tau_m < 0.05);
    let full = uniqueness_experiment(&b, &ops, &model(&b, 9), &cfg, &u0, 1e6, NoiseKey::new(5, 5), 1e-6).unwrap();
    assert!(full.gamma_integral > r.gamma_integral);
    assert!(full.pass, "{full:?}");
}

#[test]
fn uniqueness_rejects_two_transverse_dimensions() {
    let b = SpectralBasis::build(DomainConfig::new(2, 3, 3, TransverseBc::Dirichlet)).unwrap();
    let ops = GalerkinOperators::assemble(&b, 0.0);
    let err = uniqueness_experiment(
        &b,
        &ops,
        &NoiseModel::silent(),
        &SolverConfig::new(0.01, 0.1),
        &CoeffField::zeros(&b),
        1.0,
        NoiseKey::new(0, 0),
        0.0,
    )
    .unwrap_err();
    assert!(matches!(err, ZkError::Unsupported(_)));
}
