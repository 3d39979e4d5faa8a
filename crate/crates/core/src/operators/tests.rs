use super::*;
use crate::basis::{DomainConfig, TraceKind, TransverseBc};
use alloc::vec::Vec;

fn setup(bc: TransverseBc) -> (SpectralBasis, GalerkinOperators) {
    let b = SpectralBasis::build(DomainConfig::new(1, 16, 16, bc)).unwrap();
    let ops = GalerkinOperators::assemble(&b, 0.0);
    (b, ops)
}

fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0xdead_beef;
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

fn field(b: &SpectralBasis, seed: u64) -> CoeffField {
    CoeffField::from_coeffs(b, pseudo_random(b.len(), seed)).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn a_of_zero_is_zero() {
    let (b, ops) = setup(TransverseBc::Dirichlet);
    let z = CoeffField::zeros(&b);
    assert!(ops.apply_a(&b, &z).unwrap().coeffs.iter().all(|&v| v == 0.0));
}

#[test]
fn a_quadratic_form_is_half_boundary_trace() {
    for bc in [TransverseBc::Dirichlet, TransverseBc::Periodic] {
        let (b, ops) = setup(bc);
        let ops = ops.with_c(0.7);
        for seed in 0..100 {
            let u = field(&b, seed);
            let form = dot(&u.coeffs, &ops.apply_a(&b, &u).unwrap().coeffs);
            let tr = b.eval_trace(&u, TraceKind::UxAt0).unwrap().norm;
            let want = 0.5 * tr * tr;
            assert!((form - want).abs() <= 1e-8 * want, "{bc:?} seed {seed}: {form} vs {want}");
            assert!(form >= -1e-10);
        }
    }
}

#[test]
fn c_enters_linearly_through_dx() {
    let (b, ops0) = setup(TransverseBc::Dirichlet);
    let ops1 = ops0.with_c(1.0);
    let direct = GalerkinOperators::assemble(&b, 1.0);
    let u = field(&b, 3);
    let a1 = ops1.apply_a(&b, &u).unwrap().coeffs;
    let a0 = ops0.apply_a(&b, &u).unwrap().coeffs;
    let dx = mat_vec(ops0.dx_matrix(), &u.coeffs);
    let ad = direct.apply_a(&b, &u).unwrap().coeffs;
    let a = ops0.a_matrix();
    for i in 0..b.len() {
        let row_scale: f64 = (0..b.len()).map(|j| (a[(i, j)] * u.coeffs[j]).abs()).sum::<f64>() + dx[i].abs();
        assert!((a1[i] - a0[i] - dx[i]).abs() < 1e-12 * row_scale);
        assert!((a1[i] - ad[i]).abs() < 1e-10 * (1.0 + ad[i].abs()));
    }
}

#[test]
fn b_is_orthogonal_to_its_argument() {
    let (b, ops) = setup(TransverseBc::Dirichlet);
    let grid = b.grid();
    for seed in 0..100 {
        let u = field(&b, seed);
        let bu = ops.apply_b(&b, &u, &u).unwrap();
        let val = dot(&bu.coeffs, &u.coeffs);
        let ug = b.synthesize(&u.coeffs, Deriv::NONE);
        let ux = b.synthesize(&u.coeffs, Deriv::x(1));
        let scale: f64 = ug.iter().zip(&ux).zip(grid.weights()).map(|((a, c), w)| (a * a * c).abs() * w).sum();
        assert!(val.abs() <= 1e-8 * scale, "seed {seed}: {val} vs scale {scale}");
    }
}

#[test]
fn b_with_zero_first_argument() {
    let (b, ops) = setup(TransverseBc::Dirichlet);
    let v = field(&b, 9);
    let out = ops.apply_b(&b, &CoeffField::zeros(&b), &v).unwrap();
    assert!(out.coeffs.iter().all(|&c| c == 0.0));
}

#[test]
fn b_rejects_foreign_basis() {
    let (b, ops) = setup(TransverseBc::Dirichlet);
    let other = SpectralBasis::build(DomainConfig::new(1, 4, 4, TransverseBc::Dirichlet)).unwrap();
    let u = CoeffField::zeros(&other);
    assert!(ops.apply_b(&b, &u, &u).is_err());
    assert!(ops.apply_b(&other, &u, &u).is_err());
}

#[test]
fn l_acts_diagonally() {
    let (b, ops) = setup(TransverseBc::Dirichlet);
    for i in [0, 5, 100] {
        let mut e = vec![0.0; b.len()];
        e[i] = 1.0;
        let l = ops.apply_l(&b, &CoeffField::from_coeffs(&b, e).unwrap()).unwrap();
        for (j, v) in l.coeffs.iter().enumerate() {
            let want = if i == j { b.eigenvalues()[i] } else { 0.0 };
            assert_eq!(*v, want);
        }
    }
    let u = field(&b, 4);
    let scaled = CoeffField::from_coeffs(&b, u.coeffs.iter().map(|c| 2.5 * c).collect()).unwrap();
    let lu = ops.apply_l(&b, &u).unwrap();
    let ls = ops.apply_l(&b, &scaled).unwrap();
    for (a, s) in lu.coeffs.iter().zip(&ls.coeffs) {
        assert!((2.5 * a - s).abs() <= 4.0 * f64::EPSILON * s.abs());
    }
}

#[test]
fn l_quadratic_form_is_second_derivative_energy() {
    let (b, ops) = setup(TransverseBc::Dirichlet);
    let grid = b.grid();
    for seed in 0..20 {
        let u = field(&b, seed);
        let form = dot(&ops.apply_l(&b, &u).unwrap().coeffs, &u.coeffs);
        let uxx = b.synthesize(&u.coeffs, Deriv::x(2));
        let uyy = b.synthesize(&u.coeffs, Deriv::y(2));
        let energy = grid.inner(&uxx, &uxx) + grid.inner(&uyy, &uyy);
        assert!((form - energy).abs() <= 1e-6 * energy);
    }
}

#[test]
fn difference_identity_holds() {
    let (b, _) = setup(TransverseBc::Dirichlet);
    let u = field(&b, 1);
    assert_eq!(difference_identity_residual(&b, &u, &u).unwrap(), 0.0);
    for seed in 0..100 {
        let u = field(&b, 2 * seed + 10);
        let v = field(&b, 2 * seed + 11);
        let (lhs, rhs) = difference_identity_sides(&b, &u, &v).unwrap();
        assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(rhs.abs()), "seed {seed}: {lhs} vs {rhs}");
    }
}

#[test]
fn weight_matrix_is_spd() {
    let (_, ops) = setup(TransverseBc::Dirichlet);
    let w = ops.weight_matrix().clone();
    assert!((&w - w.transpose()).amax() < 1e-12);
    assert!(w.cholesky().is_some());
}

#[test]
fn weighted_drift_identity() {
    // 2((1+x)u, N(u)) for the linear part against its integrated-by-parts form.
    for bc in [TransverseBc::Dirichlet, TransverseBc::Periodic] {
        let (b, _) = setup(bc);
        let grid = b.grid();
        for (seed, eps, c) in [(1u64, 0.0, 0.0), (2, 0.1, 0.0), (3, 0.25, 1.3), (4, 0.01, -0.5)] {
            let u = field(&b, seed);
            let zero = vec![0.0; b.len()];
            let n = drift_on_grid(&b, &u.coeffs, eps, c, &zero, false);
            let ug = b.synthesize(&u.coeffs, Deriv::NONE);
            let lhs = 2.0 * grid.weighted_inner(&ug, &n);

            let (grad, ux2) = gradient_norms_sq(&b, &u.coeffs);
            let tr = b.eval_trace(&u, TraceKind::UxAt0).unwrap().norm;
            let uxx = b.synthesize(&u.coeffs, Deriv::x(2));
            let uyy = b.synthesize(&u.coeffs, Deriv::y(2));
            let weighted2 = grid.weighted_inner(&uxx, &uxx) + grid.weighted_inner(&uyy, &uyy);
            let rhs = -grad - 2.0 * ux2 - (1.0 - 2.0 * eps) * tr * tr - 2.0 * eps * weighted2
                + c * grid.inner(&ug, &ug);
            let scale = grad + tr * tr + eps * weighted2;
            assert!((lhs - rhs).abs() <= 1e-6 * scale, "{bc:?} eps {eps}: {lhs} vs {rhs}");
        }
    }
}
