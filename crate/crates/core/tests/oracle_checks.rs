mod oracles;

use zk_core::basis::{Deriv, TraceKind};
use zk_core::operators::difference_identity_sides;
use zk_core::{CoeffField, DomainConfig, GalerkinOperators, NoiseKey, SpectralBasis, TransverseBc};

fn basis(bc: TransverseBc) -> SpectralBasis {
    SpectralBasis::build(DomainConfig::new(1, 16, 16, bc)).unwrap()
}

fn random_field(b: &SpectralBasis, seed: u64) -> CoeffField {
    let dw = NoiseKey::new(seed, 7).increment(0, b.len(), 1.0).unwrap().dw;
    CoeffField::from_coeffs(b, dw).unwrap()
}

#[test]
fn first_x_eigenvalue_matches_finite_differences() {
    let (lam, _, order) = oracles::fd_first_mode_extrapolated(2000);
    assert!((order - 2.0).abs() < 0.05, "observed order {order}");
    let b = basis(TransverseBc::Dirichlet);
    let got = b.x_eigenvalues()[0];
    println!("lambda_x oracle {lam:.12}, basis {got:.12}");
    assert!((got - lam).abs() <= 1e-6 * lam);
}

#[test]
fn first_mode_trace_matches_finite_differences() {
    let (_, slope, _) = oracles::fd_first_mode_extrapolated(2000);
    let b = basis(TransverseBc::Dirichlet);
    let mut e = CoeffField::zeros(&b);
    e.coeffs[0] = 1.0;
    let norm = b.eval_trace(&e, TraceKind::UxAt0).unwrap().norm;
    println!("trace oracle {slope:.12}, basis {norm:.12}");
    assert!((norm - slope).abs() <= 1e-6 * slope);
}

/// Projection of `f` onto the first `n` modes with quadrature on a grid four
/// times denser than the basis grid.
fn dense_projection(b: &SpectralBasis, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let qx = 4 * b.config().quad_x;
    let qp = 4 * b.config().quad_perp;
    let grid = b.grid_with(qx, qp);
    let (nx, ny, _) = grid.shape();
    let mut out = vec![0.0; b.len()];
    for ix in 0..nx {
        let x = grid.x_rule.nodes[ix];
        for iy in 0..ny {
            let y = grid.perp_rule.nodes[iy];
            let w = grid.x_rule.weights[ix] * grid.perp_rule.weights[iy];
            let fv = f(x, y);
            for (i, o) in out.iter_mut().enumerate() {
                *o += w * fv * b.mode_value(i, x, y, 0.0, Deriv::NONE);
            }
        }
    }
    out
}

#[test]
fn nonlinearity_of_first_mode_matches_dense_projection() {
    for bc in [TransverseBc::Dirichlet, TransverseBc::Periodic] {
        let b = SpectralBasis::build(DomainConfig::new(1, 8, 8, bc)).unwrap();
        let ops = GalerkinOperators::assemble(&b, 0.0);
        let mut e = CoeffField::zeros(&b);
        e.coeffs[0] = 1.0;
        let got = ops.apply_b(&b, &e, &e).unwrap();
        let want = dense_projection(&b, |x, y| {
            b.mode_value(0, x, y, 0.0, Deriv::NONE) * b.mode_value(0, x, y, 0.0, Deriv::x(1))
        });
        let scale = want.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (g, w) in got.coeffs.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-8 * scale, "{bc:?}: {g} vs {w}");
        }
    }
}

#[test]
fn difference_identity_with_zero_second_argument() {
    let b = basis(TransverseBc::Dirichlet);
    let fine = b.grid_with(4 * b.config().quad_x, 4 * b.config().quad_perp);
    let zero = CoeffField::zeros(&b);
    for seed in 0..5 {
        let u = random_field(&b, seed);
        let (lhs, rhs) = difference_identity_sides(&b, &u, &zero).unwrap();
        // Both sides reduce to ∫ (1+x) u² u_x.
        let ug = fine.synthesize(&b, &u.coeffs, Deriv::NONE);
        let ux = fine.synthesize(&b, &u.coeffs, Deriv::x(1));
        let prod: Vec<f64> = ug.iter().zip(&ux).map(|(a, c)| a * a * c).collect();
        let dense = fine.weighted_inner(&prod, &vec![1.0; prod.len()]);
        let abs: Vec<f64> = prod.iter().map(|v| v.abs()).collect();
        let scale = fine.weighted_inner(&abs, &vec![1.0; abs.len()]);
        assert!((lhs - dense).abs() <= 1e-8 * scale, "{lhs} vs {dense}");
        assert!((rhs - dense).abs() <= 1e-8 * scale, "{rhs} vs {dense}");
    }
}

#[test]
fn quadratic_form_of_a_matches_dense_trace() {
    let b = basis(TransverseBc::Dirichlet);
    let ops = GalerkinOperators::assemble(&b, 0.0);
    for seed in 10..20 {
        let u = random_field(&b, seed);
        let au = ops.apply_a(&b, &u).unwrap();
        let form: f64 = au.coeffs.iter().zip(&u.coeffs).map(|(a, c)| a * c).sum();
        // Trace u_x(0, y) by brute-force point evaluation on a dense y rule.
        let n = 400;
        let h = std::f64::consts::PI / n as f64;
        let mut tr2 = 0.0;
        for j in 0..n {
            let y = -std::f64::consts::FRAC_PI_2 + (j as f64 + 0.5) * h;
            let v = b.point_value(&u.coeffs, 0.0, y, 0.0, Deriv::x(1));
            tr2 += h * v * v;
        }
        assert!((form - 0.5 * tr2).abs() <= 1e-8 * tr2, "{form} vs {}", 0.5 * tr2);
    }
}
