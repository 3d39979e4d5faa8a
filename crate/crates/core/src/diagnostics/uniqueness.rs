//! Same-noise pair runs up to the energy stopping time `τ^(m)`.

use alloc::format;
use alloc::string::ToString;

use crate::basis::{CoeffField, SpectralBasis};
use crate::error::{Result, ZkError};
use crate::integrator::{solve_pair, SolverConfig};
use crate::noise::{NoiseKey, NoiseModel};
use crate::operators::{difference_identity_sides, gradient_norms_sq, GalerkinOperators};

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub m: f64,
    pub delta: f64,
    pub tau_m: f64,
    /// `sup_{t ≤ τ^(m)} |u − v|²`.
    pub sup_diff: f64,
    /// `∫₀^{τ^(m)} γ² dt` with `γ = |u_x| + |v| + |v_x|`.
    pub gamma_integral: f64,
    /// Smallest `c′` with `2|⟨B(u) − B(v), (1+x)R⟩| ≤ |∇R|² + c′ γ² |√(1+x) R|²`
    /// at every step of the run.
    pub fitted_c: f64,
    /// `2 exp(2 c′ Γ + (|c| + 2 c_U²) τ^(m))`.
    pub factor: f64,
    /// `sup_diff / δ²`, or 0 when δ = 0.
    pub ratio: f64,
    pub pass: bool,
}

/// Run `u0` and `u0 + δ φ₁` on the same increments and compare the observed
/// growth of the difference with the Gronwall factor built from the run.
#[allow(clippy::too_many_arguments)]
pub fn uniqueness_experiment(
    basis: &SpectralBasis,
    ops: &GalerkinOperators,
    model: &NoiseModel,
    cfg: &SolverConfig,
    u0: &CoeffField,
    m: f64,
    key: NoiseKey,
    delta: f64,
) -> Result<UniquenessReport> {
    if basis.config().d != 1 {
        return Err(ZkError::Unsupported(
            "pathwise uniqueness is only established for one transverse dimension".to_string(),
        ));
    }
    if !(m > 0.0) {
        return Err(ZkError::validation(format!("energy radius m = {m} must be positive")));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(ZkError::validation(format!("delta = {delta} must be nonnegative")));
    }
    basis.check(u0)?;
    let mut v0 = u0.clone();
    v0.coeffs[0] += delta;
    let dense = SolverConfig {
        record_every: 1,
        ..cfg.clone()
    };
    let (pu, pv) = solve_pair(basis, u0, &v0, &dense, ops, model, key).map_err(|f| f.error)?;

    let dt = dense.dt;
    let mut sup_u = 0.0f64;
    let mut sup_v = 0.0f64;
    let mut int_u = 0.0;
    let mut int_v = 0.0;
    let mut tau_m = pu.times.last().copied().unwrap_or(0.0);
    let mut sup_diff = 0.0f64;
    let mut gamma_integral = 0.0;
    let mut fitted_c = 0.0f64;
    for i in 0..pu.len() {
        let (u, v) = (&pu.fields[i], &pv.fields[i]);
        let (grad_u, ux2) = gradient_norms_sq(basis, &u.coeffs);
        let (grad_v, vx2) = gradient_norms_sq(basis, &v.coeffs);
        sup_u = sup_u.max(dot_self(&u.coeffs));
        sup_v = sup_v.max(dot_self(&v.coeffs));
        if sup_u + int_u + sup_v + int_v > m {
            tau_m = pu.times[i];
            break;
        }
        let r: alloc::vec::Vec<f64> = u.coeffs.iter().zip(&v.coeffs).map(|(a, b)| a - b).collect();
        let r2: f64 = r.iter().map(|x| x * x).sum();
        sup_diff = sup_diff.max(r2);
        let gamma = libm::sqrt(ux2) + v.l2_norm() + libm::sqrt(vx2);
        if r2 > 0.0 {
            let (lhs, _) = difference_identity_sides(basis, u, v)?;
            let (grad_r, _) = gradient_norms_sq(basis, &r);
            let rw = ops.weighted_inner(&r, &r);
            if gamma > 0.0 {
                fitted_c = fitted_c.max((2.0 * lhs.abs() - grad_r).max(0.0) / (gamma * gamma * rw));
            }
        }
        if i + 1 < pu.len() {
            gamma_integral += dt * gamma * gamma;
            int_u += dt * grad_u;
            int_v += dt * grad_v;
        }
    }

    let cu = model.declared_cu;
    let factor = 2.0 * libm::exp(2.0 * fitted_c * gamma_integral + (cfg.c.abs() + 2.0 * cu * cu) * tau_m);
    let floor = 1e-10 * (1.0 + u0.l2_norm());
    let (ratio, pass) = if delta == 0.0 {
        (0.0, libm::sqrt(sup_diff) <= floor)
    } else {
        let ratio = sup_diff / (delta * delta);
        (ratio, ratio <= factor)
    };
    Ok(UniquenessReport {
        m,
        delta,
        tau_m,
        sup_diff,
        gamma_integral,
        fitted_c,
        factor,
        ratio,
        pass,
    })
}

fn dot_self(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}
