//! Boundary-trace diagnostics at x = 1.

use alloc::format;
use alloc::vec::Vec;

use crate::basis::{CoeffField, Deriv, SpectralBasis, TraceKind};
use crate::error::{Result, ZkError};
use crate::integrator::{ImexStepper, SolverConfig};
use crate::noise::{NoiseKey, NoiseModel};
use crate::operators::GalerkinOperators;

/// Interpolation nodes used for the off-basis slope.
const SLOPE_NODES: usize = 4;

/// `|u_x(1)|` without using the modes' endpoint derivatives: the last
/// quadrature nodes in x plus the boundary value `u(1) = 0` are interpolated
/// by a polynomial, which is differentiated at x = 1.
pub fn boundary_slope(basis: &SpectralBasis, u: &[f64]) -> f64 {
    let grid = basis.grid();
    let (qx, qy, qz) = grid.shape();
    let plane = qy * qz;
    let q = SLOPE_NODES.min(qx);
    let xs: Vec<f64> = grid.x_rule.nodes[qx - q..].to_vec();
    // ℓ_j'(1) for the interior nodes; the node at x = 1 carries value 0.
    let dl: Vec<f64> = (0..q)
        .map(|j| {
            let mut num = 1.0;
            let mut den = 1.0 - xs[j];
            for k in 0..q {
                if k != j {
                    num *= 1.0 - xs[k];
                    den *= xs[j] - xs[k];
                }
            }
            num / den
        })
        .collect();
    let ug = basis.synthesize(u, Deriv::NONE);
    let tw = grid.trace_weights();
    let mut s = 0.0;
    for p in 0..plane {
        let slope: f64 = (0..q).map(|j| dl[j] * ug[(qx - q + j) * plane + p]).sum();
        s += tw[p] * slope * slope;
    }
    libm::sqrt(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub epsilon: f64,
    pub n: usize,
    /// Time average of the spectral `|u_x(1)|` trace norm.
    pub in_basis: f64,
    /// Time average of [`boundary_slope`].
    pub off_basis: f64,
}

/// Time-averaged x = 1 slopes of `u^ε` for each ε, all runs sharing `key`.
pub fn trace_convergence(
    basis: &SpectralBasis,
    ops: &GalerkinOperators,
    model: &NoiseModel,
    u0: &CoeffField,
    template: &SolverConfig,
    eps_list: &[f64],
    key: NoiseKey,
) -> Result<Vec<TraceRow>> {
    if eps_list.iter().any(|e| !(*e > 0.0)) || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(ZkError::validation("epsilon sequence must be positive and decreasing"));
    }
    eps_list
        .iter()
        .map(|&epsilon| {
            let cfg = SolverConfig {
                epsilon,
                ..template.clone()
            };
            let path = ImexStepper::new(basis, ops, &cfg)?
                .solve_path(u0, model, key)
                .map_err(|f| f.error)?;
            let k = path.len() as f64;
            let mut in_basis = 0.0;
            let mut off_basis = 0.0;
            for f in &path.fields {
                in_basis += basis.eval_trace(f, TraceKind::UxAt1)?.norm;
                off_basis += boundary_slope(basis, &f.coeffs);
            }
            if !(in_basis.is_finite() && off_basis.is_finite()) {
                return Err(ZkError::BlowUp {
                    time: cfg.t_final,
                    reason: format!("non-finite trace at epsilon = {epsilon}"),
                });
            }
            Ok(TraceRow {
                epsilon,
                n: basis.len(),
                in_basis: in_basis / k,
                off_basis: off_basis / k,
            })
        })
        .collect()
}
