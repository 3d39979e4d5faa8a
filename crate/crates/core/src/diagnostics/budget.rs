//! Per-step Itô energy ledgers for `|u|²` and `|√(1+x) u|²`.
//!
//! Every modeled term is evaluated at the left endpoint of the step, so the
//! martingale columns have exactly zero conditional mean.

use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{Deriv, Grid, SpectralBasis, TraceKind};
use crate::error::{Result, ZkError};
use crate::integrator::SamplePath;
use crate::noise::{HsTarget, NoiseModel};
use crate::operators::{b_product, drift_on_grid, gradient_norms_sq, mat_vec, GalerkinOperators};

/// Per-step ledger: `actual[m] = Σ terms[m] + residual[m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    /// Names of the modeled columns, in `terms` order.
    pub columns: Vec<&'static str>,
    /// Left endpoint time of each step.
    pub times: Vec<f64>,
    pub actual: Vec<f64>,
    pub terms: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
}

impl EnergyLedger {
    fn new(columns: &[&'static str]) -> Self {
        EnergyLedger {
            columns: columns.to_vec(),
            times: Vec::new(),
            actual: Vec::new(),
            terms: Vec::new(),
            residual: Vec::new(),
        }
    }

    fn push(&mut self, t: f64, actual: f64, terms: Vec<f64>) {
        let modeled: f64 = terms.iter().sum();
        self.times.push(t);
        self.actual.push(actual);
        self.terms.push(terms);
        self.residual.push(actual - modeled);
    }

    pub fn len(&self) -> usize {
        self.actual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actual.is_empty()
    }

    /// Values of one modeled column, if present.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| *c == name)?;
        Some(self.terms.iter().map(|r| r[j]).collect())
    }

    pub fn mean_abs_residual(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.residual.iter().map(|r| r.abs()).sum::<f64>() / self.len() as f64
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.residual.iter().fold(0.0, |a, r| a.max(r.abs()))
    }

    /// Sum of one column over all steps.
    pub fn total(&self, name: &str) -> Option<f64> {
        self.column(name).map(|c| c.iter().sum())
    }
}

fn check_path(basis: &SpectralBasis, path: &SamplePath, model: &NoiseModel) -> Result<()> {
    if !path.is_dense() {
        return Err(ZkError::validation("energy ledgers need record_every = 1"));
    }
    if path.channels != model.channels() {
        return Err(ZkError::validation("path and noise model disagree on the channel count"));
    }
    if path.channels > 0 && path.noise.is_none() {
        return Err(ZkError::validation("path has no replayable increments"));
    }
    for f in &path.fields {
        basis.check(f)?;
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub const ENERGY_COLUMNS: [&str; 5] = ["boundary", "regularization", "forcing", "ito", "martingale"];

/// Ledger of `d|u|² + (|u_x(0)|² + 2ε[u]₂²) dt = 2(f, u) dt + ‖σ(u)‖² dt + 2(u, σ(u) dW)`.
pub fn energy_budget(
    basis: &SpectralBasis,
    path: &SamplePath,
    ops: &GalerkinOperators,
    model: &NoiseModel,
) -> Result<EnergyLedger> {
    check_path(basis, path, model)?;
    if ops.basis_id() != basis.id() {
        return Err(ZkError::validation("operators belong to a different basis"));
    }
    let cfg = &path.config;
    let dt = cfg.dt;
    let grid = basis.grid();
    let mut ledger = EnergyLedger::new(&ENERGY_COLUMNS);
    for m in 0..path.len().saturating_sub(1) {
        let u = &path.fields[m].coeffs;
        let u1 = &path.fields[m + 1].coeffs;
        let t = path.times[m];
        let inc = path.increment(m as u64)?;
        let tr = grid.trace(basis, u, TraceKind::UxAt0).norm;
        let f = cfg.forcing.at(t, basis.len());
        let mut kick = vec![0.0; u.len()];
        model.add_kick(u, &inc.dw, &mut kick);
        let terms = vec![
            -dt * tr * tr,
            -2.0 * cfg.epsilon * dt * basis.xi1_norm_sq(u),
            2.0 * dt * dot(&f, u),
            dt * model.hs_norm_sq(basis, u, HsTarget::L2),
            2.0 * dot(u, &kick),
        ];
        ledger.push(t, dot(u1, u1) - dot(u, u), terms);
    }
    Ok(ledger)
}

pub const WEIGHTED_COLUMNS: [&str; 10] = [
    "gradient",
    "ux",
    "boundary",
    "regularization",
    "forcing",
    "cubic",
    "advection",
    "projection_defect",
    "ito",
    "martingale",
];

/// `∫ u³` on a given grid.
pub fn cubic_integral(basis: &SpectralBasis, grid: &Grid, u: &[f64]) -> f64 {
    let ug = grid.synthesize(basis, u, Deriv::NONE);
    grid.integrate(&ug.iter().map(|v| v * v * v).collect::<Vec<_>>())
}

/// `∫ (1+x)(u_xx² + u_yy² + u_zz²)` by quadrature.
pub fn weighted_second_derivatives(basis: &SpectralBasis, u: &[f64]) -> f64 {
    let grid = basis.grid();
    let mut s = 0.0;
    let mut derivs = vec![Deriv::x(2), Deriv::y(2)];
    if basis.config().d == 2 {
        derivs.push(Deriv::z(2));
    }
    for d in derivs {
        let g = basis.synthesize(u, d);
        s += grid.weighted_inner(&g, &g);
    }
    s
}

/// Ledger of `d|√(1+x) u|²` against the weighted identity
///
/// ```text
/// 2((1+x)u, N(u)) = −|∇u|² − 2|u_x|² − (1−2ε)|u_x(0)|² − 2ε ∫(1+x)(u_xx² + u_yy² + u_zz²)
///                   + 2(f, (1+x)u) + (2/3)∫u³ + c|u|²
/// ```
///
/// plus the Itô and martingale columns. Since `(1+x)u` is not in the
/// Galerkin span, the discrete drift only sees its projection; the
/// `projection_defect` column carries `2dt[(Wu)·P^n N(u) − ((1+x)u, N(u))]`.
pub fn weighted_energy_budget(
    basis: &SpectralBasis,
    path: &SamplePath,
    ops: &GalerkinOperators,
    model: &NoiseModel,
) -> Result<EnergyLedger> {
    check_path(basis, path, model)?;
    if ops.basis_id() != basis.id() {
        return Err(ZkError::validation("operators belong to a different basis"));
    }
    let cfg = &path.config;
    let (dt, eps, c) = (cfg.dt, cfg.epsilon, cfg.c);
    let grid = basis.grid();
    let n = basis.len();
    let w = ops.weight_matrix();
    let mut ledger = EnergyLedger::new(&WEIGHTED_COLUMNS);
    for m in 0..path.len().saturating_sub(1) {
        let u = &path.fields[m].coeffs;
        let u1 = &path.fields[m + 1].coeffs;
        let t = path.times[m];
        let inc = path.increment(m as u64)?;
        let f = cfg.forcing.at(t, n);
        let wu = ops.weight_times(u);

        let (grad, ux2) = gradient_norms_sq(basis, u);
        let tr = grid.trace(basis, u, TraceKind::UxAt0).norm;
        let ug = basis.synthesize(u, Deriv::NONE);
        let fg = basis.synthesize(&f, Deriv::NONE);
        let cubic = if cfg.nonlinear {
            (2.0 / 3.0) * grid.integrate(&ug.iter().map(|v| v * v * v).collect::<Vec<_>>())
        } else {
            0.0
        };

        // Galerkin drift against its grid counterpart.
        let au = ops.a_times(u);
        let dxu = mat_vec(ops.dx_matrix(), u);
        let bu = if cfg.nonlinear { b_product(basis, u, u) } else { vec![0.0; n] };
        let galerkin: Vec<f64> = (0..n)
            .map(|i| -au[i] - (c - ops.c()) * dxu[i] - eps * ops.l_diag()[i] * u[i] - bu[i] + f[i])
            .collect();
        let drift = drift_on_grid(basis, u, eps, c, &f, cfg.nonlinear);
        let defect = 2.0 * dt * (dot(&wu, &galerkin) - grid.weighted_inner(&ug, &drift));

        let mut kick = vec![0.0; n];
        model.add_kick(u, &inc.dw, &mut kick);
        let terms = vec![
            -dt * grad,
            -2.0 * dt * ux2,
            -(1.0 - 2.0 * eps) * dt * tr * tr,
            if eps != 0.0 { -2.0 * eps * dt * weighted_second_derivatives(basis, u) } else { 0.0 },
            2.0 * dt * grid.weighted_inner(&fg, &ug),
            dt * cubic,
            c * dt * grid.inner(&ug, &ug),
            defect,
            dt * model.weighted_hs_norm_sq(u, |i| w[(i, i)]),
            2.0 * dot(&wu, &kick),
        ];
        let actual = ops.weighted_inner(u1, u1) - ops.weighted_inner(u, u);
        ledger.push(t, actual, terms);
    }
    Ok(ledger)
}
