//! Galerkin space spanned by tensor-product eigenfunctions of
//! `L = ∂x⁴ + ∂y⁴ (+ ∂z⁴)` under the mixed boundary conditions of the domain
//! `(0, 1) × (−π/2, π/2)^d`.
//!
//! Every mode vanishes on the boundary, has `u_x = 0` at `x = 1`,
//! `u_xx = 0` at `x = 0` and (Dirichlet case) `u_yy = u_zz = 0` on the
//! transverse walls, so any coefficient vector inherits those conditions.

mod grid;
mod modes;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use grid::{Deriv, Grid, TraceKind, TraceProfile};
pub use modes::{PerpKind, PerpMode, TransverseBc, XMode};

use crate::error::{Result, ZkError};

/// Geometry and resolution of the Galerkin space.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainConfig {
    /// Number of transverse directions (1 or 2).
    pub d: usize,
    pub n_x: usize,
    pub n_perp: usize,
    pub quad_x: usize,
    pub quad_perp: usize,
    pub transverse_bc: TransverseBc,
}

impl DomainConfig {
    /// Config with the default quadrature sizes for the given mode counts.
    pub fn new(d: usize, n_x: usize, n_perp: usize, transverse_bc: TransverseBc) -> Self {
        DomainConfig {
            d,
            n_x,
            n_perp,
            quad_x: Self::default_quad_x(n_x),
            quad_perp: Self::default_quad_perp(n_perp),
            transverse_bc,
        }
    }

    /// Enough Gauss points to integrate triple products of x-modes exactly
    /// to rounding.
    pub fn default_quad_x(n_x: usize) -> usize {
        4 * n_x + 24
    }

    pub fn default_quad_perp(n_perp: usize) -> usize {
        3 * n_perp + 24
    }

    pub fn mode_count(&self) -> usize {
        self.n_x * self.n_perp.pow(self.d as u32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d != 1 && self.d != 2 {
            return Err(ZkError::validation(format!("domain.d must be 1 or 2, got {}", self.d)));
        }
        for (name, v) in [
            ("n_x", self.n_x),
            ("n_perp", self.n_perp),
            ("quad_x", self.quad_x),
            ("quad_perp", self.quad_perp),
        ] {
            if v == 0 {
                return Err(ZkError::validation(format!("domain.{name} must be >= 1")));
            }
        }
        if self.quad_x < 2 * self.n_x {
            return Err(ZkError::validation(format!(
                "domain.quad_x = {} violates the dealiasing margin quad_x >= 2 n_x = {}",
                self.quad_x,
                2 * self.n_x
            )));
        }
        if self.quad_perp < 2 * self.n_perp {
            return Err(ZkError::validation(format!(
                "domain.quad_perp = {} violates the dealiasing margin quad_perp >= 2 n_perp = {}",
                self.quad_perp,
                2 * self.n_perp
            )));
        }
        Ok(())
    }

    /// Stable FNV-1a fingerprint used as the basis handle.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let bc = match self.transverse_bc {
            TransverseBc::Dirichlet => 0u64,
            TransverseBc::Periodic => 1,
        };
        for v in [
            self.d as u64,
            self.n_x as u64,
            self.n_perp as u64,
            self.quad_x as u64,
            self.quad_perp as u64,
            bc,
        ] {
            for byte in v.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// Tensor indices of a Galerkin mode: x-mode, y-mode and z-mode (0 when d = 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeIndex {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

/// A solution snapshot in the Galerkin span.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffField {
    pub coeffs: Vec<f64>,
    pub basis_id: u64,
}

impl CoeffField {
    pub fn zeros(basis: &SpectralBasis) -> Self {
        CoeffField {
            coeffs: vec![0.0; basis.len()],
            basis_id: basis.id(),
        }
    }

    pub fn from_coeffs(basis: &SpectralBasis, coeffs: Vec<f64>) -> Result<Self> {
        let field = CoeffField {
            coeffs,
            basis_id: basis.id(),
        };
        basis.check(&field)?;
        Ok(field)
    }

    /// L² norm; the modes are orthonormal so this is the Euclidean norm.
    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.coeffs.iter().map(|c| c * c).sum())
    }
}

/// Eigenbasis, quadrature grid and trace data of the Galerkin space.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    config: DomainConfig,
    id: u64,
    x_modes: Vec<XMode>,
    perp_modes: Vec<PerpMode>,
    modes: Vec<ModeIndex>,
    eigenvalues: Vec<f64>,
    /// Tensor slot `(x * n_perp + y) * nz + z` to sorted mode index.
    slot_to_mode: Vec<usize>,
    grid: Grid,
}

impl SpectralBasis {
    pub fn build(config: DomainConfig) -> Result<Self> {
        config.validate()?;
        let x_modes = modes::x_mode_roots(config.n_x)?;
        let perp_modes = PerpMode::family(config.transverse_bc, config.n_perp);
        let nz = if config.d == 2 { config.n_perp } else { 1 };

        let mut tensor: Vec<(f64, ModeIndex)> = Vec::with_capacity(config.mode_count());
        for (ix, xm) in x_modes.iter().enumerate() {
            for (iy, ym) in perp_modes.iter().enumerate() {
                for (iz, zm) in perp_modes.iter().enumerate().take(nz) {
                    let zq = if config.d == 2 { zm.quartic() } else { 0.0 };
                    let lambda = xm.eigenvalue() + ym.quartic() + zq;
                    tensor.push((lambda, ModeIndex { x: ix, y: iy, z: iz }));
                }
            }
        }
        // Ascending eigenvalue; ties broken lexicographically on (x, y, z).
        tensor.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut slot_to_mode = vec![0; tensor.len()];
        for (i, (_, m)) in tensor.iter().enumerate() {
            slot_to_mode[(m.x * config.n_perp + m.y) * nz + m.z] = i;
        }
        let eigenvalues = tensor.iter().map(|t| t.0).collect();
        let modes = tensor.into_iter().map(|t| t.1).collect();
        let grid = Grid::new(&config, &x_modes, &perp_modes, config.quad_x, config.quad_perp);

        Ok(SpectralBasis {
            id: config.fingerprint(),
            config,
            x_modes,
            perp_modes,
            modes,
            eigenvalues,
            slot_to_mode,
            grid,
        })
    }

    pub fn config(&self) -> &DomainConfig {
        &self.config
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Galerkin dimension n.
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    /// Eigenvalues of L, sorted ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn x_modes(&self) -> &[XMode] {
        &self.x_modes
    }

    pub fn perp_modes(&self) -> &[PerpMode] {
        &self.perp_modes
    }

    /// Eigenvalues of d⁴/dx⁴ under the four x boundary conditions.
    pub fn x_eigenvalues(&self) -> Vec<f64> {
        self.x_modes.iter().map(XMode::eigenvalue).collect()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// A grid on different quadrature sizes sharing this basis' modes.
    pub fn grid_with(&self, quad_x: usize, quad_perp: usize) -> Grid {
        Grid::new(&self.config, &self.x_modes, &self.perp_modes, quad_x, quad_perp)
    }

    pub(crate) fn slot_to_mode(&self) -> &[usize] {
        &self.slot_to_mode
    }

    /// Sum of transverse −∂² eigenvalues of mode `i`.
    pub fn perp_laplace(&self, i: usize) -> f64 {
        let m = self.modes[i];
        let z = if self.config.d == 2 {
            self.perp_modes[m.z].laplace()
        } else {
            0.0
        };
        self.perp_modes[m.y].laplace() + z
    }

    /// Sum of transverse ∂⁴ eigenvalues of mode `i`.
    pub fn perp_quartic(&self, i: usize) -> f64 {
        let m = self.modes[i];
        let z = if self.config.d == 2 {
            self.perp_modes[m.z].quartic()
        } else {
            0.0
        };
        self.perp_modes[m.y].quartic() + z
    }

    /// Value of mode `i` (with mixed derivative `deriv`) at a point.
    pub fn mode_value(&self, i: usize, x: f64, y: f64, z: f64, deriv: Deriv) -> f64 {
        let m = self.modes[i];
        let zv = if self.config.d == 2 {
            self.perp_modes[m.z].value(z, deriv.z)
        } else if deriv.z == 0 {
            1.0
        } else {
            0.0
        };
        self.x_modes[m.x].value(x, deriv.x) * self.perp_modes[m.y].value(y, deriv.y) * zv
    }

    /// Pointwise evaluation by direct summation over modes.
    pub fn point_value(&self, coeffs: &[f64], x: f64, y: f64, z: f64, deriv: Deriv) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| c * self.mode_value(i, x, y, z, deriv))
            .sum()
    }

    pub fn check(&self, field: &CoeffField) -> Result<()> {
        if field.basis_id != self.id {
            return Err(ZkError::validation(format!(
                "field belongs to basis {:#x}, expected {:#x}",
                field.basis_id, self.id
            )));
        }
        self.check_len(&field.coeffs)?;
        if field.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(ZkError::validation("field contains non-finite coefficients"));
        }
        Ok(())
    }

    pub(crate) fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.len() {
            return Err(ZkError::validation(format!(
                "coefficient vector has length {}, basis has {} modes",
                coeffs.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// `[u]₂² = Σ λ_i u_i²`.
    pub fn xi1_norm_sq(&self, coeffs: &[f64]) -> f64 {
        coeffs.iter().zip(&self.eigenvalues).map(|(c, l)| l * c * c).sum()
    }

    /// Grid values of `∂^deriv u` on the basis quadrature grid.
    pub fn synthesize(&self, coeffs: &[f64], deriv: Deriv) -> Vec<f64> {
        self.grid.synthesize(self, coeffs, deriv)
    }

    /// Quadrature projection of grid samples onto the span.
    pub fn analyze(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.grid.analyze(self, values)
    }

    pub fn eval_trace(&self, field: &CoeffField, which: TraceKind) -> Result<TraceProfile> {
        self.check(field)?;
        Ok(self.grid.trace(self, &field.coeffs, which))
    }

    /// Gram matrix of the first `count` modes under the quadrature inner
    /// product, row-major.
    pub fn gram(&self, count: usize) -> Vec<f64> {
        let count = count.min(self.len());
        let tables: Vec<Vec<f64>> = (0..count)
            .map(|i| {
                let mut e = vec![0.0; self.len()];
                e[i] = 1.0;
                self.synthesize(&e, Deriv::NONE)
            })
            .collect();
        let w = self.grid.weights();
        let mut g = vec![0.0; count * count];
        for i in 0..count {
            for j in 0..count {
                g[i * count + j] = tables[i]
                    .iter()
                    .zip(&tables[j])
                    .zip(w)
                    .map(|((a, b), w)| a * b * w)
                    .sum();
            }
        }
        g
    }
}
