//! Galerkin realisations of `A u = Δu_x + c u_x`, `B(u, v) = u v_x` and
//! `L u = u_xxxx + u_yyyy + u_zzzz`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::basis::{CoeffField, Deriv, SpectralBasis};
use crate::error::{Result, ZkError};

/// Assembled operator matrices for one basis and one advection constant.
#[derive(Debug, Clone)]
pub struct GalerkinOperators {
    basis_id: u64,
    c: f64,
    /// `⟨Δφ_j,x + c φ_j,x, φ_i⟩`.
    a_matrix: DMatrix<f64>,
    /// `⟨φ_j,x, φ_i⟩`; A depends on c only through this.
    dx_matrix: DMatrix<f64>,
    l_diag: Vec<f64>,
    /// `⟨(1 + x) φ_j, φ_i⟩`.
    weight_matrix: DMatrix<f64>,
}

impl GalerkinOperators {
    pub fn assemble(basis: &SpectralBasis, c: f64) -> Self {
        let grid = basis.grid();
        let rule = &grid.x_rule;
        let nx = basis.x_modes().len();
        let xm = basis.x_modes();
        // 1D x-integrals; the transverse factors are orthonormal
        // eigenfunctions of ∂² so every matrix is block diagonal in them.
        let mut d1 = vec![0.0; nx * nx];
        let mut d3 = vec![0.0; nx * nx];
        let mut wx = vec![0.0; nx * nx];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let v0: Vec<f64> = xm.iter().map(|m| m.value(x, 0)).collect();
            let v1: Vec<f64> = xm.iter().map(|m| m.value(x, 1)).collect();
            let v3: Vec<f64> = xm.iter().map(|m| m.value(x, 3)).collect();
            for b in 0..nx {
                for a in 0..nx {
                    d1[b * nx + a] += w * v0[b] * v1[a];
                    d3[b * nx + a] += w * v0[b] * v3[a];
                    wx[b * nx + a] += w * (1.0 + x) * v0[b] * v0[a];
                }
            }
        }

        let n = basis.len();
        let modes = basis.modes();
        let mut dispersion = DMatrix::zeros(n, n);
        let mut dx_matrix = DMatrix::zeros(n, n);
        let mut weight_matrix = DMatrix::zeros(n, n);
        for (i, mi) in modes.iter().enumerate() {
            for (j, mj) in modes.iter().enumerate() {
                if mi.y != mj.y || mi.z != mj.z {
                    continue;
                }
                let (b, a) = (mi.x, mj.x);
                let kappa2 = basis.perp_laplace(j);
                dispersion[(i, j)] = d3[b * nx + a] - kappa2 * d1[b * nx + a];
                dx_matrix[(i, j)] = d1[b * nx + a];
                weight_matrix[(i, j)] = wx[b * nx + a];
            }
        }
        let a_matrix = &dispersion + &dx_matrix * c;
        GalerkinOperators {
            basis_id: basis.id(),
            c,
            a_matrix,
            dx_matrix,
            l_diag: basis.eigenvalues().to_vec(),
            weight_matrix,
        }
    }

    /// Same operators with a different advection constant.
    pub fn with_c(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.a_matrix = &self.a_matrix + &self.dx_matrix * (c - self.c);
        out.c = c;
        out
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn basis_id(&self) -> u64 {
        self.basis_id
    }

    pub fn a_matrix(&self) -> &DMatrix<f64> {
        &self.a_matrix
    }

    pub fn dx_matrix(&self) -> &DMatrix<f64> {
        &self.dx_matrix
    }

    pub fn weight_matrix(&self) -> &DMatrix<f64> {
        &self.weight_matrix
    }

    pub fn l_diag(&self) -> &[f64] {
        &self.l_diag
    }

    fn check(&self, basis: &SpectralBasis, u: &CoeffField) -> Result<()> {
        if basis.id() != self.basis_id {
            return Err(ZkError::validation("operators were assembled for a different basis"));
        }
        basis.check(u)
    }

    pub fn apply_a(&self, basis: &SpectralBasis, u: &CoeffField) -> Result<CoeffField> {
        self.check(basis, u)?;
        Ok(CoeffField {
            coeffs: self.a_times(&u.coeffs),
            basis_id: u.basis_id,
        })
    }

    pub(crate) fn a_times(&self, u: &[f64]) -> Vec<f64> {
        mat_vec(&self.a_matrix, u)
    }

    pub fn apply_l(&self, basis: &SpectralBasis, u: &CoeffField) -> Result<CoeffField> {
        self.check(basis, u)?;
        Ok(CoeffField {
            coeffs: u.coeffs.iter().zip(&self.l_diag).map(|(c, l)| c * l).collect(),
            basis_id: u.basis_id,
        })
    }

    /// Pseudospectral `P^n(u v_x)`.
    pub fn apply_b(&self, basis: &SpectralBasis, u: &CoeffField, v: &CoeffField) -> Result<CoeffField> {
        self.check(basis, u)?;
        self.check(basis, v)?;
        Ok(CoeffField {
            coeffs: b_product(basis, &u.coeffs, &v.coeffs),
            basis_id: u.basis_id,
        })
    }

    /// `(1 + x)`-weighted L² inner product of two coefficient vectors.
    pub fn weighted_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let wv = mat_vec(&self.weight_matrix, v);
        u.iter().zip(&wv).map(|(a, b)| a * b).sum()
    }

    pub(crate) fn weight_times(&self, v: &[f64]) -> Vec<f64> {
        mat_vec(&self.weight_matrix, v)
    }
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let out = m * DVector::from_column_slice(v);
    out.as_slice().to_vec()
}

/// Coefficients of `P^n(u v_x)`.
pub(crate) fn b_product(basis: &SpectralBasis, u: &[f64], v: &[f64]) -> Vec<f64> {
    let ug = basis.synthesize(u, Deriv::NONE);
    let vx = basis.synthesize(v, Deriv::x(1));
    let prod: Vec<f64> = ug.iter().zip(&vx).map(|(a, b)| a * b).collect();
    basis.analyze(&prod).expect("grid shape is fixed by the basis")
}

/// Residual of the bilinear difference identity
/// `⟨B(u) − B(v), (1+x)R⟩ = ⟨R², (1+x)u_x − ½(v + (1+x)v_x)⟩`, `R = u − v`,
/// with both sides integrated on the quadrature grid.
///
/// `B(u) − B(v) = R u_x + v R_x`, so this is the orientation in which the
/// identity holds; with `B(v) − B(u)` the left side flips sign.
pub fn difference_identity_residual(basis: &SpectralBasis, u: &CoeffField, v: &CoeffField) -> Result<f64> {
    let (lhs, rhs) = difference_identity_sides(basis, u, v)?;
    Ok((lhs - rhs).abs())
}

/// Both sides of the bilinear difference identity.
pub fn difference_identity_sides(basis: &SpectralBasis, u: &CoeffField, v: &CoeffField) -> Result<(f64, f64)> {
    basis.check(u)?;
    basis.check(v)?;
    let grid = basis.grid();
    let ug = basis.synthesize(&u.coeffs, Deriv::NONE);
    let ux = basis.synthesize(&u.coeffs, Deriv::x(1));
    let vg = basis.synthesize(&v.coeffs, Deriv::NONE);
    let vx = basis.synthesize(&v.coeffs, Deriv::x(1));
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for q in 0..grid.len() {
        let w = grid.weights()[q];
        let x1 = 1.0 + grid.x_of_point()[q];
        let r = ug[q] - vg[q];
        lhs += w * (ug[q] * ux[q] - vg[q] * vx[q]) * x1 * r;
        rhs += w * r * r * (x1 * ux[q] - 0.5 * (vg[q] + x1 * vx[q]));
    }
    Ok((lhs, rhs))
}

/// Grid values of the continuous drift
/// `N(u) = −Δu_x − c u_x − u u_x − ε L u + f`.
pub fn drift_on_grid(
    basis: &SpectralBasis,
    u: &[f64],
    epsilon: f64,
    c: f64,
    forcing: &[f64],
    nonlinear: bool,
) -> Vec<f64> {
    let d2 = basis.config().d == 2;
    let ux = basis.synthesize(u, Deriv::x(1));
    let mut out: Vec<f64> = basis
        .synthesize(u, Deriv::x(3))
        .iter()
        .zip(&basis.synthesize(u, Deriv::new(1, 2, 0)))
        .zip(&ux)
        .map(|((a, b), x)| -(a + b) - c * x)
        .collect();
    if d2 {
        for (o, v) in out.iter_mut().zip(&basis.synthesize(u, Deriv::new(1, 0, 2))) {
            *o -= v;
        }
    }
    if nonlinear {
        for ((o, a), b) in out.iter_mut().zip(&basis.synthesize(u, Deriv::NONE)).zip(&ux) {
            *o -= a * b;
        }
    }
    if epsilon != 0.0 {
        let mut lu: Vec<f64> = basis
            .synthesize(u, Deriv::x(4))
            .iter()
            .zip(&basis.synthesize(u, Deriv::y(4)))
            .map(|(a, b)| a + b)
            .collect();
        if d2 {
            for (o, v) in lu.iter_mut().zip(&basis.synthesize(u, Deriv::z(4))) {
                *o += v;
            }
        }
        for (o, l) in out.iter_mut().zip(&lu) {
            *o -= epsilon * l;
        }
    }
    if forcing.iter().any(|f| *f != 0.0) {
        for (o, f) in out.iter_mut().zip(&basis.synthesize(forcing, Deriv::NONE)) {
            *o += f;
        }
    }
    out
}

/// `|∇u|²` and `|u_x|²` by quadrature.
pub fn gradient_norms_sq(basis: &SpectralBasis, u: &[f64]) -> (f64, f64) {
    let grid = basis.grid();
    let ux = basis.synthesize(u, Deriv::x(1));
    let uy = basis.synthesize(u, Deriv::y(1));
    let ux2 = grid.inner(&ux, &ux);
    let mut grad = ux2 + grid.inner(&uy, &uy);
    if basis.config().d == 2 {
        let uz = basis.synthesize(u, Deriv::z(1));
        grad += grid.inner(&uz, &uz);
    }
    (grad, ux2)
}

#[cfg(test)]
mod tests;
