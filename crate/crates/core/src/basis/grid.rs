//! Tensor quadrature grid with sum-factorised synthesis and analysis.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use super::modes::{PerpMode, TransverseBc, XMode};
use super::{DomainConfig, SpectralBasis};
use crate::error::{Result, ZkError};
use crate::quadrature::{gauss_legendre_unit, Rule};

/// Highest derivative order tabulated per direction.
const MAX_ORDER: usize = 4;

/// Mixed partial derivative orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Deriv {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Deriv {
    pub const NONE: Deriv = Deriv { x: 0, y: 0, z: 0 };

    pub const fn x(order: usize) -> Deriv {
        Deriv { x: order, y: 0, z: 0 }
    }

    pub const fn y(order: usize) -> Deriv {
        Deriv { x: 0, y: order, z: 0 }
    }

    pub const fn z(order: usize) -> Deriv {
        Deriv { x: 0, y: 0, z: order }
    }

    pub const fn new(x: usize, y: usize, z: usize) -> Deriv {
        Deriv { x, y, z }
    }
}

/// Boundary traces of x-derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    UxAt0,
    UxAt1,
    UxxAt0,
    UxxAt1,
}

impl TraceKind {
    fn endpoint_and_order(self) -> (usize, usize) {
        match self {
            TraceKind::UxAt0 => (0, 1),
            TraceKind::UxAt1 => (1, 1),
            TraceKind::UxxAt0 => (0, 2),
            TraceKind::UxxAt1 => (1, 2),
        }
    }
}

/// Trace values on the transverse grid plus their L²(transverse) norm.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceProfile {
    pub values: Vec<f64>,
    pub norm: f64,
}

/// Quadrature grid and mode tables.
#[derive(Debug, Clone)]
pub struct Grid {
    n_x: usize,
    n_perp: usize,
    d: usize,
    pub x_rule: Rule,
    pub perp_rule: Rule,
    qz: usize,
    weights: Vec<f64>,
    x_of_point: Vec<f64>,
    /// `x_tab[r][a * qx + q]` = r-th derivative of x-mode a at node q.
    x_tab: Vec<Vec<f64>>,
    p_tab: Vec<Vec<f64>>,
    /// `x_end[e][r][a]`: derivative r of x-mode a at x = e.
    x_end: [Vec<Vec<f64>>; 2],
}

fn perp_rule(bc: TransverseBc, q: usize) -> Rule {
    match bc {
        TransverseBc::Dirichlet => {
            let r = gauss_legendre_unit(q);
            Rule {
                nodes: r.nodes.iter().map(|t| PI * t - FRAC_PI_2).collect(),
                weights: r.weights.iter().map(|w| PI * w).collect(),
            }
        }
        TransverseBc::Periodic => Rule {
            nodes: (0..q).map(|j| PI * j as f64 / q as f64 - FRAC_PI_2).collect(),
            weights: vec![PI / q as f64; q],
        },
    }
}

impl Grid {
    pub(crate) fn new(
        config: &DomainConfig,
        x_modes: &[XMode],
        perp_modes: &[PerpMode],
        quad_x: usize,
        quad_perp: usize,
    ) -> Grid {
        let x_rule = gauss_legendre_unit(quad_x);
        let perp_rule = perp_rule(config.transverse_bc, quad_perp);
        let qz = if config.d == 2 { quad_perp } else { 1 };
        let qy = perp_rule.len();

        let x_tab = (0..=MAX_ORDER)
            .map(|r| {
                x_modes
                    .iter()
                    .flat_map(|m| x_rule.nodes.iter().map(move |&x| m.value(x, r)))
                    .collect()
            })
            .collect();
        let p_tab = (0..=MAX_ORDER)
            .map(|r| {
                perp_modes
                    .iter()
                    .flat_map(|m| perp_rule.nodes.iter().map(move |&y| m.value(y, r)))
                    .collect()
            })
            .collect();
        let endpoint = |e: f64| -> Vec<Vec<f64>> {
            (0..=MAX_ORDER)
                .map(|r| x_modes.iter().map(|m| m.value(e, r)).collect())
                .collect()
        };
        let x_end = [endpoint(0.0), endpoint(1.0)];

        let mut weights = Vec::with_capacity(quad_x * qy * qz);
        let mut x_of_point = Vec::with_capacity(quad_x * qy * qz);
        for (ix, &wx) in x_rule.weights.iter().enumerate() {
            for &wy in &perp_rule.weights {
                for iz in 0..qz {
                    let wz = if config.d == 2 { perp_rule.weights[iz] } else { 1.0 };
                    weights.push(wx * wy * wz);
                    x_of_point.push(x_rule.nodes[ix]);
                }
            }
        }

        Grid {
            n_x: config.n_x,
            n_perp: config.n_perp,
            d: config.d,
            x_rule,
            perp_rule,
            qz,
            weights,
            x_of_point,
            x_tab,
            p_tab,
            x_end,
        }
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Shape `(qx, qy, qz)`; `qz = 1` when d = 1.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.x_rule.len(), self.perp_rule.len(), self.qz)
    }

    /// Full tensor quadrature weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// x coordinate of every grid point.
    pub fn x_of_point(&self) -> &[f64] {
        &self.x_of_point
    }

    /// Transverse quadrature weights of the trace grid (qy·qz entries).
    pub fn trace_weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.perp_rule.len() * self.qz);
        for &wy in &self.perp_rule.weights {
            for iz in 0..self.qz {
                out.push(wy * if self.d == 2 { self.perp_rule.weights[iz] } else { 1.0 });
            }
        }
        out
    }

    /// `∫ f g` by quadrature.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).zip(&self.weights).map(|((a, b), w)| a * b * w).sum()
    }

    /// `∫ (1 + x) f g` by quadrature.
    pub fn weighted_inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter()
            .zip(g)
            .zip(self.weights.iter().zip(&self.x_of_point))
            .map(|((a, b), (w, x))| a * b * w * (1.0 + x))
            .sum()
    }

    /// `∫ f` by quadrature.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// Scatter sorted coefficients into the dense (x, y, z) tensor.
    fn to_tensor(&self, basis: &SpectralBasis, coeffs: &[f64]) -> Vec<f64> {
        basis.slot_to_mode().iter().map(|&i| coeffs[i]).collect()
    }

    /// Contract the transverse directions: returns T[a][qy][qz].
    fn transverse_stage(&self, tensor: &[f64], dy: usize, dz: usize) -> Vec<f64> {
        let (np, qy, qz) = (self.n_perp, self.perp_rule.len(), self.qz);
        let nz = if self.d == 2 { np } else { 1 };
        // z stage: T1[a][iy][qz]
        let t1 = if self.d == 2 {
            let pz = &self.p_tab[dz];
            let mut t1 = vec![0.0; self.n_x * np * qz];
            for a in 0..self.n_x {
                for iy in 0..np {
                    let src = &tensor[(a * np + iy) * nz..(a * np + iy + 1) * nz];
                    let dst = &mut t1[(a * np + iy) * qz..(a * np + iy + 1) * qz];
                    for (iz, &c) in src.iter().enumerate() {
                        if c == 0.0 {
                            continue;
                        }
                        let row = &pz[iz * qz..(iz + 1) * qz];
                        for (d, r) in dst.iter_mut().zip(row) {
                            *d += c * r;
                        }
                    }
                }
            }
            t1
        } else if dz == 0 {
            tensor.to_vec()
        } else {
            return vec![0.0; self.n_x * qy * qz];
        };
        // y stage: T2[a][qy][qz]
        let py = &self.p_tab[dy];
        let mut t2 = vec![0.0; self.n_x * qy * qz];
        for a in 0..self.n_x {
            for iy in 0..np {
                let src = &t1[(a * np + iy) * qz..(a * np + iy + 1) * qz];
                let row = &py[iy * qy..(iy + 1) * qy];
                for (jy, &p) in row.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let dst = &mut t2[(a * qy + jy) * qz..(a * qy + jy + 1) * qz];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += p * s;
                    }
                }
            }
        }
        t2
    }

    /// Grid values of `∂^deriv u`.
    pub fn synthesize(&self, basis: &SpectralBasis, coeffs: &[f64], deriv: Deriv) -> Vec<f64> {
        assert_eq!(coeffs.len(), basis.len(), "coefficient length mismatch");
        let (qx, qy, qz) = self.shape();
        if deriv.x > MAX_ORDER || deriv.y > MAX_ORDER || deriv.z > MAX_ORDER {
            panic!("derivative order above {MAX_ORDER} is not tabulated");
        }
        let tensor = self.to_tensor(basis, coeffs);
        let t2 = self.transverse_stage(&tensor, deriv.y, deriv.z);
        let plane = qy * qz;
        let xt = &self.x_tab[deriv.x];
        let mut out = vec![0.0; qx * plane];
        for a in 0..self.n_x {
            let src = &t2[a * plane..(a + 1) * plane];
            for (jx, &xv) in xt[a * qx..(a + 1) * qx].iter().enumerate() {
                let dst = &mut out[jx * plane..(jx + 1) * plane];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += xv * s;
                }
            }
        }
        out
    }

    /// Coefficients `c_i = Σ_q w_q φ_i(q) g(q)`.
    pub fn analyze(&self, basis: &SpectralBasis, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.len() {
            return Err(ZkError::Validation(alloc::format!(
                "grid has {} points, got {} values",
                self.len(),
                values.len()
            )));
        }
        let (qx, qy, qz) = self.shape();
        let plane = qy * qz;
        let np = self.n_perp;
        let nz = if self.d == 2 { np } else { 1 };

        // x stage: U[a][qy][qz]
        let xt = &self.x_tab[0];
        let mut u = vec![0.0; self.n_x * plane];
        for jx in 0..qx {
            let src = &values[jx * plane..(jx + 1) * plane];
            let wsrc = &self.weights[jx * plane..(jx + 1) * plane];
            for a in 0..self.n_x {
                let xv = xt[a * qx + jx];
                let dst = &mut u[a * plane..(a + 1) * plane];
                for ((d, s), w) in dst.iter_mut().zip(src).zip(wsrc) {
                    *d += xv * s * w;
                }
            }
        }
        // y stage: V[a][iy][qz]
        let py = &self.p_tab[0];
        let mut v = vec![0.0; self.n_x * np * qz];
        for a in 0..self.n_x {
            for iy in 0..np {
                let row = &py[iy * qy..(iy + 1) * qy];
                let dst = &mut v[(a * np + iy) * qz..(a * np + iy + 1) * qz];
                for (jy, &p) in row.iter().enumerate() {
                    let src = &u[(a * qy + jy) * qz..(a * qy + jy + 1) * qz];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += p * s;
                    }
                }
            }
        }
        // z stage: C[a][iy][iz]
        let tensor = if self.d == 2 {
            let pz = &self.p_tab[0];
            let mut c = vec![0.0; self.n_x * np * nz];
            for a in 0..self.n_x {
                for iy in 0..np {
                    let src = &v[(a * np + iy) * qz..(a * np + iy + 1) * qz];
                    for iz in 0..nz {
                        let row = &pz[iz * qz..(iz + 1) * qz];
                        c[(a * np + iy) * nz + iz] = src.iter().zip(row).map(|(s, r)| s * r).sum();
                    }
                }
            }
            c
        } else {
            v
        };
        let mut coeffs = vec![0.0; basis.len()];
        for (slot, &i) in basis.slot_to_mode().iter().enumerate() {
            coeffs[i] = tensor[slot];
        }
        Ok(coeffs)
    }

    /// Trace of an x-derivative on the transverse grid.
    pub fn trace(&self, basis: &SpectralBasis, coeffs: &[f64], which: TraceKind) -> TraceProfile {
        let (e, r) = which.endpoint_and_order();
        let tensor = self.to_tensor(basis, coeffs);
        let t2 = self.transverse_stage(&tensor, 0, 0);
        let plane = self.perp_rule.len() * self.qz;
        let mut values = vec![0.0; plane];
        for (a, &xv) in self.x_end[e][r].iter().enumerate() {
            for (d, s) in values.iter_mut().zip(&t2[a * plane..(a + 1) * plane]) {
                *d += xv * s;
            }
        }
        let tw = self.trace_weights();
        let norm = libm::sqrt(values.iter().zip(&tw).map(|(v, w)| v * v * w).sum());
        TraceProfile { values, norm }
    }

    /// Endpoint derivative value of x-mode `a`; `at_one` selects x = 1.
    pub fn x_endpoint(&self, a: usize, order: usize, at_one: bool) -> f64 {
        self.x_end[at_one as usize][order][a]
    }
}
