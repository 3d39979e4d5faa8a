//! One-dimensional mode families.
//!
//! In x the modes solve `w'''' = λ w` on (0, 1) with `w(0) = w''(0) = 0` and
//! `w(1) = w'(1) = 0`. The cos/cosh components are killed by the conditions
//! at x = 0, leaving `w = sin(βx) - (sin β / sinh β) sinh(βx)` with β a root
//! of `tan β = tanh β` and `λ = β⁴`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Result, ZkError};
use crate::quadrature::gauss_legendre_unit;

/// Boundary treatment in the transverse directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TransverseBc {
    /// `u = u_yy = 0` at `y = ±π/2`.
    Dirichlet,
    /// Period-π in each transverse direction.
    Periodic,
}

/// `k`-th derivative of sin evaluated at `t`.
#[inline]
fn sin_deriv(order: usize, t: f64) -> f64 {
    match order % 4 {
        0 => libm::sin(t),
        1 => libm::cos(t),
        2 => -libm::sin(t),
        _ => -libm::cos(t),
    }
}

/// Normalised x-eigenfunction of the pinned/clamped fourth-order problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XMode {
    pub beta: f64,
    /// `1 / ‖w‖_{L²(0,1)}` for the unnormalised `w`.
    pub scale: f64,
}

impl XMode {
    fn new(beta: f64) -> Self {
        let raw = XMode { beta, scale: 1.0 };
        // Products of two modes have frequency 2β; this rule resolves them to
        // machine precision.
        let rule = gauss_legendre_unit(64 + 2 * libm::ceil(beta) as usize);
        let norm_sq = rule.integrate(|x| {
            let w = raw.value(x, 0);
            w * w
        });
        XMode {
            beta,
            scale: 1.0 / libm::sqrt(norm_sq),
        }
    }

    pub fn eigenvalue(&self) -> f64 {
        let b2 = self.beta * self.beta;
        b2 * b2
    }

    /// Derivative of order `order` (0..=4) at `x`.
    pub fn value(&self, x: f64, order: usize) -> f64 {
        let b = self.beta;
        // sinh(βx)/sinh(β) and cosh(βx)/sinh(β) without overflow.
        let denom = 1.0 - libm::exp(-2.0 * b);
        let ep = libm::exp(b * (x - 1.0));
        let em = libm::exp(-b * (x + 1.0));
        let hyper = if order.is_multiple_of(2) { ep - em } else { ep + em } / denom;
        let trig = sin_deriv(order, b * x);
        self.scale * libm::pow(b, order as f64) * (trig - libm::sin(b) * hyper)
    }
}

/// Residual of the frequency equation, scaled to stay O(1) for large β.
fn frequency_residual(b: f64) -> (f64, f64) {
    let th = libm::tanh(b);
    let sech2 = 1.0 - th * th;
    let g = libm::sin(b) - libm::cos(b) * th;
    let dg = libm::cos(b) + libm::sin(b) * th - libm::cos(b) * sech2;
    (g, dg)
}

/// First `count` positive roots of `tan β = tanh β`.
pub(crate) fn x_mode_roots(count: usize) -> Result<Vec<XMode>> {
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let guess = (j as f64 + 1.25) * PI;
        let mut b = guess;
        let mut converged = false;
        for _ in 0..60 {
            let (g, dg) = frequency_residual(b);
            let step = g / dg;
            b -= step;
            if !b.is_finite() {
                break;
            }
            if step.abs() <= 4.0 * f64::EPSILON * b {
                converged = true;
                break;
            }
        }
        if !converged || (b - guess).abs() > 0.25 {
            return Err(ZkError::Construction {
                mode: j,
                reason: format!("Newton iteration for the frequency equation failed near {guess:.6}"),
            });
        }
        out.push(XMode::new(b));
    }
    Ok(out)
}

/// Shape of a transverse mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerpKind {
    Sine,
    Cosine,
    Constant,
}

/// Normalised transverse mode on (−π/2, π/2), written in θ = y + π/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerpMode {
    pub kind: PerpKind,
    pub wavenumber: f64,
}

impl PerpMode {
    /// The first `count` transverse modes for the given boundary treatment.
    pub fn family(bc: TransverseBc, count: usize) -> Vec<PerpMode> {
        match bc {
            TransverseBc::Dirichlet => (1..=count)
                .map(|k| PerpMode {
                    kind: PerpKind::Sine,
                    wavenumber: k as f64,
                })
                .collect(),
            TransverseBc::Periodic => (0..count)
                .map(|j| {
                    if j == 0 {
                        PerpMode {
                            kind: PerpKind::Constant,
                            wavenumber: 0.0,
                        }
                    } else {
                        let m = j.div_ceil(2);
                        PerpMode {
                            kind: if j % 2 == 1 {
                                PerpKind::Cosine
                            } else {
                                PerpKind::Sine
                            },
                            wavenumber: 2.0 * m as f64,
                        }
                    }
                })
                .collect(),
        }
    }

    /// Eigenvalue of ∂⁴.
    pub fn quartic(&self) -> f64 {
        let k2 = self.wavenumber * self.wavenumber;
        k2 * k2
    }

    /// Eigenvalue of −∂².
    pub fn laplace(&self) -> f64 {
        self.wavenumber * self.wavenumber
    }

    pub fn value(&self, y: f64, order: usize) -> f64 {
        let theta = y + FRAC_PI_2;
        let k = self.wavenumber;
        let amp = libm::sqrt(2.0 / PI);
        match self.kind {
            PerpKind::Constant => {
                if order == 0 {
                    1.0 / libm::sqrt(PI)
                } else {
                    0.0
                }
            }
            PerpKind::Sine => amp * libm::pow(k, order as f64) * sin_deriv(order, k * theta),
            PerpKind::Cosine => amp * libm::pow(k, order as f64) * sin_deriv(order + 1, k * theta),
        }
    }
}
