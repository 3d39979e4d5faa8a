//! Truncated cylindrical Wiener driver and the diagonal affine noise model
//! `σ(u) e_k = (α_k ⟨u, φ_{m(k)}⟩ + β_k) φ_{m(k)}`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::basis::{CoeffField, SpectralBasis};
use crate::error::{Result, ZkError};

/// Which Hilbert space a Hilbert-Schmidt norm is taken into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsTarget {
    L2,
    Xi1,
}

/// Diagonal affine noise model with certified growth and Lipschitz constants.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub mult_gains: Vec<f64>,
    pub add_gains: Vec<f64>,
    /// Noise channel k drives basis mode `mode_map[k]`.
    pub mode_map: Vec<usize>,
    pub declared_cb: f64,
    pub declared_cu: f64,
}

impl NoiseModel {
    /// Channels mapped onto the lowest `alpha.len()` modes, with the smallest
    /// constants the diagonal structure certifies.
    pub fn diagonal(basis: &SpectralBasis, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(ZkError::validation(format!(
                "noise gain lists differ in length ({} vs {})",
                alpha.len(),
                beta.len()
            )));
        }
        let k = alpha.len();
        if k > basis.len() {
            return Err(ZkError::validation(format!(
                "noise.K = {k} exceeds the basis size {}",
                basis.len()
            )));
        }
        Self::on_modes(basis, (0..k).collect(), alpha, beta)
    }

    /// Channel k drives mode `mode_map[k]`; constants as in [`Self::diagonal`].
    pub fn on_modes(basis: &SpectralBasis, mode_map: Vec<usize>, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() || alpha.len() != mode_map.len() {
            return Err(ZkError::validation("noise gain and mode lists differ in length"));
        }
        if mode_map.iter().any(|&m| m >= basis.len()) {
            return Err(ZkError::validation("noise channel mapped outside the basis"));
        }
        let cu = libm::sqrt(alpha.iter().map(|a| a * a).sum());
        let cb = libm::sqrt(
            alpha
                .iter()
                .zip(&beta)
                .zip(&mode_map)
                .map(|((a, b), &m)| (a * a + b * b) * basis.eigenvalues()[m].max(1.0))
                .sum(),
        );
        let model = NoiseModel {
            mult_gains: alpha,
            add_gains: beta,
            mode_map,
            declared_cb: cb,
            declared_cu: cu,
        };
        model.validate(basis)?;
        Ok(model)
    }

    /// Purely additive channels with gains `h` on the lowest modes.
    pub fn additive(basis: &SpectralBasis, h: Vec<f64>) -> Result<Self> {
        let alpha = vec![0.0; h.len()];
        Self::diagonal(basis, alpha, h)
    }

    /// No noise at all.
    pub fn silent() -> Self {
        NoiseModel {
            mult_gains: Vec::new(),
            add_gains: Vec::new(),
            mode_map: Vec::new(),
            declared_cb: 0.0,
            declared_cu: 0.0,
        }
    }

    /// Number of channels K.
    pub fn channels(&self) -> usize {
        self.mult_gains.len()
    }

    pub fn validate(&self, basis: &SpectralBasis) -> Result<()> {
        let k = self.channels();
        if self.add_gains.len() != k || self.mode_map.len() != k {
            return Err(ZkError::validation("noise gain and mode lists differ in length"));
        }
        if self.mode_map.iter().any(|&m| m >= basis.len()) {
            return Err(ZkError::validation("noise channel mapped outside the basis"));
        }
        let mut seen = vec![false; basis.len()];
        for &m in &self.mode_map {
            if core::mem::replace(&mut seen[m], true) {
                return Err(ZkError::validation("noise channels must drive distinct modes"));
            }
        }
        if self.mult_gains.iter().chain(&self.add_gains).any(|g| !g.is_finite()) {
            return Err(ZkError::validation("noise gains must be finite"));
        }
        let sum_a2: f64 = self.mult_gains.iter().map(|a| a * a).sum();
        let tol = 1.0 + 1e-12;
        if sum_a2 > self.declared_cu * self.declared_cu * tol {
            return Err(ZkError::validation("declared c_U does not dominate Σ α_k²"));
        }
        let xi: f64 = self
            .mult_gains
            .iter()
            .zip(&self.add_gains)
            .zip(&self.mode_map)
            .map(|((a, b), &m)| (a * a + b * b) * basis.eigenvalues()[m].max(1.0))
            .sum();
        if xi > self.declared_cb * self.declared_cb * tol {
            return Err(ZkError::validation("declared c_B does not dominate the Ξ₁ growth sum"));
        }
        Ok(())
    }

    /// Coefficient of channel k's output vector: `α_k u_{m(k)} + β_k`.
    #[inline]
    pub fn channel_amplitude(&self, k: usize, u: &[f64]) -> f64 {
        self.mult_gains[k] * u[self.mode_map[k]] + self.add_gains[k]
    }

    /// `σ(u) dW` as a coefficient vector.
    pub fn apply_sigma(&self, u: &CoeffField, inc: &WienerIncrement) -> Result<CoeffField> {
        if inc.dw.len() != self.channels() {
            return Err(ZkError::validation(format!(
                "increment has {} channels, model has {}",
                inc.dw.len(),
                self.channels()
            )));
        }
        if self.mode_map.iter().any(|&m| m >= u.coeffs.len()) {
            return Err(ZkError::validation("noise channel mapped outside the field"));
        }
        let mut out = vec![0.0; u.coeffs.len()];
        self.add_kick(&u.coeffs, &inc.dw, &mut out);
        Ok(CoeffField {
            coeffs: out,
            basis_id: u.basis_id,
        })
    }

    pub(crate) fn add_kick(&self, u: &[f64], dw: &[f64], out: &mut [f64]) {
        for (k, &w) in dw.iter().enumerate() {
            out[self.mode_map[k]] += self.channel_amplitude(k, u) * w;
        }
    }

    /// `‖σ(u)‖_{L₂(𝔘, target)}`.
    pub fn hs_norm(&self, basis: &SpectralBasis, u: &CoeffField, target: HsTarget) -> f64 {
        libm::sqrt(self.hs_norm_sq(basis, &u.coeffs, target))
    }

    pub(crate) fn hs_norm_sq(&self, basis: &SpectralBasis, u: &[f64], target: HsTarget) -> f64 {
        (0..self.channels())
            .map(|k| {
                let s = self.channel_amplitude(k, u);
                let w = match target {
                    HsTarget::L2 => 1.0,
                    HsTarget::Xi1 => basis.eigenvalues()[self.mode_map[k]],
                };
                s * s * w
            })
            .sum()
    }

    /// `Σ_k ‖√(1+x) σ(u) e_k‖²`, given the diagonal of the weight matrix.
    pub(crate) fn weighted_hs_norm_sq(&self, u: &[f64], weight_diag: impl Fn(usize) -> f64) -> f64 {
        (0..self.channels())
            .map(|k| {
                let s = self.channel_amplitude(k, u);
                s * s * weight_diag(self.mode_map[k])
            })
            .sum()
    }

    /// Hilbert-Schmidt distance `‖σ(u) − σ(v)‖_{L₂(𝔘, L²)}`.
    pub fn hs_distance(&self, u: &[f64], v: &[f64]) -> f64 {
        libm::sqrt(
            (0..self.channels())
                .map(|k| {
                    let d = self.channel_amplitude(k, u) - self.channel_amplitude(k, v);
                    d * d
                })
                .sum(),
        )
    }
}

/// `|v|_{𝔘₀} = (Σ_k a_k² / k²)^{1/2}`, k counted from 1.
pub fn u0_norm(v: &[f64]) -> f64 {
    libm::sqrt(
        v.iter()
            .enumerate()
            .map(|(i, a)| {
                let k = (i + 1) as f64;
                a * a / (k * k)
            })
            .sum(),
    )
}

/// Brownian increments over one step for the K channels.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrement {
    pub dw: Vec<f64>,
    pub dt: f64,
}

impl WienerIncrement {
    pub fn zero(k: usize, dt: f64) -> Self {
        WienerIncrement { dw: vec![0.0; k], dt }
    }
}

/// Address of a trajectory's noise: `(master seed, trajectory id)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseKey {
    pub master_seed: u64,
    pub trajectory: u64,
}

impl NoiseKey {
    pub fn new(master_seed: u64, trajectory: u64) -> Self {
        NoiseKey {
            master_seed,
            trajectory,
        }
    }

    /// Increment for step `step` (0-based). The draw for channel k depends
    /// only on `(master_seed, trajectory, step, k)`.
    pub fn increment(&self, step: u64, k: usize, dt: f64) -> Result<WienerIncrement> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(ZkError::validation(format!("increment step dt = {dt} must be positive")));
        }
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.trajectory.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(step);
        let sd = libm::sqrt(dt);
        let dw = (0..k).map(|_| sd * standard_normal(&mut rng)).collect();
        Ok(WienerIncrement { dw, dt })
    }

    pub fn stream(self) -> NoiseStream {
        NoiseStream { key: self, step: 0 }
    }
}

/// Sequential view over a trajectory's increments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseStream {
    key: NoiseKey,
    step: u64,
}

impl NoiseStream {
    pub fn position(&self) -> u64 {
        self.step
    }

    /// K independent N(0, dt) draws; advances the stream by one step.
    pub fn sample_increment(&mut self, k: usize, dt: f64) -> Result<WienerIncrement> {
        let inc = self.key.increment(self.step, k, dt)?;
        self.step += 1;
        Ok(inc)
    }
}

/// Box-Muller on two 53-bit uniforms; always consumes exactly two words.
fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let scale = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) as f64 + 1.0) * scale;
    let u2 = (rng.next_u64() >> 11) as f64 * scale;
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
}
