//! Turning a [`RunConfig`] into solver objects.

use zk_core::{CoeffField, GalerkinOperators, NoiseKey, NoiseModel, SolverConfig, SpectralBasis};

use crate::config::RunConfig;
use crate::error::Result;

/// Trajectory id reserved for drawing the random initial datum, so it never
/// shares a stream with a noise path.
pub const INITIAL_STREAM: u64 = u64::MAX;

pub struct Setup {
    pub basis: SpectralBasis,
    pub ops: GalerkinOperators,
    pub model: NoiseModel,
    pub solver: SolverConfig,
    pub u0: CoeffField,
}

impl Setup {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let basis = SpectralBasis::build(cfg.domain_config())?;
        Self::with_basis(cfg, basis)
    }

    pub fn with_basis(cfg: &RunConfig, basis: SpectralBasis) -> Result<Self> {
        let solver = cfg.solver_config();
        let ops = GalerkinOperators::assemble(&basis, solver.c);
        let k = cfg.noise_k();
        let model = NoiseModel::diagonal(&basis, cfg.noise.alpha.gains(k)?, cfg.noise.beta.gains(k)?)?;
        let u0 = initial_field(cfg, &basis)?;
        Ok(Setup {
            basis,
            ops,
            model,
            solver,
            u0,
        })
    }
}

/// The configured initial datum in `basis`.
pub fn initial_field(cfg: &RunConfig, basis: &SpectralBasis) -> Result<CoeffField> {
    if let Some(c) = &cfg.initial.coefficients {
        return Ok(CoeffField::from_coeffs(basis, c.clone())?);
    }
    Ok(smooth_field(basis, cfg.initial.amplitude, cfg.initial.seed)?)
}

/// `amplitude · N(0,1) / (1 + λ_i/λ_1)` per mode.
pub fn smooth_field(basis: &SpectralBasis, amplitude: f64, seed: u64) -> zk_core::Result<CoeffField> {
    let draw = NoiseKey::new(seed, INITIAL_STREAM).increment(0, basis.len(), 1.0)?;
    let lam = basis.eigenvalues();
    let coeffs = draw
        .dw
        .iter()
        .zip(lam)
        .map(|(g, l)| amplitude * g / (1.0 + l / lam[0]))
        .collect();
    CoeffField::from_coeffs(basis, coeffs)
}
