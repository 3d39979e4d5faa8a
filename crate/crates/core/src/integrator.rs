//! Drift-implicit, noise-explicit Euler-Maruyama stepping of the regularized
//! Galerkin system
//!
//! ```text
//! (I + dt (A + ε Λ)) u_{m+1} = u_m + dt (−B(u_m) + f(t_m)) + σ(u_m) ΔW_m
//! ```
//!
//! The left-hand matrix is factorised once per `(dt, ε, c)`.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::basis::{CoeffField, SpectralBasis};
use crate::error::{Result, ZkError};
use crate::noise::{NoiseKey, NoiseModel, WienerIncrement};
use crate::operators::{b_product, GalerkinOperators};

/// Growth factor over the initial scale at which a path is declared blown up.
pub const BLOWUP_FACTOR: f64 = 1e6;

/// One forcing component `amplitude · cos(omega t) · φ_mode`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ForcingTerm {
    pub mode: usize,
    pub amplitude: f64,
    pub omega: f64,
}

/// Deterministic forcing `f(t)` as a finite sum of modal terms.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Forcing {
    pub terms: Vec<ForcingTerm>,
}

impl Forcing {
    pub fn zero() -> Self {
        Forcing::default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.amplitude == 0.0)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for t in &self.terms {
            if t.mode >= n {
                return Err(ZkError::validation(format!(
                    "forcing mode {} outside the basis (n = {n})",
                    t.mode
                )));
            }
            if !t.amplitude.is_finite() || !t.omega.is_finite() {
                return Err(ZkError::validation("forcing terms must be finite"));
            }
        }
        Ok(())
    }

    /// Coefficients of `f(t)`, accumulated into `out`.
    pub fn add_to(&self, t: f64, scale: f64, out: &mut [f64]) {
        for term in &self.terms {
            out[term.mode] += scale * term.amplitude * libm::cos(term.omega * t);
        }
    }

    pub fn at(&self, t: f64, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.add_to(t, 1.0, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    pub epsilon: f64,
    pub c: f64,
    pub forcing: Forcing,
    pub nonlinear: bool,
    pub record_every: usize,
}

impl SolverConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        SolverConfig {
            dt,
            t_final,
            epsilon: 0.0,
            c: 0.0,
            forcing: Forcing::zero(),
            nonlinear: true,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(ZkError::validation(format!("solver.dt = {} must be positive", self.dt)));
        }
        if !(self.t_final >= self.dt) || !self.t_final.is_finite() {
            return Err(ZkError::validation(format!(
                "solver.T = {} must be at least dt = {}",
                self.t_final, self.dt
            )));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(ZkError::validation(format!(
                "solver.epsilon = {} must be nonnegative",
                self.epsilon
            )));
        }
        if !self.c.is_finite() {
            return Err(ZkError::validation("solver.c must be finite"));
        }
        if self.record_every == 0 {
            return Err(ZkError::validation("solver.record_every must be at least 1"));
        }
        Ok(())
    }

    /// Number of steps; the last time is within dt/2 of T.
    pub fn steps(&self) -> u64 {
        libm::round(self.t_final / self.dt) as u64
    }
}

/// Recorded trajectory. Increments are not stored: they are replayed from
/// `noise` on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub times: Vec<f64>,
    /// Step index of each snapshot.
    pub steps: Vec<u64>,
    pub fields: Vec<CoeffField>,
    pub noise: Option<NoiseKey>,
    pub channels: usize,
    pub config: SolverConfig,
}

impl SamplePath {
    fn new(cfg: &SolverConfig, noise: Option<NoiseKey>, channels: usize) -> Self {
        SamplePath {
            times: Vec::new(),
            steps: Vec::new(),
            fields: Vec::new(),
            noise,
            channels,
            config: cfg.clone(),
        }
    }

    fn push(&mut self, step: u64, u: &[f64], basis_id: u64) {
        self.times.push(step as f64 * self.config.dt);
        self.steps.push(step);
        self.fields.push(CoeffField {
            coeffs: u.to_vec(),
            basis_id,
        });
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// True when every step was recorded, so increments line up with fields.
    pub fn is_dense(&self) -> bool {
        self.steps.iter().enumerate().all(|(i, &s)| s == i as u64)
    }

    pub fn l2_norms(&self) -> Vec<f64> {
        self.fields.iter().map(|f| f.l2_norm()).collect()
    }

    /// Increment consumed by step `step`, replayed from the noise key.
    pub fn increment(&self, step: u64) -> Result<WienerIncrement> {
        match self.noise {
            Some(key) => key.increment(step, self.channels, self.config.dt),
            None if self.channels == 0 => Ok(WienerIncrement::zero(0, self.config.dt)),
            None => Err(ZkError::validation("path has noise channels but no replayable key")),
        }
    }
}

/// A solver error together with everything computed before it.
#[derive(Debug, Clone)]
pub struct Failure<P> {
    pub error: ZkError,
    pub partial: P,
}

pub type PathFailure = Failure<SamplePath>;
pub type PairFailure = Failure<(SamplePath, SamplePath)>;

/// Factorised IMEX stepper for one `(basis, dt, ε, c)`; immutable and
/// shareable across worker threads.
#[derive(Debug, Clone)]
pub struct ImexStepper<'a> {
    basis: &'a SpectralBasis,
    cfg: SolverConfig,
    lu: LU<f64, Dyn, Dyn>,
}

impl<'a> ImexStepper<'a> {
    pub fn new(basis: &'a SpectralBasis, ops: &GalerkinOperators, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if ops.basis_id() != basis.id() {
            return Err(ZkError::validation("operators were assembled for a different basis"));
        }
        cfg.forcing.validate(basis.len())?;
        let n = basis.len();
        let mut m: DMatrix<f64> = ops.a_matrix() + (ops.dx_matrix() * (cfg.c - ops.c()));
        m *= cfg.dt;
        for i in 0..n {
            m[(i, i)] += 1.0 + cfg.dt * cfg.epsilon * ops.l_diag()[i];
        }
        let lu = m.lu();
        let diag = lu.u().diagonal();
        let max = diag.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let min = diag.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        let ratio = if max > 0.0 { min / max } else { 0.0 };
        if !(ratio > 1e-14) {
            return Err(ZkError::Singular { pivot_ratio: ratio });
        }
        Ok(ImexStepper {
            basis,
            cfg: cfg.clone(),
            lu,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn basis(&self) -> &SpectralBasis {
        self.basis
    }

    /// Explicit part `u + dt(−B(u) + f(t)) + σ(u)ΔW`.
    pub fn explicit_rhs(&self, u: &[f64], t: f64, model: &NoiseModel, inc: &WienerIncrement) -> Vec<f64> {
        let dt = self.cfg.dt;
        let mut rhs = u.to_vec();
        if self.cfg.nonlinear {
            for (r, b) in rhs.iter_mut().zip(b_product(self.basis, u, u)) {
                *r -= dt * b;
            }
        }
        self.cfg.forcing.add_to(t, dt, &mut rhs);
        model.add_kick(u, &inc.dw, &mut rhs);
        rhs
    }

    /// Solve the implicit system for a given right-hand side.
    pub fn implicit_solve(&self, rhs: Vec<f64>) -> Vec<f64> {
        let mut v = DVector::from_vec(rhs);
        self.lu.solve_mut(&mut v);
        v.data.into()
    }

    /// One step from time `t`.
    pub fn step(&self, u: &[f64], t: f64, model: &NoiseModel, inc: &WienerIncrement) -> Result<Vec<f64>> {
        self.basis.check_len(u)?;
        if inc.dw.len() != model.channels() {
            return Err(ZkError::validation(format!(
                "increment has {} channels, model has {}",
                inc.dw.len(),
                model.channels()
            )));
        }
        if (inc.dt - self.cfg.dt).abs() > 1e-12 * self.cfg.dt {
            return Err(ZkError::validation(format!(
                "increment dt {} differs from solver dt {}",
                inc.dt, self.cfg.dt
            )));
        }
        let next = self.implicit_solve(self.explicit_rhs(u, t, model, inc));
        if next.iter().any(|v| !v.is_finite()) {
            return Err(ZkError::BlowUp {
                time: t + self.cfg.dt,
                reason: "non-finite state".to_string(),
            });
        }
        Ok(next)
    }

    /// Iterate from `u0` to T with increments from `key`.
    pub fn solve_path(
        &self,
        u0: &CoeffField,
        model: &NoiseModel,
        key: NoiseKey,
    ) -> core::result::Result<SamplePath, PathFailure> {
        self.solve_many(core::slice::from_ref(u0), model, key)
            .map(|mut v| v.pop().expect("one path"))
            .map_err(|f| Failure {
                error: f.error,
                partial: f.partial.into_iter().next().expect("one path"),
            })
    }

    /// Iterate several initial states with one shared increment stream.
    pub fn solve_many(
        &self,
        u0: &[CoeffField],
        model: &NoiseModel,
        key: NoiseKey,
    ) -> core::result::Result<Vec<SamplePath>, Failure<Vec<SamplePath>>> {
        let noise = (model.channels() > 0).then_some(key);
        let mut paths: Vec<SamplePath> = u0
            .iter()
            .map(|_| SamplePath::new(&self.cfg, noise, model.channels()))
            .collect();
        let fail = |error, paths| Err(Failure { error, partial: paths });
        if let Err(e) = model.validate(self.basis) {
            return fail(e, paths);
        }
        for u in u0 {
            if let Err(e) = self.basis.check(u) {
                return fail(e, paths);
            }
        }
        let caps: Vec<f64> = u0.iter().map(|u| BLOWUP_FACTOR * u.l2_norm().max(1.0)).collect();
        let mut states: Vec<Vec<f64>> = u0.iter().map(|u| u.coeffs.clone()).collect();
        let id = self.basis.id();
        for (p, s) in paths.iter_mut().zip(&states) {
            p.push(0, s, id);
        }
        let steps = self.cfg.steps();
        let stride = self.cfg.record_every as u64;
        for m in 0..steps {
            let t = m as f64 * self.cfg.dt;
            let inc = match noise {
                Some(k) => match k.increment(m, model.channels(), self.cfg.dt) {
                    Ok(i) => i,
                    Err(e) => return fail(e, paths),
                },
                None => WienerIncrement::zero(0, self.cfg.dt),
            };
            for (j, s) in states.iter_mut().enumerate() {
                let next = match self.step(s, t, model, &inc) {
                    Ok(v) => v,
                    Err(e) => return fail(e, paths),
                };
                let norm = libm::sqrt(next.iter().map(|v| v * v).sum());
                if norm > caps[j] {
                    return fail(
                        ZkError::BlowUp {
                            time: t + self.cfg.dt,
                            reason: format!("|u| = {norm:.3e} exceeds {:.3e}", caps[j]),
                        },
                        paths,
                    );
                }
                *s = next;
            }
            let done = m + 1;
            if done % stride == 0 || done == steps {
                for (p, s) in paths.iter_mut().zip(&states) {
                    p.push(done, s, id);
                }
            }
        }
        Ok(paths)
    }
}

/// One IMEX step. Factorises the implicit matrix on every call; use
/// [`ImexStepper`] to reuse it.
pub fn step(
    basis: &SpectralBasis,
    state: &CoeffField,
    t: f64,
    cfg: &SolverConfig,
    ops: &GalerkinOperators,
    model: &NoiseModel,
    inc: &WienerIncrement,
) -> Result<CoeffField> {
    basis.check(state)?;
    let s = ImexStepper::new(basis, ops, cfg)?;
    Ok(CoeffField {
        coeffs: s.step(&state.coeffs, t, model, inc)?,
        basis_id: basis.id(),
    })
}

pub fn solve_path(
    basis: &SpectralBasis,
    u0: &CoeffField,
    cfg: &SolverConfig,
    ops: &GalerkinOperators,
    model: &NoiseModel,
    key: NoiseKey,
) -> core::result::Result<SamplePath, PathFailure> {
    match ImexStepper::new(basis, ops, cfg) {
        Ok(s) => s.solve_path(u0, model, key),
        Err(error) => Err(Failure {
            error,
            partial: SamplePath::new(cfg, Some(key), model.channels()),
        }),
    }
}

/// Linearized additive-noise problem `dR + (A R + ε L R) dt = g dt + h dW`
/// with `c = 0`; `cfg.forcing` plays the role of `g`.
pub fn solve_linearized(
    basis: &SpectralBasis,
    r0: &CoeffField,
    h: &[f64],
    cfg: &SolverConfig,
    ops: &GalerkinOperators,
    key: NoiseKey,
) -> core::result::Result<SamplePath, PathFailure> {
    let empty = |error| {
        Err(Failure {
            error,
            partial: SamplePath::new(cfg, Some(key), h.len()),
        })
    };
    if cfg.c != 0.0 {
        return empty(ZkError::validation("the linearized problem requires c = 0"));
    }
    let model = match NoiseModel::additive(basis, h.to_vec()) {
        Ok(m) => m,
        Err(e) => return empty(e),
    };
    let lin = SolverConfig {
        nonlinear: false,
        ..cfg.clone()
    };
    solve_path(basis, r0, &lin, ops, &model, key)
}

/// Two trajectories driven by the identical increment stream.
pub fn solve_pair(
    basis: &SpectralBasis,
    u0: &CoeffField,
    v0: &CoeffField,
    cfg: &SolverConfig,
    ops: &GalerkinOperators,
    model: &NoiseModel,
    key: NoiseKey,
) -> core::result::Result<(SamplePath, SamplePath), PairFailure> {
    let split = |mut v: Vec<SamplePath>| {
        let b = v.pop().expect("two paths");
        let a = v.pop().expect("two paths");
        (a, b)
    };
    let stepper = match ImexStepper::new(basis, ops, cfg) {
        Ok(s) => s,
        Err(error) => {
            let p = SamplePath::new(cfg, Some(key), model.channels());
            return Err(Failure {
                error,
                partial: (p.clone(), p),
            });
        }
    };
    stepper
        .solve_many(&[u0.clone(), v0.clone()], model, key)
        .map(split)
        .map_err(|f| Failure {
            error: f.error,
            partial: split(f.partial),
        })
}
