//! Spectral-Galerkin simulation of the stochastic Zakharov-Kuznetsov
//! equation
//!
//! ```text
//! du + (Δu_x + c u_x + u u_x + ε L u) dt = f dt + σ(u) dW
//! ```
//!
//! on `(0, 1) × (−π/2, π/2)^d`, together with the energy, moment, trace and
//! Gronwall diagnostics used to check runs against the identities the
//! existence theory rests on.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and parallel ensembles live in the `zk` crate.

#![no_std]
// NaN has to fail every range check, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Failures carry the partial path by value.
#![allow(clippy::result_large_err)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod basis;
pub mod diagnostics;
pub mod error;
pub mod gronwall;
pub mod integrator;
pub mod noise;
pub mod operators;
pub mod quadrature;
pub mod stats;

pub use basis::{CoeffField, Deriv, DomainConfig, SpectralBasis, TraceKind, TransverseBc};
pub use error::{Result, ZkError};
pub use integrator::{
    solve_linearized, solve_pair, solve_path, Forcing, ForcingTerm, ImexStepper, SamplePath, SolverConfig,
};
pub use noise::{HsTarget, NoiseKey, NoiseModel, WienerIncrement};
pub use operators::GalerkinOperators;
pub use stats::Welford;
pub use gronwall::{GronwallReport, GronwallVariant, PathProcess, StoppingTimes};
