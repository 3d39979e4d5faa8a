//! Checks of solver output against the energy identities, moment bounds,
//! fractional-time regularity, boundary traces and pathwise uniqueness.

mod budget;
mod fractional;
mod moments;
mod traces;
mod uniqueness;

pub use budget::{
    cubic_integral, energy_budget, weighted_energy_budget, weighted_second_derivatives, EnergyLedger,
    ENERGY_COLUMNS, WEIGHTED_COLUMNS,
};
pub use fractional::{fractional_norm, fractional_norm_samples, fractional_norm_scalar};
pub use moments::{
    check_moment_bound, moment_estimate, running_moments, MomentBound, MomentBoundCheck, MomentReport,
};
pub use traces::{boundary_slope, trace_convergence, TraceRow};
pub use uniqueness::{uniqueness_experiment, UniquenessReport};

#[cfg(test)]
mod tests;
