//! Command line, configuration, file formats and parallel ensembles for the
//! `zk-core` solver.

// NaN has to fail every range check, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod ensemble;
pub mod error;
pub mod format;
pub mod gronwall_io;
pub mod report;
pub mod setup;
pub mod suites;

pub use config::{parse_config, print_config, RunConfig};
pub use error::{AppError, Result};
pub use setup::Setup;
