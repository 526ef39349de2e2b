//! Two-sample tests and rate fits.

mod fit;
mod twosample;

pub use fit::{loglog_fit, LogLogFit};
pub use twosample::{
    cramer_test, ff_test, CramerMethod, TestResult, DEFAULT_EIGEN_DRAWS, DEFAULT_PERMUTATIONS,
};
