//! Kernel density estimation, kernel regularity checks and the robust-KDE
//! rate experiment.

mod estimate;
mod regularity;
mod robust;

pub use estimate::{KdeEstimate, KdeKernel};
pub use regularity::{
    smoothed_tv_bound_check, transformation_defect, verify_regularity, RegularityReport, SmoothedTvCheck,
    QUAD_RADIUS,
};
pub use robust::{robust_kde_experiment, BandwidthPolicy, RateRow, RateTable, RobustKdeConfig};
