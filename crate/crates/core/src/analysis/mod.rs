//! Statistical checks: estimators, z-tests and study drivers.

pub mod compare;
pub mod discretize;
pub mod ito;
pub mod martingale;
pub mod mass;
pub mod qv;
pub mod report;
pub mod stats;

pub use compare::{compare_same_sheet, CompareSpec, CompareStudy, KernelChoice};
pub use discretize::{discretized_measure, discretized_measure_convergence};
pub use ito::{ito_residual, ItoResidual};
pub use martingale::{martingale_test, MartingaleSpec, Weight};
pub use mass::{mass_moment_scan, mass_scan_from_moments, path_mass_moments, MassScan, MassWeight};
pub use report::{Report, TestResult};
pub use stats::{batch_means, realized_cov, realized_qv, Estimate};
