//! Exact and Monte Carlo oracles: enumerated estimator laws, the variance
//! and bias recursions, finite differences and stationarity checks.

pub mod checks;
pub mod gradient;
pub mod law;
pub mod recursion;
pub mod stationarity;
pub mod stats;
pub mod zoo;

pub use checks::{check_entry, unbiasedness, CheckRow, Unbiasedness, CHECKS};
pub use gradient::{finite_diff_gradient, FdGradient};
pub use law::{enumerate_law, EstimatorLaw};
pub use recursion::{
    bias_recursion, variance_recursion, BiasReport, RecursionReport, RecursionRow, VarianceReport,
};
pub use stationarity::{
    chain_stationarity_residual, kernel_stationarity_check, kernel_stationarity_check_1d,
    mh_stationarity_check,
};
pub use stats::{
    empirical_stats, empirical_vec_stats, replicate, EmpiricalStats, VecStats, Welford,
};
pub use zoo::{mh_example, zoo, ZooEntry};
