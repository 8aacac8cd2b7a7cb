//! Combinators that build [`Strategy`](crate::Strategy) trees.

pub mod agglom;
pub mod ais;
pub mod antithetic;
pub mod basic;
pub mod gaussian;
pub mod kernel;
pub mod mcvi;
pub mod mcvi_train;
pub mod sir;
pub mod smc;

pub use agglom::{agglom, modal_partition};
pub use ais::ais;
pub use antithetic::{antithetic, Bijection, IdentityMap, Permutation, Reflection};
pub use basic::{
    compound, terminal, terminal_checked, trivial_compound, unit_strategy, DiscreteProposal,
    PointMass,
};
pub use gaussian::{Gaussian1d, GaussianChain, LinearGaussian};
pub use kernel::{
    gibbs_kernel, kernel_strategy, metropolis_kernel, AffineGaussian, GaussianAr1, IdentityKernel,
    Kernel, KernelProposal, MatrixKernel, RandomWalkMetropolis,
};
pub use mcvi::{mcvi, rmcvi, McviConfig};
pub use mcvi_train::{
    fit_weighting, log_weights, mcvi_sweep, train_mcvi, McviExperiment, McviFamily, McviInit,
    McviRow, TrainConfig,
};
pub use sir::{ravi_sir, sir, sir_fault_injected};
pub use smc::{smc, StrategyFamily};
