//! Targets, likelihoods, kernels and datasets.

pub mod binary;
pub mod continuous;
pub mod crp;
pub mod data;
pub mod discrete;
pub mod dpmm;
pub mod langevin;
pub mod nig;
pub mod partition;
pub mod smc_baseline;
pub mod typo;

pub use binary::{binary_terminal, BinaryCompound, BinaryLatentModel, BinaryPosterior};
pub use continuous::GaussianMixtureTarget;
pub use crp::crp_log_prior;
pub use data::{dp_mixture_gaussian, typo_corpus, Planted};
pub use discrete::DiscreteTarget;
pub use dpmm::{exact_log_evidence, ClusterModel, Dpmm, DpmmTarget};
pub use langevin::{langevin_kernel, Langevin};
pub use nig::{gaussian_cluster_marginal, GaussianClusters, NigParams};
pub use partition::{all_partitions, Partition};
pub use smc_baseline::{dpmm_smc_baseline, SmcBaselineOutput};
pub use typo::{
    bigram_logprob, damerau_levenshtein, typo_cluster_marginal, BigramModel, TypoClusters,
    TypoLikelihood,
};
