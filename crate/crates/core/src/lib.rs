//! Recursive auxiliary-variable inference.
//!
//! An inference [`Strategy`] pairs a posterior approximation with, when its
//! marginal density is intractable, a meta-strategy that infers the
//! approximation's auxiliary variables. Estimators recurse through that
//! tree: [`importance`] and [`hme`] give unbiased estimates of `Z` and `1/Z`,
//! [`elbo_grad`] and [`eubo_grad`] give variational bounds with gradients.
//!
//! Combinators live in [`strategies`], target families and kernels in
//! [`models`], and exact oracles in [`diagnostics`].

pub mod choice;
pub mod diagnostics;
pub mod dual;
pub mod error;
pub mod importance;
pub mod kl;
pub mod math;
pub mod mh;
pub mod models;
pub mod params;
pub mod rejection;
pub mod reparam;
pub mod strategies;
pub mod strategy;
pub mod target;
pub mod value;
pub mod variational;

pub use choice::{enumerate, Choices, RngChoices};
pub use error::{RaviError, Result};
pub use importance::{
    hme, hme_traced, importance, importance_traced, log_p_hme, log_p_imp, WeightedSample,
};
pub use kl::{symmetric_kl_bound, GenerativeModel, ModelWithStrategy};
pub use mh::{mh_step, JointTarget, MhState, ProposalKernel, RaviMh};
pub use params::{GradientEstimate, ParamRef, ParamStore};
pub use rejection::{rejection_sample, RejectionOutcome};
pub use reparam::{
    elbo_reparam, eubo_reparam, Args, DualTarget, ReparamJoint, ReparamProposal, ReparamStrategy,
};
pub use strategy::{
    FnJoint, FnProposal, JointProposal, JointSlice, Node, Proposal, Strategy, SupportKind,
};
pub use target::{Ctx, FnTarget, Target};
pub use value::Value;
pub use variational::{elbo_grad, eubo_grad, Baseline};
