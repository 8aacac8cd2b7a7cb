//! Metropolis-Hastings with estimated target and proposal densities.
//!
//! The chain state carries the current estimate `log Ẑ_x` of the marginal
//! `π̃(x) = ∫ π̃(r, x) dr`. Each step estimates the proposal's forward and
//! reverse marginal densities with meta-strategies over the proposal's
//! auxiliary variables, and re-estimates the target only at the proposed
//! point.

use std::sync::Arc;

use crate::choice::Choices;
use crate::error::{RaviError, Result};
use crate::importance::{hme, importance};
use crate::strategy::Strategy;
use crate::target::{Ctx, Target};
use crate::value::Value;

/// Unnormalized joint density `π̃(r, x)`.
pub trait JointTarget: Send + Sync {
    fn log_density(&self, cx: &Ctx, r: &Value, x: &Value) -> Result<f64>;
}

/// Proposal kernel `q(s, x'; x)` with auxiliary `s`.
pub trait ProposalKernel: Send + Sync {
    fn sample(&self, cx: &Ctx, x: &Value, ch: &mut dyn Choices) -> Result<(Value, Value)>;

    fn log_density(&self, cx: &Ctx, x: &Value, s: &Value, x_new: &Value) -> Result<f64>;
}

type Family1 = dyn Fn(&Ctx, &Value) -> Result<Strategy> + Send + Sync;
type Family2 = dyn Fn(&Ctx, &Value, &Value) -> Result<Strategy> + Send + Sync;

/// Configuration of the sampler.
#[derive(Clone)]
pub struct RaviMh {
    pub model: Arc<dyn JointTarget>,
    pub proposal: Arc<dyn ProposalKernel>,
    /// `S(x)`, targeting `π(r | x)`.
    pub target_strategy: Arc<Family1>,
    /// `M(x, x')`, targeting `q(s | x'; x)`.
    pub proposal_strategy: Arc<Family2>,
}

/// Chain state: position and the log of its marginal-density estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct MhState {
    pub x: Value,
    pub log_z: f64,
}

/// `r ↦ π̃(r, x)` at fixed `x`.
pub struct ModelSlice {
    pub model: Arc<dyn JointTarget>,
    pub x: Value,
}

impl Target for ModelSlice {
    fn log_density(&self, cx: &Ctx, r: &Value) -> Result<f64> {
        self.model.log_density(cx, r, &self.x)
    }
}

/// `s ↦ q(s, to; from)`.
pub struct KernelSlice {
    pub kernel: Arc<dyn ProposalKernel>,
    pub from: Value,
    pub to: Value,
}

impl Target for KernelSlice {
    fn log_density(&self, cx: &Ctx, s: &Value) -> Result<f64> {
        self.kernel.log_density(cx, &self.from, s, &self.to)
    }
}

impl RaviMh {
    pub fn new<F, G>(
        model: Arc<dyn JointTarget>,
        proposal: Arc<dyn ProposalKernel>,
        target_strategy: F,
        proposal_strategy: G,
    ) -> Self
    where
        F: Fn(&Ctx, &Value) -> Result<Strategy> + Send + Sync + 'static,
        G: Fn(&Ctx, &Value, &Value) -> Result<Strategy> + Send + Sync + 'static,
    {
        Self {
            model,
            proposal,
            target_strategy: Arc::new(target_strategy),
            proposal_strategy: Arc::new(proposal_strategy),
        }
    }

    /// Marginal-density estimate at `x` from `S(x)`.
    pub fn estimate(&self, cx: &Ctx, x: &Value, ch: &mut dyn Choices) -> Result<f64> {
        let slice = ModelSlice {
            model: self.model.clone(),
            x: x.clone(),
        };
        let s = (self.target_strategy)(cx, x)?;
        Ok(importance(cx, &slice, &s, ch)?.log_weight)
    }

    /// Initial chain state at `x`.
    pub fn init(&self, cx: &Ctx, x: Value, ch: &mut dyn Choices) -> Result<MhState> {
        let log_z = self.estimate(cx, &x, ch)?;
        Ok(MhState { x, log_z })
    }

    /// Proposed point and the log ratio of the estimated reverse and forward
    /// proposal densities.
    pub fn propose_move(&self, cx: &Ctx, x: &Value, ch: &mut dyn Choices) -> Result<(Value, f64)> {
        let (s, x_new) = self.proposal.sample(cx, x, ch)?;
        let forward = KernelSlice {
            kernel: self.proposal.clone(),
            from: x.clone(),
            to: x_new.clone(),
        };
        let lw_fwd = hme(
            cx,
            &forward,
            &s,
            &(self.proposal_strategy)(cx, x, &x_new)?,
            ch,
        )?;
        let reverse = KernelSlice {
            kernel: self.proposal.clone(),
            from: x_new.clone(),
            to: x.clone(),
        };
        let lw_rev =
            importance(cx, &reverse, &(self.proposal_strategy)(cx, &x_new, x)?, ch)?.log_weight;
        Ok((x_new, lw_fwd + lw_rev))
    }

    /// Log acceptance ratio of a proposed move, and the proposal's estimate.
    pub fn propose(
        &self,
        cx: &Ctx,
        state: &MhState,
        ch: &mut dyn Choices,
    ) -> Result<(Value, f64, f64)> {
        let x = &state.x;
        let (x_new, log_ratio) = self.propose_move(cx, x, ch)?;
        let log_z_new = self.estimate(cx, &x_new, ch)?;
        let log_alpha = log_z_new - state.log_z + log_ratio;
        if log_alpha.is_nan() {
            return Err(RaviError::SupportViolation(format!(
                "undefined acceptance ratio moving from {x} to {x_new}"
            )));
        }
        Ok((x_new, log_z_new, log_alpha))
    }

    /// One transition. Returns the next state and whether the move was accepted.
    pub fn step(&self, cx: &Ctx, state: &MhState, ch: &mut dyn Choices) -> Result<(MhState, bool)> {
        let (x_new, log_z_new, log_alpha) = self.propose(cx, state, ch)?;
        let p = log_alpha.min(0.0).exp();
        if ch.bernoulli(p)? {
            Ok((
                MhState {
                    x: x_new,
                    log_z: log_z_new,
                },
                true,
            ))
        } else {
            Ok((state.clone(), false))
        }
    }
}

/// Convenience wrapper around [`RaviMh::step`].
pub fn mh_step(
    cx: &Ctx,
    mh: &RaviMh,
    state: &MhState,
    ch: &mut dyn Choices,
) -> Result<(MhState, bool)> {
    mh.step(cx, state, ch)
}
