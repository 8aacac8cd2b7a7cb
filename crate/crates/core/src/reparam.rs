//! Reparameterized ELBO and EUBO estimators.
//!
//! Nodes draw parameter-free noise and push it through differentiable maps.
//! Derivatives are carried forward as [`Dual`] tangents with one coordinate
//! per entry of `θ`, so the returned gradient is the exact path derivative
//! of the objective at fixed noise.

use std::sync::Arc;

use crate::choice::Choices;
use crate::dual::Dual;
use crate::error::{RaviError, Result};

/// Arguments seen by a node: the conditioning values supplied by enclosing
/// levels (innermost first) and the global parameters.
#[derive(Clone, Debug)]
pub struct Args {
    pub cond: Vec<Dual>,
    pub theta: Vec<Dual>,
}

impl Args {
    pub fn root(theta: &[f64]) -> Self {
        Self {
            cond: Vec::new(),
            theta: Dual::variables(theta),
        }
    }

    /// Arguments for a meta-strategy conditioned on `x`.
    pub fn nested(&self, x: &[Dual]) -> Self {
        let mut cond = x.to_vec();
        cond.extend(self.cond.iter().cloned());
        Self {
            cond,
            theta: self.theta.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn constant(&self, v: f64) -> Dual {
        Dual::constant(v, self.dim())
    }
}

/// Tractable proposal with an optional noise pushforward.
pub trait ReparamProposal: Send + Sync {
    fn noise(&self, _args: &Args, _ch: &mut dyn Choices) -> Result<Vec<f64>> {
        Err(RaviError::NotReparameterizable)
    }

    fn push(&self, _args: &Args, _eps: &[f64]) -> Result<Vec<Dual>> {
        Err(RaviError::NotReparameterizable)
    }

    fn log_density(&self, args: &Args, x: &[Dual]) -> Result<Dual>;
}

/// Joint proposal over `(r, x)` with an optional pushforward of shared noise.
pub trait ReparamJoint: Send + Sync {
    fn noise(&self, _args: &Args, _ch: &mut dyn Choices) -> Result<Vec<f64>> {
        Err(RaviError::NotReparameterizable)
    }

    fn push(&self, _args: &Args, _eps: &[f64]) -> Result<(Vec<Dual>, Vec<Dual>)> {
        Err(RaviError::NotReparameterizable)
    }

    fn log_joint_density(&self, args: &Args, r: &[Dual], x: &[Dual]) -> Result<Dual>;

    /// Meta-strategy; it receives `x` prepended to the conditioning values.
    fn meta(&self) -> ReparamStrategy;
}

#[derive(Clone)]
pub enum ReparamStrategy {
    Terminal(Arc<dyn ReparamProposal>),
    Compound(Arc<dyn ReparamJoint>),
}

/// Differentiable unnormalized log-density.
pub trait DualTarget: Send + Sync {
    fn log_density(&self, args: &Args, x: &[Dual]) -> Result<Dual>;
}

struct Slice<'a> {
    joint: &'a dyn ReparamJoint,
    x: &'a [Dual],
}

impl DualTarget for Slice<'_> {
    fn log_density(&self, args: &Args, r: &[Dual]) -> Result<Dual> {
        self.joint.log_joint_density(args, r, self.x)
    }
}

fn elbo_rec(
    model: &dyn DualTarget,
    model_args: &Args,
    s: &ReparamStrategy,
    args: &Args,
    ch: &mut dyn Choices,
) -> Result<Dual> {
    let (x, u_hat) = match s {
        ReparamStrategy::Terminal(q) => {
            let eps = q.noise(args, ch)?;
            let x = q.push(args, &eps)?;
            let lq = q.log_density(args, &x)?;
            (x, lq)
        }
        ReparamStrategy::Compound(j) => {
            let eps = j.noise(args, ch)?;
            let (r, x) = j.push(args, &eps)?;
            let slice = Slice {
                joint: j.as_ref(),
                x: &x,
            };
            let u = eubo_rec(&slice, args, &r, &j.meta(), &args.nested(&x), ch)?;
            (x, u)
        }
    };
    Ok(&model.log_density(model_args, &x)? - &u_hat)
}

fn eubo_rec(
    model: &dyn DualTarget,
    model_args: &Args,
    x: &[Dual],
    s: &ReparamStrategy,
    args: &Args,
    ch: &mut dyn Choices,
) -> Result<Dual> {
    let l_hat = match s {
        ReparamStrategy::Terminal(q) => q.log_density(args, x)?,
        ReparamStrategy::Compound(j) => {
            let slice = Slice {
                joint: j.as_ref(),
                x,
            };
            elbo_rec(&slice, args, &j.meta(), &args.nested(x), ch)?
        }
    };
    Ok(&model.log_density(model_args, x)? - &l_hat)
}

/// Reparameterized ELBO estimate at `θ` and its gradient in `θ`.
pub fn elbo_reparam(
    model: &dyn DualTarget,
    s: &ReparamStrategy,
    theta: &[f64],
    ch: &mut dyn Choices,
) -> Result<(f64, Vec<f64>)> {
    let args = Args::root(theta);
    let out = elbo_rec(model, &args, s, &args, ch)?;
    Ok((out.v, out.d))
}

/// Reparameterized EUBO estimate at an exact sample `x` and its gradient in `θ`.
pub fn eubo_reparam(
    model: &dyn DualTarget,
    x: &[f64],
    s: &ReparamStrategy,
    theta: &[f64],
    ch: &mut dyn Choices,
) -> Result<(f64, Vec<f64>)> {
    let args = Args::root(theta);
    let xd: Vec<Dual> = x.iter().map(|&v| args.constant(v)).collect();
    let out = eubo_rec(model, &args, &xd, s, &args, ch)?;
    Ok((out.v, out.d))
}
