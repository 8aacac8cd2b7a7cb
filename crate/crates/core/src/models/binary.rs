//! A binary latent with a binary observation.

use std::sync::Arc;

use crate::choice::Choices;
use crate::error::{RaviError, Result};
use crate::kl::GenerativeModel;
use crate::math::logsumexp;
use crate::params::ParamRef;
use crate::strategies::DiscreteProposal;
use crate::strategy::{JointProposal, Proposal, Strategy};
use crate::target::{Ctx, Target};
use crate::value::Value;

fn log_sigmoid(z: f64) -> f64 {
    -((-z).max(0.0) + (-z.abs()).exp().ln_1p())
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn bit(v: &Value) -> Result<usize> {
    match v {
        Value::Int(0) => Ok(0),
        Value::Int(1) => Ok(1),
        other => Err(RaviError::InvalidArgument(format!(
            "expected a bit, got {other:?}"
        ))),
    }
}

/// `x ~ Bernoulli(σ(θ))`, `y | x ~ Bernoulli(lik[x])`.
#[derive(Clone, Debug)]
pub struct BinaryLatentModel {
    pub prior_logit: ParamRef,
    /// `P(y = 1 | x)` for `x = 0, 1`.
    pub lik: [f64; 2],
}

impl BinaryLatentModel {
    pub fn new(prior_logit: ParamRef, lik: [f64; 2]) -> Result<Self> {
        if lik.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(RaviError::InvalidArgument(format!("likelihood {lik:?}")));
        }
        Ok(Self { prior_logit, lik })
    }

    pub fn log_prior(&self, cx: &Ctx, x: usize) -> f64 {
        let t = self.prior_logit.get(cx.params);
        if x == 1 {
            log_sigmoid(t)
        } else {
            log_sigmoid(-t)
        }
    }

    pub fn log_lik(&self, x: usize, y: usize) -> f64 {
        if y == 1 {
            self.lik[x].ln()
        } else {
            (1.0 - self.lik[x]).ln()
        }
    }

    pub fn log_joint_bits(&self, cx: &Ctx, x: usize, y: usize) -> f64 {
        self.log_prior(cx, x) + self.log_lik(x, y)
    }

    pub fn log_evidence(&self, cx: &Ctx, y: usize) -> f64 {
        logsumexp(&[self.log_joint_bits(cx, 0, y), self.log_joint_bits(cx, 1, y)])
    }

    /// Unnormalized posterior at observation `y`.
    pub fn posterior(self: &Arc<Self>, y: usize) -> BinaryPosterior {
        BinaryPosterior {
            model: self.clone(),
            y,
        }
    }

    pub fn atoms() -> Vec<Value> {
        vec![Value::Int(0), Value::Int(1)]
    }
}

impl GenerativeModel for BinaryLatentModel {
    fn sample(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<(Value, Value)> {
        let x = usize::from(ch.bernoulli(self.log_prior(cx, 1).exp())?);
        let y = usize::from(ch.bernoulli(self.lik[x])?);
        Ok((Value::index(x), Value::index(y)))
    }

    fn log_joint(&self, cx: &Ctx, x: &Value, y: &Value) -> Result<f64> {
        Ok(self.log_joint_bits(cx, bit(x)?, bit(y)?))
    }
}

/// `x ↦ p(x, y)` with gradients in the prior logit.
#[derive(Clone, Debug)]
pub struct BinaryPosterior {
    pub model: Arc<BinaryLatentModel>,
    pub y: usize,
}

impl Target for BinaryPosterior {
    fn log_density(&self, cx: &Ctx, x: &Value) -> Result<f64> {
        Ok(self.model.log_joint_bits(cx, bit(x)?, self.y))
    }

    fn grad_log_density(&self, cx: &Ctx, x: &Value, scale: f64, grad: &mut [f64]) -> Result<()> {
        let p1 = sigmoid(self.model.prior_logit.get(cx.params));
        self.model
            .prior_logit
            .accumulate(grad, scale * (bit(x)? as f64 - p1));
        Ok(())
    }

    fn atoms(&self) -> Option<Vec<Value>> {
        Some(BinaryLatentModel::atoms())
    }
}

/// Terminal strategy on a bit with one logit per outcome.
pub fn binary_terminal(l0: ParamRef, l1: ParamRef) -> Strategy {
    Strategy::terminal(
        DiscreteProposal::new(BinaryLatentModel::atoms(), vec![l0, l1]).expect("two logits"),
    )
}

/// Two-level strategy on a bit: `u ~ softmax(a)`, `x | u ~ softmax(b[u])`,
/// with meta-strategy `u | x ~ softmax(c[x])`.
#[derive(Clone, Debug)]
pub struct BinaryCompound {
    pub a: [ParamRef; 2],
    pub b: [[ParamRef; 2]; 2],
    pub c: [[ParamRef; 2]; 2],
}

impl BinaryCompound {
    fn dist(logits: &[ParamRef; 2]) -> DiscreteProposal {
        DiscreteProposal::new(BinaryLatentModel::atoms(), logits.to_vec()).expect("two logits")
    }

    pub fn strategy(self) -> Strategy {
        Strategy::compound(self)
    }
}

impl JointProposal for BinaryCompound {
    fn sample_joint(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<(Value, Value)> {
        let u = Self::dist(&self.a).sample(cx, ch)?;
        let x = Self::dist(&self.b[bit(&u)?]).sample(cx, ch)?;
        Ok((u, x))
    }

    fn log_joint_density(&self, cx: &Ctx, r: &Value, x: &Value) -> Result<f64> {
        Ok(Self::dist(&self.a).log_density(cx, r)?
            + Self::dist(&self.b[bit(r)?]).log_density(cx, x)?)
    }

    fn grad_log_joint_density(
        &self,
        cx: &Ctx,
        r: &Value,
        x: &Value,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        Self::dist(&self.a).grad_log_density(cx, r, scale, grad)?;
        Self::dist(&self.b[bit(r)?]).grad_log_density(cx, x, scale, grad)
    }

    fn meta(&self, _cx: &Ctx, x: &Value) -> Result<Strategy> {
        Ok(Strategy::terminal(Self::dist(&self.c[bit(x)?])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamStore;

    #[test]
    fn evidence_sums_over_observations() {
        let params = ParamStore::new();
        let cx = Ctx::new(&params);
        let m = BinaryLatentModel::new(ParamRef::Fixed(0.4), [0.2, 0.7]).unwrap();
        let total = logsumexp(&[m.log_evidence(&cx, 0), m.log_evidence(&cx, 1)]);
        assert!(total.abs() < 1e-14);
    }

    #[test]
    fn prior_gradient_matches_difference() {
        let mut params = ParamStore::new();
        let t = params.add("t", 0.3).unwrap();
        let m = Arc::new(BinaryLatentModel::new(t, [0.2, 0.7]).unwrap());
        let post = m.posterior(1);
        for x in BinaryLatentModel::atoms() {
            let mut g = vec![0.0];
            post.grad_log_density(&Ctx::new(&params), &x, 1.0, &mut g)
                .unwrap();
            let h = 1e-6;
            let f = |d: f64| {
                let p = params.perturbed(0, d);
                post.log_density(&Ctx::new(&p), &x).unwrap()
            };
            assert!((g[0] - (f(h) - f(-h)) / (2.0 * h)).abs() < 1e-8);
        }
    }
}
