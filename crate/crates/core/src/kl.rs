//! Stochastic upper bound on the symmetric KL divergence between the data
//! marginals of two latent-variable models.

use std::sync::Arc;

use crate::choice::Choices;
use crate::error::Result;
use crate::importance::{hme, importance};
use crate::strategy::Strategy;
use crate::target::{Ctx, Target};
use crate::value::Value;

/// A joint model `p(x, y)` that can be simulated and evaluated.
pub trait GenerativeModel: Send + Sync {
    /// Draws `(x, y)` from the joint.
    fn sample(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<(Value, Value)>;

    fn log_joint(&self, cx: &Ctx, x: &Value, y: &Value) -> Result<f64>;
}

/// `x ↦ log p(x, y)` at fixed `y`.
pub struct Posterior {
    pub model: Arc<dyn GenerativeModel>,
    pub y: Value,
}

impl Target for Posterior {
    fn log_density(&self, cx: &Ctx, x: &Value) -> Result<f64> {
        self.model.log_joint(cx, x, &self.y)
    }
}

type StrategyFamily = dyn Fn(&Ctx, &Value) -> Result<Strategy> + Send + Sync;

/// A model together with a strategy family targeting its posteriors.
#[derive(Clone)]
pub struct ModelWithStrategy {
    pub model: Arc<dyn GenerativeModel>,
    pub strategy: Arc<StrategyFamily>,
}

impl ModelWithStrategy {
    pub fn new<F>(model: Arc<dyn GenerativeModel>, strategy: F) -> Self
    where
        F: Fn(&Ctx, &Value) -> Result<Strategy> + Send + Sync + 'static,
    {
        Self {
            model,
            strategy: Arc::new(strategy),
        }
    }

    fn posterior(&self, y: &Value) -> Posterior {
        Posterior {
            model: self.model.clone(),
            y: y.clone(),
        }
    }
}

/// One draw of `D̂` with `E[D̂] ≥ KL(p‖q) + KL(q‖p)`.
///
/// `D̂ = (−log w_p(y_p) − log Ẑ_q(y_p)) + (−log w_q(y_q) − log Ẑ_p(y_q))`,
/// where `w` are harmonic-mean weights at the simulated latents and `Ẑ`
/// importance weights under the other model.
pub fn symmetric_kl_bound(
    cx: &Ctx,
    p: &ModelWithStrategy,
    q: &ModelWithStrategy,
    ch: &mut dyn Choices,
) -> Result<f64> {
    let (xp, yp) = p.model.sample(cx, ch)?;
    let (xq, yq) = q.model.sample(cx, ch)?;
    let w_pp = hme(cx, &p.posterior(&yp), &xp, &(p.strategy)(cx, &yp)?, ch)?;
    let w_qq = hme(cx, &q.posterior(&yq), &xq, &(q.strategy)(cx, &yq)?, ch)?;
    let z_qp = importance(cx, &q.posterior(&yp), &(q.strategy)(cx, &yp)?, ch)?.log_weight;
    let z_pq = importance(cx, &p.posterior(&yq), &(p.strategy)(cx, &yq)?, ch)?.log_weight;
    Ok((-w_pp - z_qp) + (-w_qq - z_pq))
}
