//! Score-function ELBO and EUBO estimators with gradients.

use crate::choice::Choices;
use crate::error::Result;
use crate::importance::{
    check_hme_kind, check_importance_kind, proposal_at_input, proposal_at_sample, target_at_input,
    target_at_sample,
};
use crate::params::GradientEstimate;
use crate::strategy::{JointSlice, Node, Strategy};
use crate::target::{Ctx, Target};
use crate::value::Value;

fn grad_of(cx: &Ctx, f: impl FnOnce(&mut [f64]) -> Result<()>) -> Result<Vec<f64>> {
    let mut g = cx.params.zeros();
    f(&mut g)?;
    Ok(g)
}

fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    if a == 0.0 {
        return;
    }
    for (o, xi) in out.iter_mut().zip(x) {
        *o += a * xi;
    }
}

/// Unbiased estimate of the ELBO `E[log Ẑ]` and its parameter gradient.
///
/// `model` is `x ↦ log p(x, y)` at the observed `y`. `score_g` holds the
/// score of the sampled proposal path, which has mean zero and is the
/// direction a baseline subtracts.
pub fn elbo_grad(
    cx: &Ctx,
    model: &dyn Target,
    s: &Strategy,
    ch: &mut dyn Choices,
) -> Result<GradientEstimate> {
    check_importance_kind(s)?;
    let (x, u_hat, grad_hat, g) = match &s.node {
        Node::Terminal(q) => {
            let x = q.sample(cx, ch)?;
            let lq = proposal_at_sample(q.log_density(cx, &x)?, &x)?;
            let score = grad_of(cx, |gr| q.grad_log_density(cx, &x, 1.0, gr))?;
            let grad_hat: Vec<f64> = score.iter().map(|s| s * (1.0 + lq)).collect();
            (x, lq, grad_hat, score)
        }
        Node::Compound(j) => {
            let (r, x) = j.sample_joint(cx, ch)?;
            let meta = j.meta(cx, &x)?;
            let slice = JointSlice::new(j.clone(), x.clone());
            let inner = eubo_grad(cx, &slice, &r, &meta, ch)?;
            (x, inner.objective, inner.grad, inner.score_g)
        }
    };
    let lp = target_at_sample(cx, model, &x, s.kind)?;
    let mut grad = grad_of(cx, |gr| model.grad_log_density(cx, &x, 1.0, gr))?;
    axpy(&mut grad, lp, &g);
    axpy(&mut grad, -1.0, &grad_hat);
    Ok(GradientEstimate {
        objective: lp - u_hat,
        grad,
        score_g: g,
    })
}

/// Unbiased estimate of the EUBO at an exact posterior sample `x`, its
/// gradient, and the score `g = ∇θ log p(x, y)`.
pub fn eubo_grad(
    cx: &Ctx,
    model: &dyn Target,
    x: &Value,
    s: &Strategy,
    ch: &mut dyn Choices,
) -> Result<GradientEstimate> {
    check_hme_kind(s)?;
    let lp = target_at_input(cx, model, x)?;
    let (l_hat, grad_hat) = match &s.node {
        Node::Terminal(q) => {
            let lq = proposal_at_input(cx, q.log_density(cx, x)?, x, s.kind)?;
            let score = grad_of(cx, |gr| q.grad_log_density(cx, x, 1.0, gr))?;
            (lq, score)
        }
        Node::Compound(j) => {
            let meta = j.meta(cx, x)?;
            let slice = JointSlice::new(j.clone(), x.clone());
            let inner = elbo_grad(cx, &slice, &meta, ch)?;
            (inner.objective, inner.grad)
        }
    };
    let u_hat = lp - l_hat;
    let g = grad_of(cx, |gr| model.grad_log_density(cx, x, 1.0, gr))?;
    let mut grad = g.clone();
    axpy(&mut grad, u_hat, &g);
    axpy(&mut grad, -1.0, &grad_hat);
    Ok(GradientEstimate {
        objective: u_hat,
        grad,
        score_g: g,
    })
}

/// Scalar exponential-moving-average baseline for score-function gradients.
#[derive(Clone, Debug)]
pub struct Baseline {
    pub value: f64,
    pub decay: f64,
    initialized: bool,
}

impl Baseline {
    pub fn new(decay: f64) -> Self {
        Self {
            value: 0.0,
            decay,
            initialized: false,
        }
    }

    /// Subtracts `b · score_g` from the gradient using the value from
    /// earlier estimates, then folds in this estimate's objective.
    pub fn apply(&mut self, est: &mut GradientEstimate) {
        if self.initialized {
            axpy(&mut est.grad, -self.value, &est.score_g);
            self.value = self.decay * self.value + (1.0 - self.decay) * est.objective;
        } else {
            self.value = est.objective;
            self.initialized = true;
        }
    }
}
