//! Recursive importance sampling and harmonic-mean estimation.
//!
//! The traced variants also return the complete auxiliary trace `v` of the
//! call: `()` for a terminal node and `[r, v_meta]` for a compound node.
//! [`log_p_imp`] and [`log_p_hme`] evaluate the densities of those traces,
//! which lets strategies nest estimator calls inside their own proposals.

use std::sync::Arc;

use crate::choice::Choices;
use crate::error::{RaviError, Result};
use crate::strategy::{JointProposal, JointSlice, Node, Strategy, SupportKind};
use crate::target::{Ctx, Target};
use crate::value::Value;

/// Output of [`importance`]: a sample and its log weight `log Ẑ`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSample {
    pub x: Value,
    pub log_weight: f64,
}

pub(crate) fn check_importance_kind(s: &Strategy) -> Result<()> {
    if s.kind.allows_importance() {
        Ok(())
    } else {
        Err(RaviError::KindMismatch(
            "narrow strategy used as an importance proposal".into(),
        ))
    }
}

pub(crate) fn check_hme_kind(s: &Strategy) -> Result<()> {
    if s.kind.allows_hme() {
        Ok(())
    } else {
        Err(RaviError::KindMismatch(
            "wide strategy used for harmonic-mean estimation".into(),
        ))
    }
}

/// Target log-density at a point sampled from a proposal.
pub(crate) fn target_at_sample(
    cx: &Ctx,
    target: &dyn Target,
    x: &Value,
    kind: SupportKind,
) -> Result<f64> {
    let lp = target.log_density(cx, x)?;
    if lp.is_nan() || lp == f64::INFINITY {
        return Err(RaviError::SupportViolation(format!(
            "target log-density {lp} at {x}"
        )));
    }
    if lp == f64::NEG_INFINITY && !(cx.relax_support && kind == SupportKind::Wide) {
        return Err(RaviError::SupportViolation(format!(
            "target has zero density at proposed {x}"
        )));
    }
    Ok(lp)
}

/// Proposal log-density at a point it produced.
pub(crate) fn proposal_at_sample(lq: f64, x: &Value) -> Result<f64> {
    if lq.is_finite() {
        Ok(lq)
    } else {
        Err(RaviError::SupportViolation(format!(
            "proposal log-density {lq} at its own sample {x}"
        )))
    }
}

/// Target log-density at an input point that must lie in its support.
pub(crate) fn target_at_input(cx: &Ctx, target: &dyn Target, x: &Value) -> Result<f64> {
    let lp = target.log_density(cx, x)?;
    if !lp.is_finite() {
        return Err(RaviError::SupportViolation(format!(
            "target log-density {lp} at input {x}"
        )));
    }
    Ok(lp)
}

/// Proposal log-density at a point drawn from the target.
pub(crate) fn proposal_at_input(cx: &Ctx, lq: f64, x: &Value, kind: SupportKind) -> Result<f64> {
    if lq.is_nan() || lq == f64::INFINITY {
        return Err(RaviError::SupportViolation(format!(
            "proposal log-density {lq} at {x}"
        )));
    }
    if lq == f64::NEG_INFINITY && !(cx.relax_support && kind == SupportKind::Narrow) {
        return Err(RaviError::SupportViolation(format!(
            "proposal has zero density at target point {x}"
        )));
    }
    Ok(lq)
}

fn slice(j: &Arc<dyn JointProposal>, x: &Value) -> JointSlice {
    JointSlice::new(j.clone(), x.clone())
}

/// Recursive importance sampling: `x ~ S.q` with `E[Ẑ | x] = π̃(x) / S.q(x)`.
pub fn importance(
    cx: &Ctx,
    target: &dyn Target,
    s: &Strategy,
    ch: &mut dyn Choices,
) -> Result<WeightedSample> {
    importance_traced(cx, target, s, ch).map(|(ws, _)| ws)
}

/// Recursive harmonic-mean estimation: `log w` with `E[w] = 1/Z` for `x ~ π`.
pub fn hme(
    cx: &Ctx,
    target: &dyn Target,
    x: &Value,
    s: &Strategy,
    ch: &mut dyn Choices,
) -> Result<f64> {
    hme_traced(cx, target, x, s, ch).map(|(lw, _)| lw)
}

/// [`importance`] that also returns the auxiliary trace.
pub fn importance_traced(
    cx: &Ctx,
    target: &dyn Target,
    s: &Strategy,
    ch: &mut dyn Choices,
) -> Result<(WeightedSample, Value)> {
    check_importance_kind(s)?;
    match &s.node {
        Node::Terminal(q) => {
            let x = q.sample(cx, ch)?;
            let lq = proposal_at_sample(q.log_density(cx, &x)?, &x)?;
            let lp = target_at_sample(cx, target, &x, s.kind)?;
            Ok((
                WeightedSample {
                    x,
                    log_weight: lp - lq,
                },
                Value::Unit,
            ))
        }
        Node::Compound(j) => {
            let (r, x) = j.sample_joint(cx, ch)?;
            let meta = j.meta(cx, &x)?;
            let (lw, vm) = hme_traced(cx, &slice(j, &x), &r, &meta, ch)?;
            let lp = target_at_sample(cx, target, &x, s.kind)?;
            Ok((
                WeightedSample {
                    x,
                    log_weight: lp + lw,
                },
                Value::pair(r, vm),
            ))
        }
    }
}

/// [`hme`] that also returns the auxiliary trace.
pub fn hme_traced(
    cx: &Ctx,
    target: &dyn Target,
    x: &Value,
    s: &Strategy,
    ch: &mut dyn Choices,
) -> Result<(f64, Value)> {
    check_hme_kind(s)?;
    let lp = target_at_input(cx, target, x)?;
    match &s.node {
        Node::Terminal(q) => {
            let lq = proposal_at_input(cx, q.log_density(cx, x)?, x, s.kind)?;
            Ok((lq - lp, Value::Unit))
        }
        Node::Compound(j) => {
            let meta = j.meta(cx, x)?;
            let (ws, vm) = importance_traced(cx, &slice(j, x), &meta, ch)?;
            let aux = Value::pair(ws.x, vm);
            Ok((ws.log_weight - lp, aux))
        }
    }
}

/// Log-density of the randomness `(v, x)` consumed by [`importance_traced`].
pub fn log_p_imp(cx: &Ctx, s: &Strategy, v: &Value, x: &Value) -> Result<f64> {
    match &s.node {
        Node::Terminal(q) => q.log_density(cx, x),
        Node::Compound(j) => {
            let r = v.at(0);
            let lj = j.log_joint_density(cx, r, x)?;
            if lj == f64::NEG_INFINITY {
                return Ok(lj);
            }
            let meta = j.meta(cx, x)?;
            Ok(lj + log_p_hme(cx, &meta, v.at(1), r)?)
        }
    }
}

/// Log-density of the randomness `v` consumed by [`hme_traced`] at input `x`.
pub fn log_p_hme(cx: &Ctx, s: &Strategy, v: &Value, x: &Value) -> Result<f64> {
    match &s.node {
        Node::Terminal(_) => Ok(0.0),
        Node::Compound(j) => {
            let meta = j.meta(cx, x)?;
            log_p_imp(cx, &meta, v.at(1), v.at(0))
        }
    }
}

/// Adds `scale · ∇θ log p_imp(v, x)` into `grad`.
pub fn grad_log_p_imp(
    cx: &Ctx,
    s: &Strategy,
    v: &Value,
    x: &Value,
    scale: f64,
    grad: &mut [f64],
) -> Result<()> {
    match &s.node {
        Node::Terminal(q) => q.grad_log_density(cx, x, scale, grad),
        Node::Compound(j) => {
            let r = v.at(0);
            j.grad_log_joint_density(cx, r, x, scale, grad)?;
            let meta = j.meta(cx, x)?;
            grad_log_p_hme(cx, &meta, v.at(1), r, scale, grad)
        }
    }
}

/// Adds `scale · ∇θ log p_hme(v; x)` into `grad`.
pub fn grad_log_p_hme(
    cx: &Ctx,
    s: &Strategy,
    v: &Value,
    x: &Value,
    scale: f64,
    grad: &mut [f64],
) -> Result<()> {
    match &s.node {
        Node::Terminal(_) => Ok(()),
        Node::Compound(j) => {
            let meta = j.meta(cx, x)?;
            grad_log_p_imp(cx, &meta, v.at(1), v.at(0), scale, grad)
        }
    }
}

/// `log Ẑ` recomputed from a trace: `log π̃(x) + log p_hme(v; x) − log p_imp(v, x)`.
pub fn traced_log_weight(
    cx: &Ctx,
    target: &dyn Target,
    s: &Strategy,
    v: &Value,
    x: &Value,
) -> Result<f64> {
    Ok(target.log_density(cx, x)? + log_p_hme(cx, s, v, x)? - log_p_imp(cx, s, v, x)?)
}

/// Draws `(v, x)` from the law of [`importance_traced`] without evaluating a target.
pub fn sample_imp(cx: &Ctx, s: &Strategy, ch: &mut dyn Choices) -> Result<(Value, Value)> {
    match &s.node {
        Node::Terminal(q) => Ok((Value::Unit, q.sample(cx, ch)?)),
        Node::Compound(j) => {
            let (r, x) = j.sample_joint(cx, ch)?;
            let meta = j.meta(cx, &x)?;
            let vm = sample_hme_aux(cx, &meta, &r, ch)?;
            Ok((Value::pair(r, vm), x))
        }
    }
}

/// Draws `v` from the law of [`hme_traced`] at input `x` without evaluating a target.
pub fn sample_hme_aux(cx: &Ctx, s: &Strategy, x: &Value, ch: &mut dyn Choices) -> Result<Value> {
    match &s.node {
        Node::Terminal(_) => Ok(Value::Unit),
        Node::Compound(j) => {
            let meta = j.meta(cx, x)?;
            let (vm, r) = sample_imp(cx, &meta, ch)?;
            Ok(Value::pair(r, vm))
        }
    }
}

/// `log w` of [`hme`] recomputed from a trace: `log p_imp(v, x) − log p_hme(v; x) − log π̃(x)`.
pub fn traced_hme_log_weight(
    cx: &Ctx,
    target: &dyn Target,
    s: &Strategy,
    v: &Value,
    x: &Value,
) -> Result<f64> {
    Ok(log_p_imp(cx, s, v, x)? - log_p_hme(cx, s, v, x)? - target.log_density(cx, x)?)
}
