//! Annealed importance sampling; the meta-strategy runs the time reversals
//! of the annealing kernels.

use std::sync::Arc;

use crate::choice::Choices;
use crate::error::{RaviError, Result};
use crate::importance::{
    grad_log_p_hme, grad_log_p_imp, log_p_hme, log_p_imp, sample_hme_aux, sample_imp,
};
use crate::math::logsumexp;
use crate::strategy::{JointProposal, Proposal, Strategy};
use crate::target::{Ctx, Target};
use crate::value::Value;

use super::kernel::Kernel;

/// Tolerance on the mass of a finite time-reversal kernel.
const REVERSAL_TOL: f64 = 1e-9;

/// AIS over the ladder `targets`: `x_1` from `init`, then `x_{t+1} ~ kernels[t − 1](x_t)`.
/// `kernels[t]` must leave `targets[t]` invariant.
pub fn ais(
    targets: Vec<Arc<dyn Target>>,
    init: Strategy,
    kernels: Vec<Arc<dyn Kernel>>,
) -> Result<Strategy> {
    if targets.is_empty() || kernels.len() + 1 != targets.len() {
        return Err(RaviError::InvalidArgument(format!(
            "ais over {} targets needs {} kernels, got {}",
            targets.len(),
            targets.len().saturating_sub(1),
            kernels.len()
        )));
    }
    Ok(Strategy::compound(Ais(Arc::new(AisSpec {
        targets,
        init,
        kernels,
    }))))
}

struct AisSpec {
    targets: Vec<Arc<dyn Target>>,
    init: Strategy,
    kernels: Vec<Arc<dyn Kernel>>,
}

#[derive(Clone)]
struct Ais(Arc<AisSpec>);

impl AisSpec {
    /// `(path without the endpoint, v_init)` when `r` has the expected shape.
    fn split<'a>(&self, r: &'a Value) -> Option<(&'a [Value], &'a Value)> {
        match r {
            Value::List(p) if p.len() == 2 => match &p[0] {
                Value::List(xs) if xs.len() + 1 == self.targets.len() => Some((xs, &p[1])),
                _ => None,
            },
            _ => None,
        }
    }

    fn point<'a>(xs: &'a [Value], x: &'a Value, t: usize) -> &'a Value {
        xs.get(t).unwrap_or(x)
    }

    /// `log K̃_t(to → from)` for kernel index `t` (stationary for `targets[t]`).
    fn log_reverse(&self, cx: &Ctx, t: usize, from: &Value, to: &Value) -> Result<f64> {
        let k = &self.kernels[t];
        if k.reversible() {
            return k.log_density(cx, to, from);
        }
        if k.states().is_none() {
            return Err(RaviError::TimeReversalUnavailable(format!(
                "kernel {t} is neither reversible nor finite"
            )));
        }
        let pi = &self.targets[t];
        let tail = pi.log_density(cx, to)?;
        Ok(pi.log_density(cx, from)? + k.log_density(cx, from, to)? - tail)
    }

    fn grad_log_reverse(
        &self,
        cx: &Ctx,
        t: usize,
        from: &Value,
        to: &Value,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let k = &self.kernels[t];
        if k.reversible() {
            return k.grad_log_density(cx, to, from, scale, grad);
        }
        let pi = &self.targets[t];
        pi.grad_log_density(cx, from, scale, grad)?;
        k.grad_log_density(cx, from, to, scale, grad)?;
        pi.grad_log_density(cx, to, -scale, grad)
    }

    fn sample_reverse(
        &self,
        cx: &Ctx,
        t: usize,
        to: &Value,
        ch: &mut dyn Choices,
    ) -> Result<Value> {
        let k = &self.kernels[t];
        if k.reversible() {
            return k.sample(cx, to, ch);
        }
        let states = k.states().ok_or_else(|| {
            RaviError::TimeReversalUnavailable(format!(
                "kernel {t} is neither reversible nor finite"
            ))
        })?;
        let lw: Vec<f64> = states
            .iter()
            .map(|s| self.log_reverse(cx, t, s, to))
            .collect::<Result<_>>()?;
        let mass = logsumexp(&lw).exp();
        if (mass - 1.0).abs() > REVERSAL_TOL {
            return Err(RaviError::TimeReversalUnavailable(format!(
                "reversal of kernel {t} has mass {mass}; the kernel does not leave its target invariant"
            )));
        }
        Ok(states[ch.categorical(&lw)?].clone())
    }
}

impl JointProposal for Ais {
    fn sample_joint(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<(Value, Value)> {
        let s = &self.0;
        let (v, mut x) = sample_imp(cx, &s.init, ch)?;
        let mut xs = Vec::with_capacity(s.kernels.len());
        for k in &s.kernels {
            let next = k.sample(cx, &x, ch)?;
            xs.push(std::mem::replace(&mut x, next));
        }
        Ok((Value::pair(Value::List(xs), v), x))
    }

    fn log_joint_density(&self, cx: &Ctx, r: &Value, x: &Value) -> Result<f64> {
        let s = &self.0;
        let Some((xs, v)) = s.split(r) else {
            return Ok(f64::NEG_INFINITY);
        };
        let mut total = log_p_imp(cx, &s.init, v, AisSpec::point(xs, x, 0))?;
        for (t, k) in s.kernels.iter().enumerate() {
            total += k.log_density(cx, &xs[t], AisSpec::point(xs, x, t + 1))?;
        }
        Ok(total)
    }

    fn grad_log_joint_density(
        &self,
        cx: &Ctx,
        r: &Value,
        x: &Value,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let s = &self.0;
        let Some((xs, v)) = s.split(r) else {
            return Ok(());
        };
        grad_log_p_imp(cx, &s.init, v, AisSpec::point(xs, x, 0), scale, grad)?;
        for (t, k) in s.kernels.iter().enumerate() {
            k.grad_log_density(cx, &xs[t], AisSpec::point(xs, x, t + 1), scale, grad)?;
        }
        Ok(())
    }

    fn meta(&self, _cx: &Ctx, x: &Value) -> Result<Strategy> {
        Ok(Strategy::terminal(AisReverse {
            ais: self.clone(),
            x: x.clone(),
        }))
    }
}

/// Runs the reversed kernels back from `x`, then the initial strategy's
/// harmonic-mean auxiliaries at `x_1`.
struct AisReverse {
    ais: Ais,
    x: Value,
}

impl Proposal for AisReverse {
    fn sample(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<Value> {
        let s = &self.ais.0;
        let m = s.kernels.len();
        let mut xs = vec![Value::Unit; m];
        let mut cur = self.x.clone();
        for t in (0..m).rev() {
            let prev = s.sample_reverse(cx, t, &cur, ch)?;
            xs[t] = prev.clone();
            cur = prev;
        }
        let v = sample_hme_aux(cx, &s.init, &cur, ch)?;
        Ok(Value::pair(Value::List(xs), v))
    }

    fn log_density(&self, cx: &Ctx, r: &Value) -> Result<f64> {
        let s = &self.ais.0;
        let Some((xs, v)) = s.split(r) else {
            return Ok(f64::NEG_INFINITY);
        };
        let mut total = log_p_hme(cx, &s.init, v, AisSpec::point(xs, &self.x, 0))?;
        for t in 0..s.kernels.len() {
            total += s.log_reverse(cx, t, &xs[t], AisSpec::point(xs, &self.x, t + 1))?;
        }
        Ok(total)
    }

    fn grad_log_density(&self, cx: &Ctx, r: &Value, scale: f64, grad: &mut [f64]) -> Result<()> {
        let s = &self.ais.0;
        let Some((xs, v)) = s.split(r) else {
            return Ok(());
        };
        grad_log_p_hme(cx, &s.init, v, AisSpec::point(xs, &self.x, 0), scale, grad)?;
        for t in 0..s.kernels.len() {
            s.grad_log_reverse(
                cx,
                t,
                &xs[t],
                AisSpec::point(xs, &self.x, t + 1),
                scale,
                grad,
            )?;
        }
        Ok(())
    }
}
