//! N-particle importance sampling with a resampling step.

use std::sync::Arc;

use crate::choice::Choices;
use crate::error::{RaviError, Result};
use crate::importance::{
    grad_log_p_hme, grad_log_p_imp, log_p_hme, log_p_imp, sample_hme_aux, sample_imp,
    traced_log_weight,
};
use crate::math::{logsumexp, softmax};
use crate::strategy::{JointProposal, Proposal, Strategy};
use crate::target::{Ctx, Target};
use crate::value::Value;

/// `sir` with a terminal proposal `q`: the classical N-particle estimator.
pub fn sir(target: Arc<dyn Target>, q: Arc<dyn Proposal>, n: usize) -> Result<Strategy> {
    ravi_sir(target, Strategy::from_terminal(q), n)
}

/// N independent runs of `inner` followed by resampling one particle in
/// proportion to its weight. The importance weight is the mean of the N
/// inner estimates.
pub fn ravi_sir(target: Arc<dyn Target>, inner: Strategy, n: usize) -> Result<Strategy> {
    if n == 0 {
        return Err(RaviError::InvalidArgument(
            "sir needs at least one particle".into(),
        ));
    }
    Ok(Strategy::compound(ParticleIs {
        target,
        inner,
        n,
        fault: false,
    }))
}

/// [`sir`] with a deliberate defect: the sampler swaps the resampling
/// weights of the first two particles while densities stay correct. Used
/// as a negative control for the unbiasedness checks.
pub fn sir_fault_injected(
    target: Arc<dyn Target>,
    q: Arc<dyn Proposal>,
    n: usize,
) -> Result<Strategy> {
    if n < 2 {
        return Err(RaviError::InvalidArgument(
            "fault injection needs two particles".into(),
        ));
    }
    Ok(Strategy::compound(ParticleIs {
        target,
        inner: Strategy::from_terminal(q),
        n,
        fault: true,
    }))
}

#[derive(Clone)]
struct ParticleIs {
    target: Arc<dyn Target>,
    inner: Strategy,
    n: usize,
    fault: bool,
}

/// `r = [xs, vs, j]`.
fn pack(xs: Vec<Value>, vs: Vec<Value>, j: usize) -> Value {
    Value::list([Value::List(xs), Value::List(vs), Value::index(j)])
}

fn unpack(r: &Value) -> (&[Value], &[Value], usize) {
    (r.at(0).as_list(), r.at(1).as_list(), r.at(2).as_index())
}

impl ParticleIs {
    fn log_weights(&self, cx: &Ctx, xs: &[Value], vs: &[Value]) -> Result<Vec<f64>> {
        xs.iter()
            .zip(vs)
            .map(|(x, v)| traced_log_weight(cx, self.target.as_ref(), &self.inner, v, x))
            .collect()
    }

    fn well_formed(&self, r: &Value, x: &Value) -> bool {
        let (xs, vs, j) = unpack(r);
        xs.len() == self.n && vs.len() == self.n && j < self.n && xs[j] == *x
    }

    fn grad_log_weight(
        &self,
        cx: &Ctx,
        x: &Value,
        v: &Value,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        self.target.grad_log_density(cx, x, scale, grad)?;
        grad_log_p_hme(cx, &self.inner, v, x, scale, grad)?;
        grad_log_p_imp(cx, &self.inner, v, x, -scale, grad)
    }
}

impl JointProposal for ParticleIs {
    fn sample_joint(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<(Value, Value)> {
        let mut xs = Vec::with_capacity(self.n);
        let mut vs = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let (v, x) = sample_imp(cx, &self.inner, ch)?;
            xs.push(x);
            vs.push(v);
        }
        let mut lw = self.log_weights(cx, &xs, &vs)?;
        if self.fault {
            lw.swap(0, 1);
        }
        let j = ch.categorical(&lw)?;
        let x = xs[j].clone();
        Ok((pack(xs, vs, j), x))
    }

    fn log_joint_density(&self, cx: &Ctx, r: &Value, x: &Value) -> Result<f64> {
        if !self.well_formed(r, x) {
            return Ok(f64::NEG_INFINITY);
        }
        let (xs, vs, j) = unpack(r);
        let mut total = 0.0;
        for (xi, vi) in xs.iter().zip(vs) {
            total += log_p_imp(cx, &self.inner, vi, xi)?;
        }
        if total == f64::NEG_INFINITY {
            return Ok(total);
        }
        let lw = self.log_weights(cx, xs, vs)?;
        Ok(total + lw[j] - logsumexp(&lw))
    }

    fn grad_log_joint_density(
        &self,
        cx: &Ctx,
        r: &Value,
        x: &Value,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        if !self.well_formed(r, x) {
            return Ok(());
        }
        let (xs, vs, j) = unpack(r);
        for (xi, vi) in xs.iter().zip(vs) {
            grad_log_p_imp(cx, &self.inner, vi, xi, scale, grad)?;
        }
        let p = softmax(&self.log_weights(cx, xs, vs)?);
        for (i, (xi, vi)) in xs.iter().zip(vs).enumerate() {
            let coef = if i == j { 1.0 - p[i] } else { -p[i] };
            if coef != 0.0 {
                self.grad_log_weight(cx, xi, vi, scale * coef, grad)?;
            }
        }
        Ok(())
    }

    fn meta(&self, _cx: &Ctx, x: &Value) -> Result<Strategy> {
        Ok(Strategy::terminal(CondSir {
            base: self.clone(),
            x: x.clone(),
        }))
    }
}

/// Conditional SIR: the output is placed at a uniform index, the others are fresh.
struct CondSir {
    base: ParticleIs,
    x: Value,
}

impl Proposal for CondSir {
    fn sample(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<Value> {
        let n = self.base.n;
        let j = ch.uniform_index(n)?;
        let mut xs = Vec::with_capacity(n);
        let mut vs = Vec::with_capacity(n);
        for i in 0..n {
            if i == j {
                vs.push(sample_hme_aux(cx, &self.base.inner, &self.x, ch)?);
                xs.push(self.x.clone());
            } else {
                let (v, x) = sample_imp(cx, &self.base.inner, ch)?;
                xs.push(x);
                vs.push(v);
            }
        }
        Ok(pack(xs, vs, j))
    }

    fn log_density(&self, cx: &Ctx, r: &Value) -> Result<f64> {
        if !self.base.well_formed(r, &self.x) {
            return Ok(f64::NEG_INFINITY);
        }
        let (xs, vs, j) = unpack(r);
        let inner = &self.base.inner;
        let mut total = -(self.base.n as f64).ln() + log_p_hme(cx, inner, &vs[j], &self.x)?;
        for (i, (xi, vi)) in xs.iter().zip(vs).enumerate() {
            if i != j {
                total += log_p_imp(cx, inner, vi, xi)?;
            }
        }
        Ok(total)
    }

    fn grad_log_density(&self, cx: &Ctx, r: &Value, scale: f64, grad: &mut [f64]) -> Result<()> {
        if !self.base.well_formed(r, &self.x) {
            return Ok(());
        }
        let (xs, vs, j) = unpack(r);
        let inner = &self.base.inner;
        grad_log_p_hme(cx, inner, &vs[j], &self.x, scale, grad)?;
        for (i, (xi, vi)) in xs.iter().zip(vs).enumerate() {
            if i != j {
                grad_log_p_imp(cx, inner, vi, xi, scale, grad)?;
            }
        }
        Ok(())
    }
}
