//! Sequential Monte Carlo whose proposals, kernels and backward kernels are
//! themselves strategies. The meta-strategy is conditional SMC.

use std::sync::Arc;

use crate::choice::Choices;
use crate::error::{RaviError, Result};
use crate::importance::{
    grad_log_p_hme, grad_log_p_imp, log_p_hme, log_p_imp, sample_hme_aux, sample_imp,
    traced_hme_log_weight, traced_log_weight,
};
use crate::math::{logsumexp, softmax};
use crate::strategy::{JointProposal, Proposal, Strategy};
use crate::target::{Ctx, Target};
use crate::value::Value;

/// A strategy indexed by a conditioning value.
pub type StrategyFamily = Arc<dyn Fn(&Ctx, &Value) -> Result<Strategy> + Send + Sync>;

/// N-particle SMC over the ladder `targets` with multinomial resampling at
/// every step. `forward[t]` maps a particle at step `t` to a strategy
/// targeting `targets[t + 1]`; `backward[t]` maps a particle at step `t + 1`
/// to a strategy over step `t`.
pub fn smc(
    targets: Vec<Arc<dyn Target>>,
    init: Strategy,
    forward: Vec<StrategyFamily>,
    backward: Vec<StrategyFamily>,
    n: usize,
) -> Result<Strategy> {
    if targets.is_empty() || n == 0 {
        return Err(RaviError::InvalidArgument(
            "smc needs a target and a particle".into(),
        ));
    }
    if forward.len() + 1 != targets.len() || backward.len() + 1 != targets.len() {
        return Err(RaviError::InvalidArgument(format!(
            "smc over {} targets needs {} forward and backward families",
            targets.len(),
            targets.len() - 1
        )));
    }
    Ok(Strategy::compound(Smc(Arc::new(SmcSpec {
        targets,
        init,
        forward,
        backward,
        n,
    }))))
}

struct SmcSpec {
    targets: Vec<Arc<dyn Target>>,
    init: Strategy,
    forward: Vec<StrategyFamily>,
    backward: Vec<StrategyFamily>,
    n: usize,
}

#[derive(Clone)]
struct Smc(Arc<SmcSpec>);

/// All auxiliary variables of one SMC run. Step-indexed vectors of kernel
/// traces and ancestors are offset by one: entry `t − 1` belongs to step `t`.
struct Trace {
    xs: Vec<Vec<Value>>,
    vs: Vec<Value>,
    vk: Vec<Vec<Value>>,
    vl: Vec<Vec<Value>>,
    anc: Vec<Vec<usize>>,
    j: usize,
}

fn nested(rows: &[Vec<Value>]) -> Value {
    Value::list(rows.iter().map(|r| Value::List(r.clone())))
}

impl Trace {
    fn blank(steps: usize, n: usize) -> Self {
        let row = vec![Value::Unit; n];
        Self {
            xs: vec![row.clone(); steps],
            vs: row.clone(),
            vk: vec![row.clone(); steps - 1],
            vl: vec![row; steps - 1],
            anc: vec![vec![0; n]; steps - 1],
            j: 0,
        }
    }

    fn to_value(&self) -> Value {
        Value::list([
            nested(&self.xs),
            Value::List(self.vs.clone()),
            nested(&self.vk),
            nested(&self.vl),
            Value::list(self.anc.iter().map(|a| Value::indices(a))),
            Value::index(self.j),
        ])
    }

    fn from_value(r: &Value, steps: usize, n: usize) -> Option<Self> {
        let Value::List(parts) = r else { return None };
        if parts.len() != 6 {
            return None;
        }
        let rows = |v: &Value, len: usize| -> Option<Vec<Vec<Value>>> {
            let Value::List(rs) = v else { return None };
            if rs.len() != len {
                return None;
            }
            rs.iter()
                .map(|row| match row {
                    Value::List(xs) if xs.len() == n => Some(xs.clone()),
                    _ => None,
                })
                .collect()
        };
        let xs = rows(&parts[0], steps)?;
        let vs = match &parts[1] {
            Value::List(v) if v.len() == n => v.clone(),
            _ => return None,
        };
        let vk = rows(&parts[2], steps - 1)?;
        let vl = rows(&parts[3], steps - 1)?;
        let anc_rows = rows(&parts[4], steps - 1)?;
        let mut anc = Vec::with_capacity(steps - 1);
        for row in anc_rows {
            let mut a = Vec::with_capacity(n);
            for v in row {
                match v {
                    Value::Int(i) if i >= 0 && (i as usize) < n => a.push(i as usize),
                    _ => return None,
                }
            }
            anc.push(a);
        }
        let j = match parts[5] {
            Value::Int(j) if j >= 0 && (j as usize) < n => j as usize,
            _ => return None,
        };
        Some(Self {
            xs,
            vs,
            vk,
            vl,
            anc,
            j,
        })
    }
}

impl SmcSpec {
    fn steps(&self) -> usize {
        self.targets.len()
    }

    fn parent<'a>(&self, tr: &'a Trace, t: usize, i: usize) -> &'a Value {
        &tr.xs[t - 1][tr.anc[t - 1][i]]
    }

    fn kernels(
        &self,
        cx: &Ctx,
        t: usize,
        parent: &Value,
        x: &Value,
    ) -> Result<(Strategy, Strategy)> {
        Ok((
            (self.forward[t - 1])(cx, parent)?,
            (self.backward[t - 1])(cx, x)?,
        ))
    }

    /// Incremental log weight of particle `i` at step `t`.
    fn log_weight(&self, cx: &Ctx, tr: &Trace, t: usize, i: usize) -> Result<f64> {
        let x = &tr.xs[t][i];
        if t == 0 {
            return traced_log_weight(cx, self.targets[0].as_ref(), &self.init, &tr.vs[i], x);
        }
        let parent = self.parent(tr, t, i);
        let (k, l) = self.kernels(cx, t, parent, x)?;
        Ok(
            traced_log_weight(cx, self.targets[t].as_ref(), &k, &tr.vk[t - 1][i], x)?
                + traced_hme_log_weight(
                    cx,
                    self.targets[t - 1].as_ref(),
                    &l,
                    &tr.vl[t - 1][i],
                    parent,
                )?,
        )
    }

    fn grad_log_weight(
        &self,
        cx: &Ctx,
        tr: &Trace,
        t: usize,
        i: usize,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let x = &tr.xs[t][i];
        if t == 0 {
            let v = &tr.vs[i];
            self.targets[0].grad_log_density(cx, x, scale, grad)?;
            grad_log_p_hme(cx, &self.init, v, x, scale, grad)?;
            return grad_log_p_imp(cx, &self.init, v, x, -scale, grad);
        }
        let parent = self.parent(tr, t, i);
        let (k, l) = self.kernels(cx, t, parent, x)?;
        let (vk, vl) = (&tr.vk[t - 1][i], &tr.vl[t - 1][i]);
        self.targets[t].grad_log_density(cx, x, scale, grad)?;
        grad_log_p_hme(cx, &k, vk, x, scale, grad)?;
        grad_log_p_imp(cx, &k, vk, x, -scale, grad)?;
        grad_log_p_imp(cx, &l, vl, parent, scale, grad)?;
        grad_log_p_hme(cx, &l, vl, parent, -scale, grad)?;
        self.targets[t - 1].grad_log_density(cx, parent, -scale, grad)
    }

    fn all_log_weights(&self, cx: &Ctx, tr: &Trace) -> Result<Vec<Vec<f64>>> {
        (0..self.steps())
            .map(|t| (0..self.n).map(|i| self.log_weight(cx, tr, t, i)).collect())
            .collect()
    }

    /// Density of the free (forward-sampled) randomness of particle `i` at step `t`.
    fn free_density(&self, cx: &Ctx, tr: &Trace, t: usize, i: usize) -> Result<f64> {
        let x = &tr.xs[t][i];
        if t == 0 {
            return log_p_imp(cx, &self.init, &tr.vs[i], x);
        }
        let parent = self.parent(tr, t, i);
        let (k, l) = self.kernels(cx, t, parent, x)?;
        Ok(log_p_imp(cx, &k, &tr.vk[t - 1][i], x)? + log_p_hme(cx, &l, &tr.vl[t - 1][i], parent)?)
    }

    fn grad_free_density(
        &self,
        cx: &Ctx,
        tr: &Trace,
        t: usize,
        i: usize,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let x = &tr.xs[t][i];
        if t == 0 {
            return grad_log_p_imp(cx, &self.init, &tr.vs[i], x, scale, grad);
        }
        let parent = self.parent(tr, t, i);
        let (k, l) = self.kernels(cx, t, parent, x)?;
        grad_log_p_imp(cx, &k, &tr.vk[t - 1][i], x, scale, grad)?;
        grad_log_p_hme(cx, &l, &tr.vl[t - 1][i], parent, scale, grad)
    }

    /// Density of the conditioned randomness along the pinned path at step `t`.
    fn pinned_density(&self, cx: &Ctx, tr: &Trace, t: usize, b: usize) -> Result<f64> {
        let x = &tr.xs[t][b];
        if t == 0 {
            return log_p_hme(cx, &self.init, &tr.vs[b], x);
        }
        let parent = self.parent(tr, t, b);
        let (k, l) = self.kernels(cx, t, parent, x)?;
        Ok(log_p_imp(cx, &l, &tr.vl[t - 1][b], parent)? + log_p_hme(cx, &k, &tr.vk[t - 1][b], x)?)
    }

    fn grad_pinned_density(
        &self,
        cx: &Ctx,
        tr: &Trace,
        t: usize,
        b: usize,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let x = &tr.xs[t][b];
        if t == 0 {
            return grad_log_p_hme(cx, &self.init, &tr.vs[b], x, scale, grad);
        }
        let parent = self.parent(tr, t, b);
        let (k, l) = self.kernels(cx, t, parent, x)?;
        grad_log_p_imp(cx, &l, &tr.vl[t - 1][b], parent, scale, grad)?;
        grad_log_p_hme(cx, &k, &tr.vk[t - 1][b], x, scale, grad)
    }

    /// Indices of the pinned path, read back from the ancestors.
    fn pinned_path(&self, tr: &Trace) -> Vec<usize> {
        let steps = self.steps();
        let mut b = vec![0; steps];
        b[steps - 1] = tr.j;
        for t in (1..steps).rev() {
            b[t - 1] = tr.anc[t - 1][b[t]];
        }
        b
    }

    /// Samples particle `i` at step `t` forward, given all weights before `t`.
    fn extend(
        &self,
        cx: &Ctx,
        tr: &mut Trace,
        lw: &[Vec<f64>],
        t: usize,
        i: usize,
        ch: &mut dyn Choices,
    ) -> Result<()> {
        if t == 0 {
            let (v, x) = sample_imp(cx, &self.init, ch)?;
            tr.vs[i] = v;
            tr.xs[0][i] = x;
            return Ok(());
        }
        let a = ch.categorical(&lw[t - 1])?;
        tr.anc[t - 1][i] = a;
        let parent = tr.xs[t - 1][a].clone();
        let k = (self.forward[t - 1])(cx, &parent)?;
        let (vk, x) = sample_imp(cx, &k, ch)?;
        let l = (self.backward[t - 1])(cx, &x)?;
        tr.vl[t - 1][i] = sample_hme_aux(cx, &l, &parent, ch)?;
        tr.vk[t - 1][i] = vk;
        tr.xs[t][i] = x;
        Ok(())
    }

    /// Log-density of the resampling and selection choices of all particles
    /// except those listed in `skip` (one index per step, `usize::MAX` for none).
    fn selection_density(&self, tr: &Trace, lw: &[Vec<f64>], skip: &[usize], with_j: bool) -> f64 {
        let mut total = 0.0;
        for t in 1..self.steps() {
            let z = logsumexp(&lw[t - 1]);
            for i in 0..self.n {
                if i != skip[t] {
                    total += lw[t - 1][tr.anc[t - 1][i]] - z;
                }
            }
        }
        if with_j {
            let last = &lw[self.steps() - 1];
            total += last[tr.j] - logsumexp(last);
        }
        total
    }

    /// Gradient of [`Self::selection_density`].
    fn grad_selection(
        &self,
        cx: &Ctx,
        tr: &Trace,
        lw: &[Vec<f64>],
        skip: &[usize],
        with_j: bool,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let steps = self.steps();
        let mut coef = vec![vec![0.0; self.n]; steps];
        for t in 1..steps {
            let p = softmax(&lw[t - 1]);
            for i in 0..self.n {
                if i != skip[t] {
                    coef[t - 1][tr.anc[t - 1][i]] += 1.0;
                    for (c, pm) in coef[t - 1].iter_mut().zip(&p) {
                        *c -= pm;
                    }
                }
            }
        }
        if with_j {
            let p = softmax(&lw[steps - 1]);
            coef[steps - 1][tr.j] += 1.0;
            for (c, pm) in coef[steps - 1].iter_mut().zip(&p) {
                *c -= pm;
            }
        }
        for (t, row) in coef.iter().enumerate() {
            for (m, c) in row.iter().enumerate() {
                if *c != 0.0 {
                    self.grad_log_weight(cx, tr, t, m, scale * c, grad)?;
                }
            }
        }
        Ok(())
    }
}

impl Smc {
    fn parse(&self, r: &Value, x: &Value) -> Option<Trace> {
        let s = &self.0;
        Trace::from_value(r, s.steps(), s.n).filter(|tr| tr.xs[s.steps() - 1][tr.j] == *x)
    }
}

impl JointProposal for Smc {
    fn sample_joint(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<(Value, Value)> {
        let s = &self.0;
        let mut tr = Trace::blank(s.steps(), s.n);
        let mut lw: Vec<Vec<f64>> = Vec::with_capacity(s.steps());
        for t in 0..s.steps() {
            for i in 0..s.n {
                s.extend(cx, &mut tr, &lw, t, i, ch)?;
            }
            lw.push(
                (0..s.n)
                    .map(|i| s.log_weight(cx, &tr, t, i))
                    .collect::<Result<_>>()?,
            );
        }
        tr.j = ch.categorical(&lw[s.steps() - 1])?;
        let x = tr.xs[s.steps() - 1][tr.j].clone();
        Ok((tr.to_value(), x))
    }

    fn log_joint_density(&self, cx: &Ctx, r: &Value, x: &Value) -> Result<f64> {
        let s = &self.0;
        let Some(tr) = self.parse(r, x) else {
            return Ok(f64::NEG_INFINITY);
        };
        let mut total = 0.0;
        for t in 0..s.steps() {
            for i in 0..s.n {
                total += s.free_density(cx, &tr, t, i)?;
            }
        }
        if total == f64::NEG_INFINITY {
            return Ok(total);
        }
        let lw = s.all_log_weights(cx, &tr)?;
        Ok(total + s.selection_density(&tr, &lw, &vec![usize::MAX; s.steps()], true))
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
        let Some(tr) = self.parse(r, x) else {
            return Ok(());
        };
        for t in 0..s.steps() {
            for i in 0..s.n {
                s.grad_free_density(cx, &tr, t, i, scale, grad)?;
            }
        }
        let lw = s.all_log_weights(cx, &tr)?;
        s.grad_selection(
            cx,
            &tr,
            &lw,
            &vec![usize::MAX; s.steps()],
            true,
            scale,
            grad,
        )
    }

    fn meta(&self, _cx: &Ctx, x: &Value) -> Result<Strategy> {
        Ok(Strategy::terminal(CondSmc {
            smc: self.clone(),
            x: x.clone(),
        }))
    }
}

/// Conditional SMC with one particle pinned to a path ending at `x`.
struct CondSmc {
    smc: Smc,
    x: Value,
}

impl Proposal for CondSmc {
    fn sample(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<Value> {
        let s = &self.smc.0;
        let steps = s.steps();
        let mut tr = Trace::blank(steps, s.n);
        let mut b = vec![0; steps];
        tr.j = ch.uniform_index(s.n)?;
        b[steps - 1] = tr.j;
        tr.xs[steps - 1][tr.j] = self.x.clone();
        for t in (1..steps).rev() {
            let a = ch.uniform_index(s.n)?;
            tr.anc[t - 1][b[t]] = a;
            b[t - 1] = a;
            let xt = tr.xs[t][b[t]].clone();
            let l = (s.backward[t - 1])(cx, &xt)?;
            let (vl, prev) = sample_imp(cx, &l, ch)?;
            let k = (s.forward[t - 1])(cx, &prev)?;
            tr.vk[t - 1][b[t]] = sample_hme_aux(cx, &k, &xt, ch)?;
            tr.vl[t - 1][b[t]] = vl;
            tr.xs[t - 1][a] = prev;
        }
        tr.vs[b[0]] = sample_hme_aux(cx, &s.init, &tr.xs[0][b[0]], ch)?;
        let mut lw: Vec<Vec<f64>> = Vec::with_capacity(steps);
        for t in 0..steps {
            for i in 0..s.n {
                if i != b[t] {
                    s.extend(cx, &mut tr, &lw, t, i, ch)?;
                }
            }
            lw.push(
                (0..s.n)
                    .map(|i| s.log_weight(cx, &tr, t, i))
                    .collect::<Result<_>>()?,
            );
        }
        Ok(tr.to_value())
    }

    fn log_density(&self, cx: &Ctx, r: &Value) -> Result<f64> {
        let s = &self.smc.0;
        let Some(tr) = self.smc.parse(r, &self.x) else {
            return Ok(f64::NEG_INFINITY);
        };
        let b = s.pinned_path(&tr);
        let log_n = (s.n as f64).ln();
        let mut total = -(s.steps() as f64) * log_n;
        for t in 0..s.steps() {
            total += s.pinned_density(cx, &tr, t, b[t])?;
            for i in 0..s.n {
                if i != b[t] {
                    total += s.free_density(cx, &tr, t, i)?;
                }
            }
        }
        if total == f64::NEG_INFINITY {
            return Ok(total);
        }
        let lw = s.all_log_weights(cx, &tr)?;
        Ok(total + s.selection_density(&tr, &lw, &b, false))
    }

    fn grad_log_density(&self, cx: &Ctx, r: &Value, scale: f64, grad: &mut [f64]) -> Result<()> {
        let s = &self.smc.0;
        let Some(tr) = self.smc.parse(r, &self.x) else {
            return Ok(());
        };
        let b = s.pinned_path(&tr);
        for t in 0..s.steps() {
            s.grad_pinned_density(cx, &tr, t, b[t], scale, grad)?;
            for i in 0..s.n {
                if i != b[t] {
                    s.grad_free_density(cx, &tr, t, i, scale, grad)?;
                }
            }
        }
        let lw = s.all_log_weights(cx, &tr)?;
        s.grad_selection(cx, &tr, &lw, &b, false, scale, grad)
    }
}
