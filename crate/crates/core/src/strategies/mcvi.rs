//! Markov chain variational families. `mcvi` infers the chain history with
//! learned reverse kernels; `rmcvi` infers it with backward SMC, whose own
//! auxiliaries are inferred by conditional SMC.

use std::sync::Arc;

use crate::choice::Choices;
use crate::error::{RaviError, Result};
use crate::math::{logsumexp, softmax};
use crate::strategy::{JointProposal, Proposal, Strategy};
use crate::target::Ctx;
use crate::value::Value;

use super::kernel::Kernel;

/// Chain length `m`, meta particle count `k`, initial proposal `q0`,
/// forward kernel `t`, reverse kernels `r[i]: x_{i+1} → x_i` and weighting
/// distributions `q[i]` for `i = 0..=m`.
///
/// Level zero of the backward SMC weighs with `q0` itself so that it targets
/// the forward chain exactly; `q[0]` is unused.
#[derive(Clone)]
pub struct McviConfig {
    pub m: usize,
    pub k: usize,
    pub q0: Arc<dyn Proposal>,
    pub t: Arc<dyn Kernel>,
    pub r: Vec<Arc<dyn Kernel>>,
    pub q: Vec<Arc<dyn Proposal>>,
}

impl McviConfig {
    fn validate(&self, with_smc: bool) -> Result<()> {
        if self.r.len() != self.m {
            return Err(RaviError::InvalidArgument(format!(
                "chain of length {} needs {} reverse kernels, got {}",
                self.m,
                self.m,
                self.r.len()
            )));
        }
        if with_smc {
            if self.k == 0 {
                return Err(RaviError::InvalidArgument(
                    "rmcvi needs at least one particle".into(),
                ));
            }
            if self.q.len() != self.m + 1 {
                return Err(RaviError::InvalidArgument(format!(
                    "chain of length {} needs {} weighting distributions, got {}",
                    self.m,
                    self.m + 1,
                    self.q.len()
                )));
            }
        }
        Ok(())
    }

    fn weighting(&self, i: usize) -> &dyn Proposal {
        if i == 0 {
            self.q0.as_ref()
        } else {
            self.q[i].as_ref()
        }
    }
}

/// Vanilla MCVI. With `m = 0` this is the terminal `q0`.
pub fn mcvi(cfg: McviConfig) -> Result<Strategy> {
    cfg.validate(false)?;
    if cfg.m == 0 {
        return Ok(Strategy::from_terminal(cfg.q0.clone()));
    }
    Ok(Strategy::compound(Chain {
        cfg: Arc::new(cfg),
        smc_meta: false,
    }))
}

/// MCVI with a K-particle backward SMC meta-strategy.
pub fn rmcvi(cfg: McviConfig) -> Result<Strategy> {
    cfg.validate(true)?;
    if cfg.m == 0 {
        return Ok(Strategy::from_terminal(cfg.q0.clone()));
    }
    Ok(Strategy::compound(Chain {
        cfg: Arc::new(cfg),
        smc_meta: true,
    }))
}

#[derive(Clone)]
struct Chain {
    cfg: Arc<McviConfig>,
    smc_meta: bool,
}

fn history(r: &Value, m: usize) -> Option<&[Value]> {
    match r {
        Value::List(xs) if xs.len() == m => Some(xs),
        _ => None,
    }
}

fn at<'a>(xs: &'a [Value], x: &'a Value, i: usize) -> &'a Value {
    xs.get(i).unwrap_or(x)
}

impl JointProposal for Chain {
    fn sample_joint(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<(Value, Value)> {
        let c = &self.cfg;
        let mut x = c.q0.sample(cx, ch)?;
        let mut xs = Vec::with_capacity(c.m);
        for _ in 0..c.m {
            let next = c.t.sample(cx, &x, ch)?;
            xs.push(std::mem::replace(&mut x, next));
        }
        Ok((Value::List(xs), x))
    }

    fn log_joint_density(&self, cx: &Ctx, r: &Value, x: &Value) -> Result<f64> {
        let c = &self.cfg;
        let Some(xs) = history(r, c.m) else {
            return Ok(f64::NEG_INFINITY);
        };
        let mut total = c.q0.log_density(cx, &xs[0])?;
        for i in 0..c.m {
            total += c.t.log_density(cx, &xs[i], at(xs, x, i + 1))?;
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
        let c = &self.cfg;
        let Some(xs) = history(r, c.m) else {
            return Ok(());
        };
        c.q0.grad_log_density(cx, &xs[0], scale, grad)?;
        for i in 0..c.m {
            c.t.grad_log_density(cx, &xs[i], at(xs, x, i + 1), scale, grad)?;
        }
        Ok(())
    }

    fn meta(&self, _cx: &Ctx, x: &Value) -> Result<Strategy> {
        let cfg = self.cfg.clone();
        Ok(if self.smc_meta {
            Strategy::compound(BackwardSmc(Arc::new(Backward { cfg, x: x.clone() })))
        } else {
            Strategy::terminal(ReverseChain { cfg, x: x.clone() })
        })
    }
}

/// `x_{m−1} ~ R_{m−1}(x)`, …, `x_0 ~ R_0(x_1)`.
struct ReverseChain {
    cfg: Arc<McviConfig>,
    x: Value,
}

impl Proposal for ReverseChain {
    fn sample(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<Value> {
        let c = &self.cfg;
        let mut xs = vec![Value::Unit; c.m];
        let mut cur = self.x.clone();
        for i in (0..c.m).rev() {
            cur = c.r[i].sample(cx, &cur, ch)?;
            xs[i] = cur.clone();
        }
        Ok(Value::List(xs))
    }

    fn log_density(&self, cx: &Ctx, r: &Value) -> Result<f64> {
        let c = &self.cfg;
        let Some(xs) = history(r, c.m) else {
            return Ok(f64::NEG_INFINITY);
        };
        let mut total = 0.0;
        for i in 0..c.m {
            total += c.r[i].log_density(cx, at(xs, &self.x, i + 1), &xs[i])?;
        }
        Ok(total)
    }

    fn grad_log_density(&self, cx: &Ctx, r: &Value, scale: f64, grad: &mut [f64]) -> Result<()> {
        let c = &self.cfg;
        let Some(xs) = history(r, c.m) else {
            return Ok(());
        };
        for i in 0..c.m {
            c.r[i].grad_log_density(cx, at(xs, &self.x, i + 1), &xs[i], scale, grad)?;
        }
        Ok(())
    }
}

/// Backward SMC state: particles `xs[i][k]` for levels `0..m`, ancestors
/// `anc[i][k]` into level `i + 1` (level `m` holds `k` copies of `x`), and
/// the final selection `a0`.
struct Backward {
    cfg: Arc<McviConfig>,
    x: Value,
}

struct Particles {
    xs: Vec<Vec<Value>>,
    anc: Vec<Vec<usize>>,
    a0: usize,
}

impl Particles {
    fn to_value(&self) -> Value {
        Value::list([
            Value::list(self.xs.iter().map(|row| Value::List(row.clone()))),
            Value::list(self.anc.iter().map(|row| Value::indices(row))),
            Value::index(self.a0),
        ])
    }

    fn from_value(v: &Value, m: usize, k: usize) -> Option<Self> {
        let Value::List(parts) = v else { return None };
        if parts.len() != 3 {
            return None;
        }
        let rows = |v: &Value| -> Option<Vec<Vec<Value>>> {
            let Value::List(rs) = v else { return None };
            if rs.len() != m {
                return None;
            }
            rs.iter()
                .map(|r| match r {
                    Value::List(xs) if xs.len() == k => Some(xs.clone()),
                    _ => None,
                })
                .collect()
        };
        let index = |v: &Value| match *v {
            Value::Int(i) if i >= 0 && (i as usize) < k => Some(i as usize),
            _ => None,
        };
        let xs = rows(&parts[0])?;
        let anc = rows(&parts[1])?
            .iter()
            .map(|row| row.iter().map(index).collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()?;
        let a0 = index(&parts[2])?;
        Some(Self { xs, anc, a0 })
    }

    /// Pinned indices `b_0..=b_m` read back from the ancestors.
    fn path(&self, m: usize) -> Vec<usize> {
        let mut b = vec![self.a0; m + 1];
        for i in 0..m {
            b[i + 1] = self.anc[i][b[i]];
        }
        b
    }

    fn trace(&self, m: usize) -> Value {
        let b = self.path(m);
        Value::list((0..m).map(|i| self.xs[i][b[i]].clone()))
    }
}

impl Backward {
    fn particle<'a>(&'a self, p: &'a Particles, level: usize, k: usize) -> &'a Value {
        if level == self.cfg.m {
            &self.x
        } else {
            &p.xs[level][k]
        }
    }

    /// `log w_i^k`; level `m` carries `log q_m(x)` for every particle.
    fn log_weight(&self, cx: &Ctx, p: &Particles, level: usize, k: usize) -> Result<f64> {
        let c = &self.cfg;
        if level == c.m {
            return c.q[c.m].log_density(cx, &self.x);
        }
        let xi = &p.xs[level][k];
        let parent = self.particle(p, level + 1, p.anc[level][k]);
        Ok(
            c.weighting(level).log_density(cx, xi)? + c.t.log_density(cx, xi, parent)?
                - c.weighting(level + 1).log_density(cx, parent)?
                - c.r[level].log_density(cx, parent, xi)?,
        )
    }

    fn grad_log_weight(
        &self,
        cx: &Ctx,
        p: &Particles,
        level: usize,
        k: usize,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let c = &self.cfg;
        if level == c.m {
            return c.q[c.m].grad_log_density(cx, &self.x, scale, grad);
        }
        let xi = &p.xs[level][k];
        let parent = self.particle(p, level + 1, p.anc[level][k]);
        c.weighting(level).grad_log_density(cx, xi, scale, grad)?;
        c.t.grad_log_density(cx, xi, parent, scale, grad)?;
        c.weighting(level + 1)
            .grad_log_density(cx, parent, -scale, grad)?;
        c.r[level].grad_log_density(cx, parent, xi, -scale, grad)
    }

    fn level_weights(&self, cx: &Ctx, p: &Particles, level: usize) -> Result<Vec<f64>> {
        (0..self.cfg.k)
            .map(|k| self.log_weight(cx, p, level, k))
            .collect()
    }

    /// Samples particle `k` at `level` forward from the weights one level up.
    fn extend(
        &self,
        cx: &Ctx,
        p: &mut Particles,
        up: &[f64],
        level: usize,
        k: usize,
        ch: &mut dyn Choices,
    ) -> Result<()> {
        let a = ch.categorical(up)?;
        p.anc[level][k] = a;
        let parent = self.particle(p, level + 1, a).clone();
        p.xs[level][k] = self.cfg.r[level].sample(cx, &parent, ch)?;
        Ok(())
    }

    fn blank(&self) -> Particles {
        let (m, k) = (self.cfg.m, self.cfg.k);
        Particles {
            xs: vec![vec![Value::Unit; k]; m],
            anc: vec![vec![0; k]; m],
            a0: 0,
        }
    }

    /// Log-density of resampling and reverse-kernel draws of every particle
    /// except `skip[level]`, plus the final selection when `with_a0`.
    fn sampling_density(
        &self,
        cx: &Ctx,
        p: &Particles,
        skip: &[usize],
        with_a0: bool,
    ) -> Result<f64> {
        let c = &self.cfg;
        let mut total = 0.0;
        let mut up = self.level_weights(cx, p, c.m)?;
        for level in (0..c.m).rev() {
            let z = logsumexp(&up);
            for k in 0..c.k {
                if k == skip[level] {
                    continue;
                }
                let a = p.anc[level][k];
                total += up[a] - z
                    + c.r[level].log_density(
                        cx,
                        self.particle(p, level + 1, a),
                        &p.xs[level][k],
                    )?;
            }
            up = self.level_weights(cx, p, level)?;
        }
        if with_a0 {
            total += up[p.a0] - logsumexp(&up);
        }
        Ok(total)
    }

    fn grad_sampling_density(
        &self,
        cx: &Ctx,
        p: &Particles,
        skip: &[usize],
        with_a0: bool,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let c = &self.cfg;
        let mut coef = vec![vec![0.0; c.k]; c.m + 1];
        for level in (0..c.m).rev() {
            let probs = softmax(&self.level_weights(cx, p, level + 1)?);
            for k in 0..c.k {
                if k == skip[level] {
                    continue;
                }
                let a = p.anc[level][k];
                coef[level + 1][a] += 1.0;
                for (cm, pm) in coef[level + 1].iter_mut().zip(&probs) {
                    *cm -= pm;
                }
                c.r[level].grad_log_density(
                    cx,
                    self.particle(p, level + 1, a),
                    &p.xs[level][k],
                    scale,
                    grad,
                )?;
            }
        }
        if with_a0 {
            let probs = softmax(&self.level_weights(cx, p, 0)?);
            coef[0][p.a0] += 1.0;
            for (cm, pm) in coef[0].iter_mut().zip(&probs) {
                *cm -= pm;
            }
        }
        for (level, row) in coef.iter().enumerate() {
            for (k, cm) in row.iter().enumerate() {
                if *cm != 0.0 {
                    self.grad_log_weight(cx, p, level, k, scale * cm, grad)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone)]
struct BackwardSmc(Arc<Backward>);

impl BackwardSmc {
    fn parse(&self, aux: &Value, trace: &Value) -> Option<Particles> {
        let c = &self.0.cfg;
        Particles::from_value(aux, c.m, c.k).filter(|p| p.trace(c.m) == *trace)
    }
}

impl JointProposal for BackwardSmc {
    fn sample_joint(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<(Value, Value)> {
        let b = &self.0;
        let c = &b.cfg;
        let mut p = b.blank();
        let mut up = b.level_weights(cx, &p, c.m)?;
        for level in (0..c.m).rev() {
            for k in 0..c.k {
                b.extend(cx, &mut p, &up, level, k, ch)?;
            }
            up = b.level_weights(cx, &p, level)?;
        }
        p.a0 = ch.categorical(&up)?;
        let trace = p.trace(c.m);
        Ok((p.to_value(), trace))
    }

    fn log_joint_density(&self, cx: &Ctx, aux: &Value, trace: &Value) -> Result<f64> {
        let Some(p) = self.parse(aux, trace) else {
            return Ok(f64::NEG_INFINITY);
        };
        self.0
            .sampling_density(cx, &p, &vec![usize::MAX; self.0.cfg.m], true)
    }

    fn grad_log_joint_density(
        &self,
        cx: &Ctx,
        aux: &Value,
        trace: &Value,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let Some(p) = self.parse(aux, trace) else {
            return Ok(());
        };
        self.0
            .grad_sampling_density(cx, &p, &vec![usize::MAX; self.0.cfg.m], true, scale, grad)
    }

    fn meta(&self, _cx: &Ctx, trace: &Value) -> Result<Strategy> {
        let m = self.0.cfg.m;
        if history(trace, m).is_none() {
            return Err(RaviError::InvalidArgument(format!(
                "expected a chain history of length {m}"
            )));
        }
        Ok(Strategy::terminal(CondBackwardSmc {
            smc: self.clone(),
            trace: trace.clone(),
        }))
    }
}

/// Conditional backward SMC with one particle per level pinned to `trace`.
struct CondBackwardSmc {
    smc: BackwardSmc,
    trace: Value,
}

impl Proposal for CondBackwardSmc {
    fn sample(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<Value> {
        let b = &self.smc.0;
        let c = &b.cfg;
        let pins: Vec<usize> = (0..=c.m)
            .map(|_| ch.uniform_index(c.k))
            .collect::<Result<_>>()?;
        let mut p = b.blank();
        let mut up = b.level_weights(cx, &p, c.m)?;
        for level in (0..c.m).rev() {
            for k in 0..c.k {
                if k == pins[level] {
                    p.anc[level][k] = pins[level + 1];
                    p.xs[level][k] = self.trace.at(level).clone();
                } else {
                    b.extend(cx, &mut p, &up, level, k, ch)?;
                }
            }
            up = b.level_weights(cx, &p, level)?;
        }
        p.a0 = pins[0];
        Ok(p.to_value())
    }

    fn log_density(&self, cx: &Ctx, aux: &Value) -> Result<f64> {
        let Some(p) = self.smc.parse(aux, &self.trace) else {
            return Ok(f64::NEG_INFINITY);
        };
        let b = &self.smc.0;
        let pins = p.path(b.cfg.m);
        let uniform = -((b.cfg.m + 1) as f64) * (b.cfg.k as f64).ln();
        Ok(uniform + b.sampling_density(cx, &p, &pins, false)?)
    }

    fn grad_log_density(&self, cx: &Ctx, aux: &Value, scale: f64, grad: &mut [f64]) -> Result<()> {
        let Some(p) = self.smc.parse(aux, &self.trace) else {
            return Ok(());
        };
        let b = &self.smc.0;
        let pins = p.path(b.cfg.m);
        b.grad_sampling_density(cx, &p, &pins, false, scale, grad)
    }
}
