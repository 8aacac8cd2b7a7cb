//! Antithetic sampling: propose `x_0` and its image `T(x_0)`, keep one.

use std::sync::Arc;

use crate::choice::Choices;
use crate::error::Result;
use crate::math::softmax;
use crate::strategy::{JointProposal, Proposal, Strategy};
use crate::target::{Ctx, Target};
use crate::value::Value;

/// Relative tolerance when matching `T(T⁻¹(x))` against `x`.
const ROUNDTRIP_TOL: f64 = 1e-9;

/// A bijection with its inverse and log absolute Jacobian determinant.
pub trait Bijection: Send + Sync {
    fn apply(&self, x: &Value) -> Value;

    fn inverse(&self, y: &Value) -> Value;

    /// `log |det ∂T/∂x|`; zero on discrete spaces.
    fn log_abs_det_jacobian(&self, _x: &Value) -> f64 {
        0.0
    }
}

/// `x ↦ 2c − x` on the real line.
#[derive(Clone, Copy, Debug)]
pub struct Reflection {
    pub center: f64,
}

impl Bijection for Reflection {
    fn apply(&self, x: &Value) -> Value {
        Value::Real(2.0 * self.center - x.as_real())
    }

    fn inverse(&self, y: &Value) -> Value {
        self.apply(y)
    }
}

/// Permutation of finitely many atoms; `image[i]` is the image of `atoms[i]`.
#[derive(Clone, Debug)]
pub struct Permutation {
    pub atoms: Vec<Value>,
    pub image: Vec<usize>,
}

impl Bijection for Permutation {
    fn apply(&self, x: &Value) -> Value {
        match self.atoms.iter().position(|a| a == x) {
            Some(i) => self.atoms[self.image[i]].clone(),
            None => x.clone(),
        }
    }

    fn inverse(&self, y: &Value) -> Value {
        match self.atoms.iter().position(|a| a == y) {
            Some(j) => match self.image.iter().position(|&k| k == j) {
                Some(i) => self.atoms[i].clone(),
                None => y.clone(),
            },
            None => y.clone(),
        }
    }
}

/// The identity map.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityMap;

impl Bijection for IdentityMap {
    fn apply(&self, x: &Value) -> Value {
        x.clone()
    }

    fn inverse(&self, y: &Value) -> Value {
        y.clone()
    }
}

/// Antithetic strategy for `target` with base proposal `q` and bijection `t`.
pub fn antithetic(
    target: Arc<dyn Target>,
    q: Arc<dyn Proposal>,
    t: Arc<dyn Bijection>,
) -> Strategy {
    Strategy::compound(Antithetic(Arc::new(Spec { target, q, t })))
}

struct Spec {
    target: Arc<dyn Target>,
    q: Arc<dyn Proposal>,
    t: Arc<dyn Bijection>,
}

#[derive(Clone)]
struct Antithetic(Arc<Spec>);

fn split(r: &Value) -> Option<(&Value, bool)> {
    match r {
        Value::List(p) if p.len() == 2 => match p[1] {
            Value::Int(0) => Some((&p[0], false)),
            Value::Int(1) => Some((&p[0], true)),
            _ => None,
        },
        _ => None,
    }
}

impl Spec {
    /// The two candidates and the log-probabilities of keeping each.
    fn choice(&self, cx: &Ctx, x0: &Value) -> Result<([Value; 2], [f64; 2])> {
        let y = [x0.clone(), self.t.apply(x0)];
        let lw = [
            self.target.log_density(cx, &y[0])?,
            self.target.log_density(cx, &y[1])?,
        ];
        let p = softmax(&lw);
        Ok((y, [p[0].ln(), p[1].ln()]))
    }

    fn output_matches(&self, x0: &Value, b: bool, x: &Value) -> bool {
        let expected = if b { self.t.apply(x0) } else { x0.clone() };
        expected.approx_eq(x, ROUNDTRIP_TOL)
    }
}

impl JointProposal for Antithetic {
    fn sample_joint(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<(Value, Value)> {
        let s = &self.0;
        let x0 = s.q.sample(cx, ch)?;
        let (y, lp) = s.choice(cx, &x0)?;
        let b = ch.categorical(&lp)?;
        let [y0, y1] = y;
        let x = if b == 1 { y1 } else { y0 };
        Ok((Value::pair(x0, Value::index(b)), x))
    }

    fn log_joint_density(&self, cx: &Ctx, r: &Value, x: &Value) -> Result<f64> {
        let s = &self.0;
        let Some((x0, b)) = split(r) else {
            return Ok(f64::NEG_INFINITY);
        };
        if !s.output_matches(x0, b, x) {
            return Ok(f64::NEG_INFINITY);
        }
        let lq = s.q.log_density(cx, x0)?;
        if lq == f64::NEG_INFINITY {
            return Ok(lq);
        }
        let (_, lp) = s.choice(cx, x0)?;
        let lb = lp[b as usize];
        if lb.is_nan() {
            return Ok(f64::NEG_INFINITY);
        }
        let jac = if b { s.t.log_abs_det_jacobian(x0) } else { 0.0 };
        Ok(lq + lb - jac)
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
        let Some((x0, b)) = split(r) else {
            return Ok(());
        };
        if !s.output_matches(x0, b, x) {
            return Ok(());
        }
        s.q.grad_log_density(cx, x0, scale, grad)?;
        let (y, lp) = s.choice(cx, x0)?;
        for (i, yi) in y.iter().enumerate() {
            let delta = if (i == 1) == b { 1.0 } else { 0.0 };
            let coef = delta - lp[i].exp();
            if coef != 0.0 && coef.is_finite() {
                s.target.grad_log_density(cx, yi, scale * coef, grad)?;
            }
        }
        Ok(())
    }

    fn meta(&self, _cx: &Ctx, x: &Value) -> Result<Strategy> {
        Ok(Strategy::terminal(Unflip {
            spec: self.0.clone(),
            x: x.clone(),
        }))
    }
}

/// Guesses with a fair coin whether `x` was the base draw or its image.
struct Unflip {
    spec: Arc<Spec>,
    x: Value,
}

impl Proposal for Unflip {
    fn sample(&self, _cx: &Ctx, ch: &mut dyn Choices) -> Result<Value> {
        let b = ch.bernoulli(0.5)?;
        let x0 = if b {
            self.spec.t.inverse(&self.x)
        } else {
            self.x.clone()
        };
        Ok(Value::pair(x0, Value::index(b as usize)))
    }

    fn log_density(&self, _cx: &Ctx, r: &Value) -> Result<f64> {
        let Some((x0, b)) = split(r) else {
            return Ok(f64::NEG_INFINITY);
        };
        let expected = if b {
            self.spec.t.inverse(&self.x)
        } else {
            self.x.clone()
        };
        Ok(if expected.approx_eq(x0, ROUNDTRIP_TOL) {
            -(2f64.ln())
        } else {
            f64::NEG_INFINITY
        })
    }
}
