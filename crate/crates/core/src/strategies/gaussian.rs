//! One-dimensional Gaussian proposals with score and pathwise gradients.

use std::sync::Arc;

use crate::choice::Choices;
use crate::dual::Dual;
use crate::error::{RaviError, Result};
use crate::math::log_normal_pdf;
use crate::params::ParamRef;
use crate::reparam::{Args, ReparamJoint, ReparamProposal, ReparamStrategy};
use crate::strategy::{JointProposal, Proposal, Strategy};
use crate::target::Ctx;
use crate::value::Value;

/// `θ_i` as a dual number, or a constant.
pub fn param_dual(p: &ParamRef, args: &Args) -> Dual {
    match *p {
        ParamRef::Fixed(v) => args.constant(v),
        ParamRef::Param(i) => args.theta[i].clone(),
    }
}

fn cond(args: &Args) -> Result<&Dual> {
    args.cond.first().ok_or_else(|| {
        RaviError::InvalidArgument("conditional proposal without a conditioning value".into())
    })
}

fn single(x: &[Dual]) -> Result<&Dual> {
    match x {
        [v] => Ok(v),
        _ => Err(RaviError::InvalidArgument(format!(
            "expected one coordinate, got {}",
            x.len()
        ))),
    }
}

/// Adds the score of `N(x; m, exp(s)²)` in `(m, s)` to the slots of `mean`
/// and `log_std`, with `dm` the derivative of the mean in its slot.
fn accumulate_normal(
    x: f64,
    m: f64,
    s: f64,
    mean: &[(ParamRef, f64)],
    log_std: &ParamRef,
    scale: f64,
    grad: &mut [f64],
) {
    let sd = s.exp();
    let z = (x - m) / sd;
    for (p, dm) in mean {
        p.accumulate(grad, scale * z / sd * dm);
    }
    log_std.accumulate(grad, scale * (z * z - 1.0));
}

/// `N(mean, exp(log_std)²)`.
#[derive(Clone, Copy, Debug)]
pub struct Gaussian1d {
    pub mean: ParamRef,
    pub log_std: ParamRef,
}

impl Gaussian1d {
    pub fn fixed(mean: f64, std: f64) -> Self {
        Self {
            mean: ParamRef::Fixed(mean),
            log_std: ParamRef::Fixed(std.ln()),
        }
    }

    fn moments(&self, cx: &Ctx) -> (f64, f64) {
        (self.mean.get(cx.params), self.log_std.get(cx.params))
    }
}

impl Proposal for Gaussian1d {
    fn sample(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<Value> {
        let (m, s) = self.moments(cx);
        Ok(Value::Real(m + s.exp() * ch.std_normal()?))
    }

    fn log_density(&self, cx: &Ctx, x: &Value) -> Result<f64> {
        let (m, s) = self.moments(cx);
        Ok(log_normal_pdf(x.as_real(), m, s.exp()))
    }

    fn grad_log_density(&self, cx: &Ctx, x: &Value, scale: f64, grad: &mut [f64]) -> Result<()> {
        let (m, s) = self.moments(cx);
        accumulate_normal(
            x.as_real(),
            m,
            s,
            &[(self.mean, 1.0)],
            &self.log_std,
            scale,
            grad,
        );
        Ok(())
    }
}

impl ReparamProposal for Gaussian1d {
    fn noise(&self, _args: &Args, ch: &mut dyn Choices) -> Result<Vec<f64>> {
        Ok(vec![ch.std_normal()?])
    }

    fn push(&self, args: &Args, eps: &[f64]) -> Result<Vec<Dual>> {
        let sd = param_dual(&self.log_std, args).exp();
        Ok(vec![&param_dual(&self.mean, args) + &sd.scale(eps[0])])
    }

    fn log_density(&self, args: &Args, x: &[Dual]) -> Result<Dual> {
        Ok(single(x)?.log_normal_pdf(
            &param_dual(&self.mean, args),
            &param_dual(&self.log_std, args),
        ))
    }
}

/// `N(a·c + b, exp(log_std)²)` given a conditioning value `c`.
#[derive(Clone, Copy, Debug)]
pub struct LinearGaussian {
    pub a: ParamRef,
    pub b: ParamRef,
    pub log_std: ParamRef,
}

impl LinearGaussian {
    /// The distribution at a fixed conditioning value.
    pub fn at(&self, c: f64) -> LinearGaussianAt {
        LinearGaussianAt { lg: *self, c }
    }

    fn mean_dual(&self, args: &Args, c: &Dual) -> Dual {
        &(&param_dual(&self.a, args) * c) + &param_dual(&self.b, args)
    }
}

impl ReparamProposal for LinearGaussian {
    fn noise(&self, _args: &Args, ch: &mut dyn Choices) -> Result<Vec<f64>> {
        Ok(vec![ch.std_normal()?])
    }

    fn push(&self, args: &Args, eps: &[f64]) -> Result<Vec<Dual>> {
        let m = self.mean_dual(args, cond(args)?);
        let sd = param_dual(&self.log_std, args).exp();
        Ok(vec![&m + &sd.scale(eps[0])])
    }

    fn log_density(&self, args: &Args, x: &[Dual]) -> Result<Dual> {
        let m = self.mean_dual(args, cond(args)?);
        Ok(single(x)?.log_normal_pdf(&m, &param_dual(&self.log_std, args)))
    }
}

/// [`LinearGaussian`] with its conditioning value bound.
#[derive(Clone, Copy, Debug)]
pub struct LinearGaussianAt {
    lg: LinearGaussian,
    c: f64,
}

impl LinearGaussianAt {
    fn moments(&self, cx: &Ctx) -> (f64, f64) {
        let p = cx.params;
        (
            self.lg.a.get(p) * self.c + self.lg.b.get(p),
            self.lg.log_std.get(p),
        )
    }
}

impl Proposal for LinearGaussianAt {
    fn sample(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<Value> {
        let (m, s) = self.moments(cx);
        Ok(Value::Real(m + s.exp() * ch.std_normal()?))
    }

    fn log_density(&self, cx: &Ctx, x: &Value) -> Result<f64> {
        let (m, s) = self.moments(cx);
        Ok(log_normal_pdf(x.as_real(), m, s.exp()))
    }

    fn grad_log_density(&self, cx: &Ctx, x: &Value, scale: f64, grad: &mut [f64]) -> Result<()> {
        let (m, s) = self.moments(cx);
        accumulate_normal(
            x.as_real(),
            m,
            s,
            &[(self.lg.a, self.c), (self.lg.b, 1.0)],
            &self.lg.log_std,
            scale,
            grad,
        );
        Ok(())
    }
}

/// Two-level Gaussian strategy: `r ~ prior`, `x | r ~ forward(r)`, with
/// meta-strategy `r | x ~ backward(x)`.
#[derive(Clone, Copy, Debug)]
pub struct GaussianChain {
    pub prior: Gaussian1d,
    pub forward: LinearGaussian,
    pub backward: LinearGaussian,
}

impl GaussianChain {
    pub fn strategy(self) -> Strategy {
        Strategy::compound(self)
    }

    pub fn reparam(self) -> ReparamStrategy {
        ReparamStrategy::Compound(Arc::new(self))
    }
}

impl JointProposal for GaussianChain {
    fn sample_joint(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<(Value, Value)> {
        let r = self.prior.sample(cx, ch)?;
        let x = self.forward.at(r.as_real()).sample(cx, ch)?;
        Ok((r, x))
    }

    fn log_joint_density(&self, cx: &Ctx, r: &Value, x: &Value) -> Result<f64> {
        Ok(Proposal::log_density(&self.prior, cx, r)?
            + self.forward.at(r.as_real()).log_density(cx, x)?)
    }

    fn grad_log_joint_density(
        &self,
        cx: &Ctx,
        r: &Value,
        x: &Value,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        self.prior.grad_log_density(cx, r, scale, grad)?;
        self.forward
            .at(r.as_real())
            .grad_log_density(cx, x, scale, grad)
    }

    fn meta(&self, _cx: &Ctx, x: &Value) -> Result<Strategy> {
        Ok(Strategy::terminal(self.backward.at(x.as_real())))
    }
}

impl ReparamJoint for GaussianChain {
    fn noise(&self, _args: &Args, ch: &mut dyn Choices) -> Result<Vec<f64>> {
        Ok(vec![ch.std_normal()?, ch.std_normal()?])
    }

    fn push(&self, args: &Args, eps: &[f64]) -> Result<(Vec<Dual>, Vec<Dual>)> {
        let r = ReparamProposal::push(&self.prior, args, &eps[..1])?;
        let x = self.forward.push(&args.nested(&r), &eps[1..])?;
        Ok((r, x))
    }

    fn log_joint_density(&self, args: &Args, r: &[Dual], x: &[Dual]) -> Result<Dual> {
        let lp = ReparamProposal::log_density(&self.prior, args, r)?;
        let lf = ReparamProposal::log_density(&self.forward, &args.nested(r), x)?;
        Ok(&lp + &lf)
    }

    fn meta(&self) -> ReparamStrategy {
        ReparamStrategy::Terminal(Arc::new(self.backward))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamStore;

    #[test]
    fn score_matches_dual_derivative() {
        let mut params = ParamStore::new();
        let a = params.add("a", 0.7).unwrap();
        let b = params.add("b", -0.2).unwrap();
        let s = params.add("s", 0.1).unwrap();
        let lg = LinearGaussian { a, b, log_std: s };
        let cx = Ctx::new(&params);
        let mut g = vec![0.0; 3];
        lg.at(1.3)
            .grad_log_density(&cx, &Value::Real(0.4), 1.0, &mut g)
            .unwrap();
        let args = Args::root(params.values()).nested(&[Dual::constant(1.3, 3)]);
        let d = ReparamProposal::log_density(&lg, &args, &[Dual::constant(0.4, 3)]).unwrap();
        let v = lg.at(1.3).log_density(&cx, &Value::Real(0.4)).unwrap();
        assert!((d.v - v).abs() < 1e-14);
        for i in 0..3 {
            assert!((d.d[i] - g[i]).abs() < 1e-12);
        }
    }
}
