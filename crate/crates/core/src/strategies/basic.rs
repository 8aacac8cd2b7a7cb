//! Building blocks: closures, finite proposals, point masses.

use std::sync::Arc;

use crate::choice::Choices;
use crate::error::{RaviError, Result};
use crate::math::logsumexp;
use crate::params::ParamRef;
use crate::strategy::{FnJoint, FnProposal, JointProposal, Proposal, Strategy};
use crate::target::Ctx;
use crate::value::Value;

/// Terminal strategy from a sampler and a normalized log-density.
pub fn terminal<S, D>(sample: S, log_density: D) -> Strategy
where
    S: Fn(&Ctx, &mut dyn Choices) -> Result<Value> + Send + Sync + 'static,
    D: Fn(&Ctx, &Value) -> Result<f64> + Send + Sync + 'static,
{
    Strategy::terminal(FnProposal::new(sample, log_density))
}

/// Tolerance of the normalization check in [`terminal_checked`].
const NORMALIZATION_TOL: f64 = 1e-12;

/// [`terminal`] on a finite space, rejecting densities that do not sum to one.
pub fn terminal_checked<S, D>(
    cx: &Ctx,
    atoms: &[Value],
    sample: S,
    log_density: D,
) -> Result<Strategy>
where
    S: Fn(&Ctx, &mut dyn Choices) -> Result<Value> + Send + Sync + 'static,
    D: Fn(&Ctx, &Value) -> Result<f64> + Send + Sync + 'static,
{
    let lw: Vec<f64> = atoms
        .iter()
        .map(|a| log_density(cx, a))
        .collect::<Result<_>>()?;
    let total = logsumexp(&lw).exp();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(RaviError::InvalidArgument(format!(
            "terminal density sums to {total} over its atoms"
        )));
    }
    Ok(terminal(sample, log_density))
}

/// Compound strategy from a joint sampler, joint density and meta builder.
pub fn compound<S, D, M>(sample_joint: S, log_joint: D, meta: M) -> Strategy
where
    S: Fn(&Ctx, &mut dyn Choices) -> Result<(Value, Value)> + Send + Sync + 'static,
    D: Fn(&Ctx, &Value, &Value) -> Result<f64> + Send + Sync + 'static,
    M: Fn(&Ctx, &Value) -> Result<Strategy> + Send + Sync + 'static,
{
    Strategy::compound(FnJoint::new(sample_joint, log_joint, meta))
}

/// Distribution over finitely many atoms with softmax logits.
#[derive(Clone, Debug)]
pub struct DiscreteProposal {
    pub atoms: Vec<Value>,
    pub logits: Vec<ParamRef>,
}

impl DiscreteProposal {
    pub fn new(atoms: Vec<Value>, logits: Vec<ParamRef>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != logits.len() {
            return Err(RaviError::InvalidArgument(format!(
                "{} atoms with {} logits",
                atoms.len(),
                logits.len()
            )));
        }
        Ok(Self { atoms, logits })
    }

    pub fn uniform(atoms: Vec<Value>) -> Self {
        let logits = vec![ParamRef::Fixed(0.0); atoms.len()];
        Self { atoms, logits }
    }

    /// Fixed probabilities; zero entries are allowed.
    pub fn from_probs(atoms: Vec<Value>, probs: &[f64]) -> Result<Self> {
        let logits = probs.iter().map(|p| ParamRef::Fixed(p.ln())).collect();
        Self::new(atoms, logits)
    }

    /// Normalized log-probabilities of the atoms.
    pub fn log_probs(&self, cx: &Ctx) -> Vec<f64> {
        let l: Vec<f64> = self.logits.iter().map(|p| p.get(cx.params)).collect();
        let z = logsumexp(&l);
        l.iter().map(|v| v - z).collect()
    }

    fn position(&self, x: &Value) -> Option<usize> {
        self.atoms.iter().position(|a| a == x)
    }
}

impl Proposal for DiscreteProposal {
    fn sample(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<Value> {
        let k = ch.categorical(&self.log_probs(cx))?;
        Ok(self.atoms[k].clone())
    }

    fn log_density(&self, cx: &Ctx, x: &Value) -> Result<f64> {
        Ok(match self.position(x) {
            Some(k) => self.log_probs(cx)[k],
            None => f64::NEG_INFINITY,
        })
    }

    fn grad_log_density(&self, cx: &Ctx, x: &Value, scale: f64, grad: &mut [f64]) -> Result<()> {
        let Some(k) = self.position(x) else {
            return Ok(());
        };
        for (i, (lp, p)) in self.log_probs(cx).iter().zip(&self.logits).enumerate() {
            let delta = if i == k { 1.0 } else { 0.0 };
            p.accumulate(grad, scale * (delta - lp.exp()));
        }
        Ok(())
    }
}

/// Dirac mass at a fixed value.
#[derive(Clone, Debug)]
pub struct PointMass(pub Value);

impl Proposal for PointMass {
    fn sample(&self, _cx: &Ctx, _ch: &mut dyn Choices) -> Result<Value> {
        Ok(self.0.clone())
    }

    fn log_density(&self, _cx: &Ctx, x: &Value) -> Result<f64> {
        Ok(if *x == self.0 { 0.0 } else { f64::NEG_INFINITY })
    }
}

/// Terminal strategy over the single value `()`.
pub fn unit_strategy() -> Strategy {
    Strategy::terminal(PointMass(Value::Unit))
}

struct Trivial(Arc<dyn Proposal>);

impl JointProposal for Trivial {
    fn sample_joint(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<(Value, Value)> {
        Ok((Value::Unit, self.0.sample(cx, ch)?))
    }

    fn log_joint_density(&self, cx: &Ctx, r: &Value, x: &Value) -> Result<f64> {
        if *r != Value::Unit {
            return Ok(f64::NEG_INFINITY);
        }
        self.0.log_density(cx, x)
    }

    fn grad_log_joint_density(
        &self,
        cx: &Ctx,
        _r: &Value,
        x: &Value,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        self.0.grad_log_density(cx, x, scale, grad)
    }

    fn meta(&self, _cx: &Ctx, _x: &Value) -> Result<Strategy> {
        Ok(unit_strategy())
    }
}

/// A terminal proposal wrapped as a compound node with empty auxiliary `r = ()`.
pub fn trivial_compound(q: Arc<dyn Proposal>) -> Strategy {
    Strategy::compound(Trivial(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamStore;

    #[test]
    fn discrete_gradient_matches_finite_difference() {
        let mut ps = ParamStore::new();
        let a = ps.add("a", 0.3).unwrap();
        let b = ps.add("b", -0.2).unwrap();
        let q = DiscreteProposal::new(
            vec![Value::Int(0), Value::Int(1), Value::Int(2)],
            vec![a, b, ParamRef::Fixed(0.1)],
        )
        .unwrap();
        let x = Value::Int(1);
        let mut g = ps.zeros();
        q.grad_log_density(&Ctx::new(&ps), &x, 1.0, &mut g).unwrap();
        for i in 0..2 {
            let h = 1e-6;
            let up = ps.perturbed(i, h);
            let dn = ps.perturbed(i, -h);
            let fd = (q.log_density(&Ctx::new(&up), &x).unwrap()
                - q.log_density(&Ctx::new(&dn), &x).unwrap())
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn unnormalized_terminal_is_rejected() {
        let ps = ParamStore::new();
        let atoms = vec![Value::Int(0), Value::Int(1)];
        let bad = terminal_checked(
            &Ctx::new(&ps),
            &atoms,
            |_, _| Ok(Value::Int(0)),
            |_, _| Ok(0.0),
        );
        assert!(bad.is_err());
        let ok = terminal_checked(
            &Ctx::new(&ps),
            &atoms,
            |_, _| Ok(Value::Int(0)),
            |_, _| Ok(-(2f64.ln())),
        );
        assert!(ok.is_ok());
    }
}
