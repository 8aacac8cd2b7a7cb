//! Markov kernels `K(x → x')` with evaluable densities.

use std::sync::Arc;

use crate::choice::Choices;
use crate::error::{RaviError, Result};
use crate::math::{log_normal_pdf, logsumexp};
use crate::params::ParamRef;
use crate::strategy::{Proposal, Strategy};
use crate::target::{Ctx, Target};
use crate::value::Value;

/// A Markov kernel family with a density normalized in the destination.
pub trait Kernel: Send + Sync {
    fn sample(&self, cx: &Ctx, from: &Value, ch: &mut dyn Choices) -> Result<Value>;

    fn log_density(&self, cx: &Ctx, from: &Value, to: &Value) -> Result<f64>;

    /// Adds `scale · ∇θ log K(from → to)` into `grad`.
    fn grad_log_density(
        &self,
        _cx: &Ctx,
        _from: &Value,
        _to: &Value,
        _scale: f64,
        _grad: &mut [f64],
    ) -> Result<()> {
        Ok(())
    }

    /// The finite state space, when there is one.
    fn states(&self) -> Option<Vec<Value>> {
        None
    }

    /// True when the kernel satisfies detailed balance for its stationary law,
    /// so that its time reversal is the kernel itself.
    fn reversible(&self) -> bool {
        false
    }
}

const ROW_TOL: f64 = 1e-12;

/// Transition matrix over finitely many atoms.
#[derive(Clone, Debug)]
pub struct MatrixKernel {
    pub atoms: Vec<Value>,
    /// `log_probs[i][j] = log K(atoms[i] → atoms[j])`.
    pub log_probs: Vec<Vec<f64>>,
    reversible: bool,
}

impl MatrixKernel {
    pub fn new(atoms: Vec<Value>, probs: &[Vec<f64>]) -> Result<Self> {
        let n = atoms.len();
        if probs.len() != n || probs.iter().any(|row| row.len() != n) {
            return Err(RaviError::InvalidArgument(
                "transition matrix shape mismatch".into(),
            ));
        }
        for row in probs {
            let s: f64 = row.iter().sum();
            if row.iter().any(|p| *p < 0.0) || (s - 1.0).abs() > ROW_TOL {
                return Err(RaviError::InvalidArgument(format!(
                    "transition row sums to {s}"
                )));
            }
        }
        Ok(Self {
            atoms,
            log_probs: probs
                .iter()
                .map(|r| r.iter().map(|p| p.ln()).collect())
                .collect(),
            reversible: false,
        })
    }

    /// Declares detailed balance with respect to the kernel's stationary law.
    pub fn with_reversible(mut self, reversible: bool) -> Self {
        self.reversible = reversible;
        self
    }

    fn index(&self, x: &Value) -> Result<usize> {
        self.atoms
            .iter()
            .position(|a| a == x)
            .ok_or_else(|| RaviError::InvalidArgument(format!("{x} is not a state of the kernel")))
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.log_probs[i][j].exp()
    }
}

impl Kernel for MatrixKernel {
    fn sample(&self, _cx: &Ctx, from: &Value, ch: &mut dyn Choices) -> Result<Value> {
        let i = self.index(from)?;
        Ok(self.atoms[ch.categorical(&self.log_probs[i])?].clone())
    }

    fn log_density(&self, _cx: &Ctx, from: &Value, to: &Value) -> Result<f64> {
        let i = self.index(from)?;
        Ok(match self.atoms.iter().position(|a| a == to) {
            Some(j) => self.log_probs[i][j],
            None => f64::NEG_INFINITY,
        })
    }

    fn states(&self) -> Option<Vec<Value>> {
        Some(self.atoms.clone())
    }

    fn reversible(&self) -> bool {
        self.reversible
    }
}

/// Kernel that never moves.
#[derive(Clone, Debug, Default)]
pub struct IdentityKernel;

impl Kernel for IdentityKernel {
    fn sample(&self, _cx: &Ctx, from: &Value, _ch: &mut dyn Choices) -> Result<Value> {
        Ok(from.clone())
    }

    fn log_density(&self, _cx: &Ctx, from: &Value, to: &Value) -> Result<f64> {
        Ok(if from == to { 0.0 } else { f64::NEG_INFINITY })
    }

    fn reversible(&self) -> bool {
        true
    }
}

fn normalized_weights(cx: &Ctx, target: &dyn Target) -> Result<(Vec<Value>, Vec<f64>)> {
    let atoms = target.atoms().ok_or(RaviError::NotEnumerable(
        "kernel construction needs a finite target",
    ))?;
    let lw: Vec<f64> = atoms
        .iter()
        .map(|a| target.log_density(cx, a))
        .collect::<Result<_>>()?;
    let z = logsumexp(&lw);
    Ok((atoms, lw.iter().map(|l| (l - z).exp()).collect()))
}

/// Independent resampling from a finite target: mixes in one step.
pub fn gibbs_kernel(cx: &Ctx, target: &dyn Target) -> Result<MatrixKernel> {
    let (atoms, p) = normalized_weights(cx, target)?;
    let rows = vec![p; atoms.len()];
    Ok(MatrixKernel::new(atoms, &rows)?.with_reversible(true))
}

/// Exact Metropolis-Hastings transition matrix for a finite target and a
/// proposal matrix over the same atoms.
pub fn metropolis_kernel(
    cx: &Ctx,
    target: &dyn Target,
    proposal: &[Vec<f64>],
) -> Result<MatrixKernel> {
    let (atoms, p) = normalized_weights(cx, target)?;
    let n = atoms.len();
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut stay = 1.0;
        for j in 0..n {
            if i == j || proposal[i][j] == 0.0 {
                continue;
            }
            let accept = if p[i] * proposal[i][j] == 0.0 {
                1.0
            } else {
                (p[j] * proposal[j][i] / (p[i] * proposal[i][j])).min(1.0)
            };
            rows[i][j] = proposal[i][j] * accept;
            stay -= rows[i][j];
        }
        rows[i][i] = stay.max(0.0);
    }
    Ok(MatrixKernel::new(atoms, &rows)?.with_reversible(true))
}

/// `x' ~ N(m + ρ(x − m), (1 − ρ²) s²)`, reversible for `N(m, s²)`.
#[derive(Clone, Debug)]
pub struct GaussianAr1 {
    pub mean: f64,
    pub std: f64,
    pub rho: f64,
}

impl GaussianAr1 {
    fn step_std(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt() * self.std
    }
}

impl Kernel for GaussianAr1 {
    fn sample(&self, _cx: &Ctx, from: &Value, ch: &mut dyn Choices) -> Result<Value> {
        let m = self.mean + self.rho * (from.as_real() - self.mean);
        Ok(Value::Real(m + self.step_std() * ch.std_normal()?))
    }

    fn log_density(&self, _cx: &Ctx, from: &Value, to: &Value) -> Result<f64> {
        let m = self.mean + self.rho * (from.as_real() - self.mean);
        Ok(log_normal_pdf(to.as_real(), m, self.step_std()))
    }

    fn reversible(&self) -> bool {
        true
    }
}

/// `x' ~ N(a·x + b, exp(2c))` with learnable `a`, `b`, `c`.
#[derive(Clone, Copy, Debug)]
pub struct AffineGaussian {
    pub a: ParamRef,
    pub b: ParamRef,
    pub c: ParamRef,
}

impl AffineGaussian {
    fn moments(&self, cx: &Ctx, from: &Value) -> (f64, f64) {
        let p = cx.params;
        (
            self.a.get(p) * from.as_real() + self.b.get(p),
            self.c.get(p).exp(),
        )
    }
}

impl Kernel for AffineGaussian {
    fn sample(&self, cx: &Ctx, from: &Value, ch: &mut dyn Choices) -> Result<Value> {
        let (m, s) = self.moments(cx, from);
        Ok(Value::Real(m + s * ch.std_normal()?))
    }

    fn log_density(&self, cx: &Ctx, from: &Value, to: &Value) -> Result<f64> {
        let (m, s) = self.moments(cx, from);
        Ok(log_normal_pdf(to.as_real(), m, s))
    }

    fn grad_log_density(
        &self,
        cx: &Ctx,
        from: &Value,
        to: &Value,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let (m, s) = self.moments(cx, from);
        let z = (to.as_real() - m) / s;
        self.a.accumulate(grad, scale * z / s * from.as_real());
        self.b.accumulate(grad, scale * z / s);
        self.c.accumulate(grad, scale * (z * z - 1.0));
        Ok(())
    }
}

/// Random-walk Metropolis on the real line with `N(x, scale²)` proposals.
/// The holding probability is computed by quadrature; the density of a
/// move is taken against Lebesgue measure and that of staying against the
/// point mass, which keeps density ratios exact.
#[derive(Clone)]
pub struct RandomWalkMetropolis {
    pub target: Arc<dyn Target>,
    pub scale: f64,
}

/// Quadrature cells for the holding probability.
const HOLD_CELLS: usize = 2000;

impl RandomWalkMetropolis {
    fn log_accept(&self, cx: &Ctx, from: f64, to: f64) -> Result<f64> {
        let d = self.target.log_density(cx, &Value::Real(to))?
            - self.target.log_density(cx, &Value::Real(from))?;
        Ok(d.min(0.0))
    }

    fn hold(&self, cx: &Ctx, x: f64) -> Result<f64> {
        let (lo, hi) = (-8.0, 8.0);
        let dz = (hi - lo) / HOLD_CELLS as f64;
        let mut moved = 0.0;
        for i in 0..HOLD_CELLS {
            let z = lo + (i as f64 + 0.5) * dz;
            moved += log_normal_pdf(z, 0.0, 1.0).exp()
                * self.log_accept(cx, x, x + self.scale * z)?.exp()
                * dz;
        }
        Ok((1.0 - moved).max(0.0))
    }
}

impl Kernel for RandomWalkMetropolis {
    fn sample(&self, cx: &Ctx, from: &Value, ch: &mut dyn Choices) -> Result<Value> {
        let x = from.as_real();
        let y = x + self.scale * ch.std_normal()?;
        Ok(if ch.uniform()?.ln() < self.log_accept(cx, x, y)? {
            Value::Real(y)
        } else {
            from.clone()
        })
    }

    fn log_density(&self, cx: &Ctx, from: &Value, to: &Value) -> Result<f64> {
        let (x, y) = (from.as_real(), to.as_real());
        if x == y {
            return Ok(self.hold(cx, x)?.ln());
        }
        Ok(log_normal_pdf(y, x, self.scale) + self.log_accept(cx, x, y)?)
    }

    fn reversible(&self) -> bool {
        true
    }
}

/// A kernel started at a fixed point, viewed as a terminal proposal.
#[derive(Clone)]
pub struct KernelProposal {
    pub kernel: Arc<dyn Kernel>,
    pub from: Value,
}

impl Proposal for KernelProposal {
    fn sample(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<Value> {
        self.kernel.sample(cx, &self.from, ch)
    }

    fn log_density(&self, cx: &Ctx, x: &Value) -> Result<f64> {
        self.kernel.log_density(cx, &self.from, x)
    }

    fn grad_log_density(&self, cx: &Ctx, x: &Value, scale: f64, grad: &mut [f64]) -> Result<()> {
        self.kernel.grad_log_density(cx, &self.from, x, scale, grad)
    }
}

/// Terminal strategy `K(from → ·)`.
pub fn kernel_strategy(kernel: Arc<dyn Kernel>, from: &Value) -> Strategy {
    Strategy::terminal(KernelProposal {
        kernel,
        from: from.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamStore;
    use crate::target::FnTarget;

    fn three_atoms() -> FnTarget {
        let w = [1.0f64, 2.0, 5.0];
        FnTarget::new(move |_, x| Ok(w[x.as_index()].ln()))
            .with_atoms(Value::indices(&[0, 1, 2]).as_list().to_vec())
    }

    #[test]
    fn metropolis_kernel_preserves_target() {
        let ps = ParamStore::new();
        let cx = Ctx::new(&ps);
        let t = three_atoms();
        let prop = vec![
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.0, 0.5],
            vec![0.5, 0.5, 0.0],
        ];
        let k = metropolis_kernel(&cx, &t, &prop).unwrap();
        let pi = [1.0 / 8.0, 2.0 / 8.0, 5.0 / 8.0];
        for j in 0..3 {
            let mass: f64 = (0..3).map(|i| pi[i] * k.prob(i, j)).sum();
            assert!((mass - pi[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn affine_gradient_matches_finite_difference() {
        let mut ps = ParamStore::new();
        let k = AffineGaussian {
            a: ps.add("a", 0.7).unwrap(),
            b: ps.add("b", 0.1).unwrap(),
            c: ps.add("c", -0.5).unwrap(),
        };
        let (from, to) = (Value::Real(0.4), Value::Real(-0.3));
        let mut g = ps.zeros();
        k.grad_log_density(&Ctx::new(&ps), &from, &to, 1.0, &mut g)
            .unwrap();
        for i in 0..3 {
            let h = 1e-6;
            let f = |p: &ParamStore| k.log_density(&Ctx::new(p), &from, &to).unwrap();
            let fd = (f(&ps.perturbed(i, h)) - f(&ps.perturbed(i, -h))) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7, "{i}: {fd} vs {}", g[i]);
        }
    }
}
