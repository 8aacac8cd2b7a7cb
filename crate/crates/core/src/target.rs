//! Unnormalized targets.

use std::sync::Arc;

use crate::error::Result;
use crate::math::logsumexp;
use crate::params::ParamStore;
use crate::value::Value;

/// Evaluation context shared by every density call of one estimator run.
#[derive(Clone, Copy, Debug)]
pub struct Ctx<'a> {
    pub params: &'a ParamStore,
    /// Downgrade one-sided support violations to `-inf` weights in the
    /// direction a strategy's [`crate::SupportKind`] declares.
    pub relax_support: bool,
}

impl<'a> Ctx<'a> {
    pub fn new(params: &'a ParamStore) -> Self {
        Self {
            params,
            relax_support: false,
        }
    }

    pub fn relaxed(params: &'a ParamStore) -> Self {
        Self {
            params,
            relax_support: true,
        }
    }
}

/// An unnormalized density `log π̃(x)`.
pub trait Target: Send + Sync {
    fn log_density(&self, cx: &Ctx, x: &Value) -> Result<f64>;

    /// Adds `scale · ∇θ log π̃(x)` into `grad`. Parameter-free targets keep the default.
    fn grad_log_density(
        &self,
        _cx: &Ctx,
        _x: &Value,
        _scale: f64,
        _grad: &mut [f64],
    ) -> Result<()> {
        Ok(())
    }

    /// Finite list of atoms carrying all of the target's mass, when enumerable.
    fn atoms(&self) -> Option<Vec<Value>> {
        None
    }

    /// Number of continuous dimensions, when not enumerable.
    fn dimension(&self) -> Option<usize> {
        None
    }
}

impl<T: Target + ?Sized> Target for Arc<T> {
    fn log_density(&self, cx: &Ctx, x: &Value) -> Result<f64> {
        (**self).log_density(cx, x)
    }

    fn grad_log_density(&self, cx: &Ctx, x: &Value, scale: f64, grad: &mut [f64]) -> Result<()> {
        (**self).grad_log_density(cx, x, scale, grad)
    }

    fn atoms(&self) -> Option<Vec<Value>> {
        (**self).atoms()
    }

    fn dimension(&self) -> Option<usize> {
        (**self).dimension()
    }
}

/// Exact `log Z` of an enumerable target.
pub fn exact_log_z(cx: &Ctx, target: &dyn Target) -> Option<Result<f64>> {
    let atoms = target.atoms()?;
    let lw: Result<Vec<f64>> = atoms.iter().map(|a| target.log_density(cx, a)).collect();
    Some(lw.map(|lw| logsumexp(&lw)))
}

type DensityFn = dyn Fn(&Ctx, &Value) -> Result<f64> + Send + Sync;

/// Target defined by a closure, without parameter gradients.
#[derive(Clone)]
pub struct FnTarget {
    f: Arc<DensityFn>,
    atoms: Option<Vec<Value>>,
}

impl FnTarget {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&Ctx, &Value) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(f),
            atoms: None,
        }
    }

    pub fn with_atoms(mut self, atoms: Vec<Value>) -> Self {
        self.atoms = Some(atoms);
        self
    }
}

impl Target for FnTarget {
    fn log_density(&self, cx: &Ctx, x: &Value) -> Result<f64> {
        (self.f)(cx, x)
    }

    fn atoms(&self) -> Option<Vec<Value>> {
        self.atoms.clone()
    }
}

/// `π̃` scaled by a constant factor `exp(log_c)`.
pub struct Scaled<T> {
    pub inner: T,
    pub log_c: f64,
}

impl<T: Target> Target for Scaled<T> {
    fn log_density(&self, cx: &Ctx, x: &Value) -> Result<f64> {
        Ok(self.inner.log_density(cx, x)? + self.log_c)
    }

    fn grad_log_density(&self, cx: &Ctx, x: &Value, scale: f64, grad: &mut [f64]) -> Result<()> {
        self.inner.grad_log_density(cx, x, scale, grad)
    }

    fn atoms(&self) -> Option<Vec<Value>> {
        self.inner.atoms()
    }

    fn dimension(&self) -> Option<usize> {
        self.inner.dimension()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_log_z_sums_atoms() {
        let t = FnTarget::new(|_, x| {
            Ok(if x.as_int() == 0 {
                2f64.ln()
            } else {
                6f64.ln()
            })
        })
        .with_atoms(vec![Value::Int(0), Value::Int(1)]);
        let p = ParamStore::new();
        let lz = exact_log_z(&Ctx::new(&p), &t).unwrap().unwrap();
        assert!((lz - 8f64.ln()).abs() < 1e-15);
        let s = Scaled {
            inner: t,
            log_c: 1.0,
        };
        assert!(
            (s.log_density(&Ctx::new(&p), &Value::Int(0)).unwrap() - 2f64.ln() - 1.0).abs() < 1e-15
        );
    }
}
