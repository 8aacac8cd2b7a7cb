//! Unadjusted Langevin kernel on one-dimensional targets.

use std::sync::Arc;

use crate::choice::Choices;
use crate::error::Result;
use crate::math::log_normal_pdf;
use crate::strategies::kernel::Kernel;
use crate::target::Ctx;
use crate::value::Value;

use super::continuous::GaussianMixtureTarget;

/// `x' ~ N(x + step · ∇log π̃(x), 2 · step)`.
#[derive(Clone, Debug)]
pub struct Langevin {
    pub target: Arc<GaussianMixtureTarget>,
    pub step: f64,
}

impl Langevin {
    pub fn mean(&self, x: f64) -> f64 {
        x + self.step * self.target.grad_x(x)
    }

    pub fn std(&self) -> f64 {
        (2.0 * self.step).sqrt()
    }
}

pub fn langevin_kernel(target: Arc<GaussianMixtureTarget>, step: f64) -> Langevin {
    Langevin { target, step }
}

impl Kernel for Langevin {
    fn sample(&self, _cx: &Ctx, from: &Value, ch: &mut dyn Choices) -> Result<Value> {
        Ok(Value::Real(
            self.mean(from.as_real()) + self.std() * ch.std_normal()?,
        ))
    }

    fn log_density(&self, _cx: &Ctx, from: &Value, to: &Value) -> Result<f64> {
        Ok(log_normal_pdf(
            to.as_real(),
            self.mean(from.as_real()),
            self.std(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamStore;

    #[test]
    fn density_integrates_to_one() {
        let t = Arc::new(GaussianMixtureTarget::unnormalized_gaussian(0.2).unwrap());
        let k = langevin_kernel(t, 0.015);
        let ps = ParamStore::new();
        let cx = Ctx::new(&ps);
        for from in [-0.5, 0.0, 0.3] {
            let n = 20_001;
            let (lo, hi) = (k.mean(from) - 3.0, k.mean(from) + 3.0);
            let h = (hi - lo) / (n - 1) as f64;
            let mass: f64 = (0..n)
                .map(|i| {
                    let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                    w * h
                        * k.log_density(&cx, &Value::Real(from), &Value::Real(lo + h * i as f64))
                            .unwrap()
                            .exp()
                })
                .sum();
            assert!((mass - 1.0).abs() < 1e-9);
        }
        assert_eq!(k.mean(0.0), 0.0);
    }
}
