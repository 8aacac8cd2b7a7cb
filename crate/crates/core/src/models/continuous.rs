//! One-dimensional Gaussian mixture targets.

use crate::dual::Dual;
use crate::error::{RaviError, Result};
use crate::math::{log_normal_pdf, logsumexp};
use crate::reparam::{Args, DualTarget};
use crate::target::{Ctx, Target};
use crate::value::Value;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `π̃(x) = exp(log_scale) · Σ_k w_k N(x; μ_k, σ_k)`.
#[derive(Clone, Debug)]
pub struct GaussianMixtureTarget {
    /// `(weight, mean, std)` per component; weights sum to one.
    pub components: Vec<(f64, f64, f64)>,
    pub log_scale: f64,
}

impl GaussianMixtureTarget {
    pub fn new(components: Vec<(f64, f64, f64)>, log_scale: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(RaviError::InvalidArgument(
                "mixture needs a component".into(),
            ));
        }
        let total: f64 = components.iter().map(|c| c.0).sum();
        if components.iter().any(|c| !(c.0 > 0.0) || !(c.2 > 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(RaviError::InvalidArgument(
                "mixture weights must be positive and sum to one, stds positive".into(),
            ));
        }
        Ok(Self {
            components,
            log_scale,
        })
    }

    /// `exp(−x² / 2σ²)`, a Gaussian without its normalizing constant.
    pub fn unnormalized_gaussian(std: f64) -> Result<Self> {
        Self::new(vec![(1.0, 0.0, std)], std.ln() + HALF_LN_2PI)
    }

    pub fn log_density_at(&self, x: f64) -> f64 {
        let l: Vec<f64> = self
            .components
            .iter()
            .map(|&(w, m, s)| w.ln() + log_normal_pdf(x, m, s))
            .collect();
        self.log_scale + logsumexp(&l)
    }

    /// `d/dx log π̃(x)`.
    pub fn grad_x(&self, x: f64) -> f64 {
        let l: Vec<f64> = self
            .components
            .iter()
            .map(|&(w, m, s)| w.ln() + log_normal_pdf(x, m, s))
            .collect();
        let z = logsumexp(&l);
        self.components
            .iter()
            .zip(&l)
            .map(|(&(_, m, s), li)| (li - z).exp() * (m - x) / (s * s))
            .sum()
    }

    fn component_logs(&self, x: &Dual) -> Vec<Dual> {
        self.components
            .iter()
            .map(|&(w, m, s)| {
                x.add_const(-m)
                    .square()
                    .scale(-0.5 / (s * s))
                    .add_const(w.ln() - s.ln() - HALF_LN_2PI)
            })
            .collect()
    }

    pub fn log_density_dual(&self, x: &Dual) -> Dual {
        let l = self.component_logs(x);
        let top = l.iter().map(|d| d.v).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = Dual::constant(0.0, x.dim());
        for li in &l {
            sum = &sum + &li.add_const(-top).exp();
        }
        sum.ln().add_const(top + self.log_scale)
    }

    pub fn grad_x_dual(&self, x: &Dual) -> Dual {
        let l = self.component_logs(x);
        let top = l.iter().map(|d| d.v).fold(f64::NEG_INFINITY, f64::max);
        let mut num = Dual::constant(0.0, x.dim());
        let mut den = Dual::constant(0.0, x.dim());
        for (li, &(_, m, s)) in l.iter().zip(&self.components) {
            let e = li.add_const(-top).exp();
            let slope = (-x).add_const(m).scale(1.0 / (s * s));
            num = &num + &(&e * &slope);
            den = &den + &e;
        }
        &num / &den
    }

    /// `log Z` by the trapezoid rule on `n` points over `[lo, hi]`.
    pub fn log_z_quadrature(&self, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / (n - 1) as f64;
        let l: Vec<f64> = (0..n)
            .map(|i| {
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                self.log_density_at(lo + h * i as f64) + (w * h).ln()
            })
            .collect();
        logsumexp(&l)
    }

    /// Exact `log Z`.
    pub fn log_z(&self) -> f64 {
        self.log_scale
    }

    /// Interval holding all but a negligible fraction of the mass.
    pub fn support_interval(&self) -> (f64, f64) {
        let lo = self
            .components
            .iter()
            .map(|c| c.1 - 12.0 * c.2)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .components
            .iter()
            .map(|c| c.1 + 12.0 * c.2)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

impl Target for GaussianMixtureTarget {
    fn log_density(&self, _cx: &Ctx, x: &Value) -> Result<f64> {
        Ok(self.log_density_at(x.as_real()))
    }

    fn dimension(&self) -> Option<usize> {
        Some(1)
    }
}

impl DualTarget for GaussianMixtureTarget {
    fn log_density(&self, _args: &Args, x: &[Dual]) -> Result<Dual> {
        match x {
            [v] => Ok(self.log_density_dual(v)),
            _ => Err(RaviError::InvalidArgument(format!(
                "expected one coordinate, got {}",
                x.len()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixture() -> GaussianMixtureTarget {
        GaussianMixtureTarget::new(
            vec![(0.3, -1.0, 0.2), (0.5, 0.5, 0.3), (0.2, 0.0, 2.0)],
            0.7,
        )
        .unwrap()
    }

    #[test]
    fn quadrature_recovers_scale() {
        let t = mixture();
        let (lo, hi) = t.support_interval();
        assert!((t.log_z_quadrature(lo, hi, 100_000) - 0.7).abs() < 1e-8);
        let g = GaussianMixtureTarget::unnormalized_gaussian(0.2).unwrap();
        assert!((g.log_density_at(0.0)).abs() < 1e-14);
    }

    #[test]
    fn gradients_agree() {
        let t = mixture();
        for x in [-1.3, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (t.log_density_at(x + h) - t.log_density_at(x - h)) / (2.0 * h);
            assert!((fd - t.grad_x(x)).abs() < 1e-6);
            let d = Dual::variable(x, 0, 1);
            assert!((t.log_density_dual(&d).v - t.log_density_at(x)).abs() < 1e-12);
            assert!((t.log_density_dual(&d).d[0] - t.grad_x(x)).abs() < 1e-9);
            assert!((t.grad_x_dual(&d).v - t.grad_x(x)).abs() < 1e-12);
        }
    }
}
