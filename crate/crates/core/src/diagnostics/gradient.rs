//! Central finite differences.

use crate::error::{RaviError, Result};
use crate::params::ParamStore;

/// Gradient estimate with per-coordinate standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct FdGradient {
    pub grad: Vec<f64>,
    pub std_err: Vec<f64>,
}

/// Central differences of `objective`, which returns an estimate and its
/// standard error (zero for exact objectives). Common random numbers are
/// the objective's responsibility.
pub fn finite_diff_gradient<F>(params: &ParamStore, h: f64, mut objective: F) -> Result<FdGradient>
where
    F: FnMut(&ParamStore) -> Result<(f64, f64)>,
{
    if !(h > 0.0) {
        return Err(RaviError::InvalidArgument(format!("step {h}")));
    }
    let mut grad = Vec::with_capacity(params.len());
    let mut std_err = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let (up, se_up) = objective(&params.perturbed(i, h))?;
        let (down, se_down) = objective(&params.perturbed(i, -h))?;
        grad.push((up - down) / (2.0 * h));
        std_err.push((se_up * se_up + se_down * se_down).sqrt() / (2.0 * h));
    }
    Ok(FdGradient { grad, std_err })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let mut p = ParamStore::new();
        p.add("a", 1.5).unwrap();
        p.add("b", -0.5).unwrap();
        let g = finite_diff_gradient(&p, 1e-3, |q| {
            let v = q.values();
            Ok((3.0 * v[0] * v[0] + v[0] * v[1] - 2.0 * v[1], 0.0))
        })
        .unwrap();
        assert!((g.grad[0] - (6.0 * 1.5 - 0.5)).abs() < 1e-9);
        assert!((g.grad[1] - (1.5 - 2.0)).abs() < 1e-9);
    }
}
