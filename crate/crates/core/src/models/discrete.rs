//! Finite unnormalized targets.

use std::collections::HashMap;

use crate::error::{RaviError, Result};
use crate::math::logsumexp;
use crate::target::{Ctx, Target};
use crate::value::Value;

/// Unnormalized weights over finitely many atoms.
#[derive(Clone, Debug)]
pub struct DiscreteTarget {
    atoms: Vec<Value>,
    log_weights: Vec<f64>,
    index: HashMap<Value, usize>,
}

impl DiscreteTarget {
    pub fn new(atoms: Vec<Value>, log_weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != log_weights.len() {
            return Err(RaviError::InvalidArgument(format!(
                "{} atoms with {} weights",
                atoms.len(),
                log_weights.len()
            )));
        }
        if log_weights
            .iter()
            .any(|w| w.is_nan() || *w == f64::INFINITY)
        {
            return Err(RaviError::InvalidArgument(
                "weights must be finite or zero".into(),
            ));
        }
        if log_weights.iter().all(|w| *w == f64::NEG_INFINITY) {
            return Err(RaviError::InvalidArgument("all weights are zero".into()));
        }
        let index: HashMap<Value, usize> = atoms
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, a)| (a, i))
            .collect();
        if index.len() != atoms.len() {
            return Err(RaviError::InvalidArgument("repeated atom".into()));
        }
        Ok(Self {
            atoms,
            log_weights,
            index,
        })
    }

    /// Atoms `0..w.len()` with weights `w`.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        Self::new(
            (0..w.len()).map(Value::index).collect(),
            w.iter().map(|x| x.ln()).collect(),
        )
    }

    pub fn atoms(&self) -> &[Value] {
        &self.atoms
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_z(&self) -> f64 {
        logsumexp(&self.log_weights)
    }

    /// Normalized probabilities.
    pub fn probs(&self) -> Vec<f64> {
        let z = self.log_z();
        self.log_weights.iter().map(|w| (w - z).exp()).collect()
    }

    pub fn position(&self, x: &Value) -> Option<usize> {
        self.index.get(x).copied()
    }
}

impl Target for DiscreteTarget {
    fn log_density(&self, _cx: &Ctx, x: &Value) -> Result<f64> {
        Ok(self
            .position(x)
            .map_or(f64::NEG_INFINITY, |i| self.log_weights[i]))
    }

    fn atoms(&self) -> Option<Vec<Value>> {
        Some(self.atoms.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_and_normalizer() {
        let t = DiscreteTarget::from_weights(&[2.0, 6.0]).unwrap();
        assert!((t.log_z() - 8f64.ln()).abs() < 1e-15);
        let p = t.probs();
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        assert!(DiscreteTarget::from_weights(&[0.0, 0.0]).is_err());
        assert!(DiscreteTarget::new(vec![Value::Int(0), Value::Int(0)], vec![0.0, 0.0]).is_err());
    }
}
