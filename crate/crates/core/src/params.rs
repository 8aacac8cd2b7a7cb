//! Named flat parameter vectors.

use std::collections::HashMap;

use crate::error::{RaviError, Result};

/// A parameter slot: either a constant or an index into a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamRef {
    Fixed(f64),
    Param(usize),
}

impl ParamRef {
    pub fn get(&self, params: &ParamStore) -> f64 {
        match *self {
            ParamRef::Fixed(v) => v,
            ParamRef::Param(i) => params.values[i],
        }
    }

    /// Adds `scale` to the gradient slot of this reference, if any.
    pub fn accumulate(&self, grad: &mut [f64], scale: f64) {
        if let ParamRef::Param(i) = *self {
            grad[i] += scale;
        }
    }

    pub fn index(&self) -> Option<usize> {
        match *self {
            ParamRef::Fixed(_) => None,
            ParamRef::Param(i) => Some(i),
        }
    }
}

/// Flat vector of named real parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    values: Vec<f64>,
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter and returns a reference to it.
    pub fn add(&mut self, name: &str, value: f64) -> Result<ParamRef> {
        if self.index.contains_key(name) {
            return Err(RaviError::InvalidArgument(format!(
                "duplicate parameter name {name}"
            )));
        }
        let i = self.values.len();
        self.values.push(value);
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        Ok(ParamRef::Param(i))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn set_values(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.values.len(), "parameter length mismatch");
        self.values.copy_from_slice(values);
    }

    pub fn set(&mut self, i: usize, v: f64) {
        self.values[i] = v;
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// A zeroed accumulator of matching shape.
    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.values.len()]
    }

    /// Copy with coordinate `i` shifted by `h`.
    pub fn perturbed(&self, i: usize, h: f64) -> Self {
        let mut out = self.clone();
        out.values[i] += h;
        out
    }
}

/// Result of a variational estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub objective: f64,
    pub grad: Vec<f64>,
    pub score_g: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_map_to_stable_indices() {
        let mut p = ParamStore::new();
        let a = p.add("a", 1.0).unwrap();
        let b = p.add("b", 2.0).unwrap();
        assert_eq!(p.lookup("b"), Some(1));
        assert_eq!(b.get(&p), 2.0);
        assert!(p.add("a", 0.0).is_err());
        let mut g = p.zeros();
        a.accumulate(&mut g, 0.5);
        ParamRef::Fixed(3.0).accumulate(&mut g, 1.0);
        assert_eq!(g, vec![0.5, 0.0]);
        assert_eq!(p.perturbed(0, 0.25).values(), &[1.25, 2.0]);
    }
}
