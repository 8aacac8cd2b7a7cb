//! Exact output laws of randomized computations over finite choices.

use crate::choice::{enumerate, Choices, DEFAULT_PATH_LIMIT};
use crate::error::{RaviError, Result};

/// Mass tolerance of an enumerated law.
pub const MASS_TOL: f64 = 1e-12;

/// Outcomes with their exact probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorLaw<T> {
    pub outcomes: Vec<(T, f64)>,
}

/// Enumerates every branch of `f`, failing on continuous choices.
pub fn enumerate_law<T, F>(f: F) -> Result<EstimatorLaw<T>>
where
    F: FnMut(&mut dyn Choices) -> Result<T>,
{
    enumerate_law_limited(f, DEFAULT_PATH_LIMIT)
}

pub fn enumerate_law_limited<T, F>(f: F, limit: usize) -> Result<EstimatorLaw<T>>
where
    F: FnMut(&mut dyn Choices) -> Result<T>,
{
    let law = EstimatorLaw {
        outcomes: enumerate(f, limit)?,
    };
    let mass = law.total_mass();
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(RaviError::InvalidArgument(format!(
            "enumerated mass {mass}"
        )));
    }
    Ok(law)
}

impl<T> EstimatorLaw<T> {
    pub fn total_mass(&self) -> f64 {
        self.outcomes.iter().map(|(_, p)| p).sum()
    }

    pub fn expect(&self, f: impl Fn(&T) -> f64) -> f64 {
        self.outcomes.iter().map(|(v, p)| p * f(v)).sum()
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> EstimatorLaw<U> {
        EstimatorLaw {
            outcomes: self.outcomes.iter().map(|(v, p)| (f(v), *p)).collect(),
        }
    }
}

impl<T: PartialEq + Clone> EstimatorLaw<T> {
    /// Merges equal outcomes, keeping first-seen order.
    pub fn grouped(&self) -> EstimatorLaw<T> {
        let mut out: Vec<(T, f64)> = Vec::new();
        for (v, p) in &self.outcomes {
            match out.iter_mut().find(|(u, _)| u == v) {
                Some((_, q)) => *q += p,
                None => out.push((v.clone(), *p)),
            }
        }
        EstimatorLaw { outcomes: out }
    }
}

impl EstimatorLaw<f64> {
    pub fn mean(&self) -> f64 {
        self.expect(|v| *v)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|v| (v - m) * (v - m))
    }

    /// Merges outcomes within `rel_tol` of each other and sorts by value.
    pub fn grouped_approx(&self, rel_tol: f64) -> EstimatorLaw<f64> {
        let mut sorted = self.outcomes.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (v, p) in sorted {
            match out.last_mut() {
                Some((u, q)) if (v - *u).abs() <= rel_tol * u.abs().max(v.abs()) => *q += p,
                _ => out.push((v, p)),
            }
        }
        EstimatorLaw { outcomes: out }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fair_coin_payout() {
        let law = enumerate_law(|ch| Ok(if ch.bernoulli(0.5)? { 3.0 } else { 1.0 })).unwrap();
        let g = law.grouped_approx(1e-12);
        assert_eq!(g.outcomes, vec![(1.0, 0.5), (3.0, 0.5)]);
        assert_eq!(law.mean(), 2.0);
    }

    #[test]
    fn continuous_choice_is_rejected() {
        let err = enumerate_law(|ch| ch.std_normal()).unwrap_err();
        assert!(matches!(err, RaviError::NotEnumerable(_)));
    }
}
