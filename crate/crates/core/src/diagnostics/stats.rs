//! Streaming moments of replicated estimators.

use rayon::prelude::*;

use crate::choice::RngChoices;
use crate::error::{RaviError, Result};

/// Single-pass mean and variance accumulator.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Welford {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Combines two accumulators as if their samples were pooled.
    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        self.m2 / (self.n - 1) as f64
    }

    pub fn std_err(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    pub fn stats(&self) -> EmpiricalStats {
        EmpiricalStats {
            n: self.n as usize,
            mean: self.mean,
            variance: self.variance(),
            std_err: self.std_err(),
        }
    }
}

/// Replicate summary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmpiricalStats {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_err: f64,
}

impl EmpiricalStats {
    pub fn from_samples(xs: &[f64]) -> Self {
        let mut w = Welford::default();
        xs.iter().for_each(|&x| w.push(x));
        w.stats()
    }

    /// `|mean − value| ≤ k · std_err`.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_err
    }
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < 2 {
        return Err(RaviError::InvalidArgument(format!(
            "{reps} replicates; at least 2 needed"
        )));
    }
    Ok(())
}

/// Runs `f` on `reps` independent streams derived from `seed` in parallel.
/// Samples are accumulated in replicate order, so results do not depend on
/// thread scheduling.
pub fn replicate<T, F>(reps: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut RngChoices) -> Result<T> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|k| f(&mut RngChoices::stream(seed, k as u64)))
        .collect()
}

pub fn empirical_stats<F>(reps: usize, seed: u64, f: F) -> Result<EmpiricalStats>
where
    F: Fn(&mut RngChoices) -> Result<f64> + Sync,
{
    check_reps(reps)?;
    Ok(EmpiricalStats::from_samples(&replicate(reps, seed, f)?))
}

/// Per-coordinate summary of a vector-valued estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct VecStats {
    pub n: usize,
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

pub fn empirical_vec_stats<F>(reps: usize, seed: u64, f: F) -> Result<VecStats>
where
    F: Fn(&mut RngChoices) -> Result<Vec<f64>> + Sync,
{
    check_reps(reps)?;
    let samples = replicate(reps, seed, f)?;
    let dim = samples[0].len();
    let mut acc = vec![Welford::default(); dim];
    for s in &samples {
        for (w, &x) in acc.iter_mut().zip(s) {
            w.push(x);
        }
    }
    Ok(VecStats {
        n: reps,
        mean: acc.iter().map(|w| w.mean).collect(),
        std_err: acc.iter().map(Welford::std_err).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::Choices;

    #[test]
    fn constant_sampler_has_zero_variance() {
        let s = empirical_stats(100, 1, |_| Ok(2.5)).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.variance, 0.0);
    }

    #[test]
    fn merge_matches_pooled() {
        let xs = [1.0, 4.0, -2.0, 0.5, 9.0];
        let mut a = Welford::default();
        let mut b = Welford::default();
        xs[..2].iter().for_each(|&x| a.push(x));
        xs[2..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        let pooled = EmpiricalStats::from_samples(&xs);
        assert!((a.mean - pooled.mean).abs() < 1e-14);
        assert!((a.variance() - pooled.variance).abs() < 1e-12);
    }

    #[test]
    fn fair_coin_mean() {
        let s = empirical_stats(1_000_000, 9, |ch| {
            Ok(f64::from(u8::from(ch.bernoulli(0.5)?)))
        })
        .unwrap();
        assert!((s.mean - 0.5).abs() < 0.002);
    }

    #[test]
    fn reproducible_across_runs() {
        let f = |ch: &mut RngChoices| ch.std_normal();
        assert_eq!(
            empirical_stats(1000, 5, f).unwrap(),
            empirical_stats(1000, 5, f).unwrap()
        );
    }
}
