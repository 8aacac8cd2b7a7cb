//! Random choice points.
//!
//! Every estimator draws its randomness through [`Choices`]. Sampling mode
//! is backed by a seeded ChaCha stream; enumeration mode replays a prefix of
//! discrete decisions and walks every branch with exact probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{RaviError, Result};
use crate::math::softmax;

/// Source of randomness for samplers.
pub trait Choices {
    /// Index drawn with probability proportional to `exp(log_weights[i])`.
    fn categorical(&mut self, log_weights: &[f64]) -> Result<usize>;

    /// Uniform index in `0..n`.
    fn uniform_index(&mut self, n: usize) -> Result<usize>;

    /// `true` with probability `p`.
    fn bernoulli(&mut self, p: f64) -> Result<bool>;

    /// Standard normal draw.
    fn std_normal(&mut self) -> Result<f64>;

    /// Uniform draw on the open unit interval.
    fn uniform(&mut self) -> Result<f64>;
}

/// Sampling-mode choices backed by ChaCha8.
#[derive(Clone, Debug)]
pub struct RngChoices {
    rng: ChaCha8Rng,
}

impl RngChoices {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `k` derived from a root seed.
    pub fn stream(seed: u64, k: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k);
        Self { rng }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn open_unit(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }
}

impl Choices for RngChoices {
    /// Gumbel-max: argmax of `lw_i + G_i`, lowest index on ties.
    fn categorical(&mut self, log_weights: &[f64]) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &lw) in log_weights.iter().enumerate() {
            if lw == f64::NEG_INFINITY {
                continue;
            }
            if lw.is_nan() || lw == f64::INFINITY {
                return Err(RaviError::InvalidArgument(format!(
                    "categorical log-weight {lw}"
                )));
            }
            let u = self.open_unit();
            let key = lw - (-u.ln()).ln();
            if best.is_none_or(|(_, b)| key > b) {
                best = Some((i, key));
            }
        }
        best.map(|(i, _)| i).ok_or(RaviError::EmptyDistribution)
    }

    fn uniform_index(&mut self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(RaviError::EmptyDistribution);
        }
        Ok(self.rng.random_range(0..n))
    }

    fn bernoulli(&mut self, p: f64) -> Result<bool> {
        if !(0.0..=1.0).contains(&p) {
            return Err(RaviError::InvalidArgument(format!("bernoulli p = {p}")));
        }
        Ok(self.rng.random::<f64>() < p)
    }

    fn std_normal(&mut self) -> Result<f64> {
        Ok(self.rng.sample(StandardNormal))
    }

    fn uniform(&mut self) -> Result<f64> {
        Ok(self.open_unit())
    }
}

#[derive(Clone, Debug)]
struct Branch {
    choice: usize,
    probs: Vec<f64>,
}

/// Enumeration-mode choices: replays a fixed prefix of decisions and opens
/// new decisions at their first positive-probability option.
#[derive(Debug, Default)]
struct Replay {
    path: Vec<Branch>,
    pos: usize,
    prob: f64,
}

impl Replay {
    fn choose(&mut self, probs: Vec<f64>) -> Result<usize> {
        let choice = if self.pos < self.path.len() {
            let b = &mut self.path[self.pos];
            if b.probs.len() != probs.len() {
                return Err(RaviError::InvalidArgument(
                    "enumerated computation is not deterministic given its choices".into(),
                ));
            }
            b.probs = probs;
            b.choice
        } else {
            let first = probs
                .iter()
                .position(|&p| p > 0.0)
                .ok_or(RaviError::EmptyDistribution)?;
            self.path.push(Branch {
                choice: first,
                probs,
            });
            first
        };
        self.prob *= self.path[self.pos].probs[choice];
        self.pos += 1;
        Ok(choice)
    }

    /// Advance the odometer to the next unexplored path. Returns false when done.
    fn advance(&mut self) -> bool {
        self.path.truncate(self.pos);
        while let Some(last) = self.path.last_mut() {
            let next = (last.choice + 1..last.probs.len()).find(|&i| last.probs[i] > 0.0);
            match next {
                Some(i) => {
                    last.choice = i;
                    return true;
                }
                None => {
                    self.path.pop();
                }
            }
        }
        false
    }
}

impl Choices for Replay {
    fn categorical(&mut self, log_weights: &[f64]) -> Result<usize> {
        if log_weights.iter().all(|&w| w == f64::NEG_INFINITY) {
            return Err(RaviError::EmptyDistribution);
        }
        self.choose(softmax(log_weights))
    }

    fn uniform_index(&mut self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(RaviError::EmptyDistribution);
        }
        self.choose(vec![1.0 / n as f64; n])
    }

    fn bernoulli(&mut self, p: f64) -> Result<bool> {
        if !(0.0..=1.0).contains(&p) {
            return Err(RaviError::InvalidArgument(format!("bernoulli p = {p}")));
        }
        Ok(self.choose(vec![1.0 - p, p])? == 1)
    }

    fn std_normal(&mut self) -> Result<f64> {
        Err(RaviError::NotEnumerable("normal draw"))
    }

    fn uniform(&mut self) -> Result<f64> {
        Err(RaviError::NotEnumerable("uniform draw"))
    }
}

/// Default path budget for [`enumerate`].
pub const DEFAULT_PATH_LIMIT: usize = 5_000_000;

/// Runs `f` along every branch of its discrete choices and returns each
/// path's output with its exact probability. Zero-probability branches are
/// pruned; continuous draws abort with [`RaviError::NotEnumerable`].
pub fn enumerate<T, F>(mut f: F, limit: usize) -> Result<Vec<(T, f64)>>
where
    F: FnMut(&mut dyn Choices) -> Result<T>,
{
    let mut replay = Replay::default();
    let mut out = Vec::new();
    loop {
        replay.pos = 0;
        replay.prob = 1.0;
        let value = f(&mut replay)?;
        out.push((value, replay.prob));
        if out.len() > limit {
            return Err(RaviError::EnumerationLimit(limit));
        }
        if !replay.advance() {
            return Ok(out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gumbel_max_matches_softmax() {
        let lw = [0.0, (3.0f64).ln(), f64::NEG_INFINITY];
        let mut ch = RngChoices::new(7);
        let mut counts = [0usize; 3];
        let n = 200_000;
        for _ in 0..n {
            counts[ch.categorical(&lw).unwrap()] += 1;
        }
        assert_eq!(counts[2], 0);
        let p1 = counts[1] as f64 / n as f64;
        assert!((p1 - 0.75).abs() < 0.005, "{p1}");
    }

    #[test]
    fn empty_categorical_is_error() {
        let mut ch = RngChoices::new(0);
        assert_eq!(
            ch.categorical(&[f64::NEG_INFINITY]),
            Err(RaviError::EmptyDistribution)
        );
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = {
            let mut c = RngChoices::stream(3, 1);
            (0..4).map(|_| c.uniform().unwrap()).collect()
        };
        let b: Vec<f64> = {
            let mut c = RngChoices::stream(3, 1);
            (0..4).map(|_| c.uniform().unwrap()).collect()
        };
        let c: Vec<f64> = {
            let mut c = RngChoices::stream(3, 2);
            (0..4).map(|_| c.uniform().unwrap()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn enumerates_nested_choices() {
        let paths = enumerate(
            |ch| {
                let a = ch.uniform_index(2)?;
                if a == 0 {
                    Ok(10)
                } else {
                    let b = ch.bernoulli(0.25)?;
                    Ok(if b { 30 } else { 20 })
                }
            },
            100,
        )
        .unwrap();
        let total: f64 = paths.iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert_eq!(paths.len(), 3);
        assert_eq!(paths[2], (30, 0.125));
    }

    #[test]
    fn enumeration_prunes_zero_branches_and_rejects_continuous() {
        let paths = enumerate(|ch| ch.bernoulli(1.0), 10).unwrap();
        assert_eq!(paths, vec![(true, 1.0)]);
        let err = enumerate(|ch| ch.std_normal(), 10).unwrap_err();
        assert!(matches!(err, RaviError::NotEnumerable(_)));
        let err = enumerate(|ch| ch.uniform_index(5), 2).unwrap_err();
        assert_eq!(err, RaviError::EnumerationLimit(2));
    }
}
