//! Typo model for strings: a bigram base measure and an edit-distance
//! likelihood restricted to the observed lexicon.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{RaviError, Result};
use crate::math::{ln_binomial, logsumexp};

use super::dpmm::ClusterModel;

/// Optimal-string-alignment distance with unit costs for insertion,
/// deletion, substitution and adjacent transposition.
pub fn damerau_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (n, m) = (a.len(), b.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let mut best = (d[i - 1][j] + 1)
                .min(d[i][j - 1] + 1)
                .min(d[i - 1][j - 1] + cost);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                best = best.min(d[i - 2][j - 2] + 1);
            }
            d[i][j] = best;
        }
    }
    d[n][m]
}

/// Character bigram model with an end-of-string symbol. The first
/// character is never the end symbol, so the empty string has probability 0.
#[derive(Clone, Debug)]
pub struct BigramModel {
    pub alphabet: Vec<char>,
    /// `log h(c)` for the first character.
    pub start: Vec<f64>,
    /// `log h(c' | c)`; the last column is the end symbol.
    pub trans: Vec<Vec<f64>>,
}

impl BigramModel {
    /// Uniform transitions with end probability `stop`.
    pub fn uniform(alphabet: Vec<char>, stop: f64) -> Self {
        let a = alphabet.len() as f64;
        let mut row = vec![((1.0 - stop) / a).ln(); alphabet.len()];
        row.push(stop.ln());
        Self {
            start: vec![-a.ln(); alphabet.len()],
            trans: vec![row; alphabet.len()],
            alphabet,
        }
    }

    /// Add-one smoothed estimate from a corpus; the alphabet is the set of
    /// characters in the corpus.
    pub fn fit<S: AsRef<str>>(corpus: &[S]) -> Self {
        let alphabet: Vec<char> = corpus
            .iter()
            .flat_map(|s| s.as_ref().chars())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let k = alphabet.len();
        let pos = |c: char| alphabet.binary_search(&c).expect("character from corpus");
        let mut start = vec![1.0; k];
        let mut trans = vec![vec![1.0; k + 1]; k];
        for s in corpus {
            let cs: Vec<usize> = s.as_ref().chars().map(pos).collect();
            let Some(&first) = cs.first() else { continue };
            start[first] += 1.0;
            for w in cs.windows(2) {
                trans[w[0]][w[1]] += 1.0;
            }
            trans[cs[cs.len() - 1]][k] += 1.0;
        }
        let norm = |v: Vec<f64>| {
            let z: f64 = v.iter().sum();
            v.into_iter().map(|c| (c / z).ln()).collect::<Vec<_>>()
        };
        Self {
            start: norm(start),
            trans: trans.into_iter().map(norm).collect(),
            alphabet,
        }
    }

    fn index(&self, c: char) -> Result<usize> {
        self.alphabet
            .iter()
            .position(|&a| a == c)
            .ok_or(RaviError::OutOfAlphabet(c))
    }
}

/// `log H(s)`, including the end symbol.
pub fn bigram_logprob(s: &str, h: &BigramModel) -> Result<f64> {
    let cs: Vec<usize> = s.chars().map(|c| h.index(c)).collect::<Result<_>>()?;
    let Some(&first) = cs.first() else {
        return Ok(f64::NEG_INFINITY);
    };
    let mut total = h.start[first];
    for w in cs.windows(2) {
        total += h.trans[w[0]][w[1]];
    }
    Ok(total + h.trans[cs[cs.len() - 1]][h.alphabet.len()])
}

/// Success probability of the typo-count distribution.
pub const TYPO_P: f64 = 0.9;
/// Base of the per-edit length penalty.
pub const TYPO_BASE: f64 = 5.09;

/// `log NegBin(k; r, p)` counting failures before the `r`-th success.
fn log_negbin(k: usize, r: usize, p: f64) -> f64 {
    let (k, r) = (k as f64, r as f64);
    ln_binomial(k + r - 1.0, k) + r * p.ln() + k * (1.0 - p).ln()
}

/// Typo likelihood over an observed lexicon.
///
/// For a clean string `x` in the lexicon, `f(y | x) ∝ NegBin(τ; ⌈|x|/5⌉, 0.9)
/// / (5.09|x|)^τ` with `τ` the edit distance, normalized over the lexicon.
#[derive(Clone, Debug)]
pub struct TypoLikelihood {
    pub lexicon: Vec<String>,
    /// `log H(x)` per lexicon entry.
    pub log_h: Vec<f64>,
    /// `log f(y | x)` indexed `[x][y]`.
    pub log_f: Vec<Vec<f64>>,
}

impl TypoLikelihood {
    pub fn new<S: AsRef<str>>(observed: &[S], h: &BigramModel) -> Result<Self> {
        let lexicon: Vec<String> = observed
            .iter()
            .map(|s| s.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if lexicon.is_empty() {
            return Err(RaviError::InvalidArgument("empty corpus".into()));
        }
        let log_h = lexicon
            .iter()
            .map(|s| bigram_logprob(s, h))
            .collect::<Result<Vec<_>>>()?;
        let log_f = lexicon
            .iter()
            .map(|x| {
                let len = x.chars().count().max(1);
                let r = len.div_ceil(5);
                let g: Vec<f64> = lexicon
                    .iter()
                    .map(|y| {
                        let tau = damerau_levenshtein(x, y);
                        log_negbin(tau, r, TYPO_P) - tau as f64 * (TYPO_BASE * len as f64).ln()
                    })
                    .collect();
                let z = logsumexp(&g);
                g.iter().map(|v| v - z).collect()
            })
            .collect();
        Ok(Self {
            lexicon,
            log_h,
            log_f,
        })
    }

    pub fn position(&self, s: &str) -> Option<usize> {
        self.lexicon.binary_search_by(|l| l.as_str().cmp(s)).ok()
    }
}

/// `log F(y_I) = log Σ_x h(x) Π_{i∈I} f(y_i | x)`.
pub fn typo_cluster_marginal<S: AsRef<str>>(
    indices: &[usize],
    data: &[S],
    tl: &TypoLikelihood,
) -> Result<f64> {
    let ys: Vec<usize> = indices
        .iter()
        .map(|&i| {
            tl.position(data[i].as_ref()).ok_or_else(|| {
                RaviError::InvalidArgument(format!("{} is not in the lexicon", data[i].as_ref()))
            })
        })
        .collect::<Result<_>>()?;
    let terms: Vec<f64> = (0..tl.lexicon.len())
        .map(|x| tl.log_h[x] + ys.iter().map(|&y| tl.log_f[x][y]).sum::<f64>())
        .collect();
    Ok(logsumexp(&terms))
}

/// Strings as DPMM observations.
#[derive(Clone, Debug)]
pub struct TypoClusters {
    pub likelihood: Arc<TypoLikelihood>,
    /// Lexicon position of each observation.
    pub obs: Vec<usize>,
}

impl TypoClusters {
    pub fn new<S: AsRef<str>>(data: &[S], h: &BigramModel) -> Result<Self> {
        let likelihood = TypoLikelihood::new(data, h)?;
        let obs = data
            .iter()
            .map(|s| {
                likelihood
                    .position(s.as_ref())
                    .expect("observed string in lexicon")
            })
            .collect();
        Ok(Self {
            likelihood: Arc::new(likelihood),
            obs,
        })
    }
}

impl ClusterModel for TypoClusters {
    fn len(&self) -> usize {
        self.obs.len()
    }

    fn stats(&self, i: usize) -> Vec<f64> {
        let y = self.obs[i];
        self.likelihood.log_f.iter().map(|row| row[y]).collect()
    }

    fn log_marginal_stats(&self, stats: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .likelihood
            .log_h
            .iter()
            .zip(stats)
            .map(|(h, s)| h + s)
            .collect();
        logsumexp(&terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edit_distance_cases() {
        assert_eq!(damerau_levenshtein("", "abc"), 3);
        assert_eq!(damerau_levenshtein("abcd", "acbd"), 1);
        assert_eq!(damerau_levenshtein("kitten", "sitting"), 3);
        assert_eq!(damerau_levenshtein("ca", "abc"), 3);
        assert_eq!(damerau_levenshtein("same", "same"), 0);
    }

    #[test]
    fn uniform_bigram_closed_form() {
        let h = BigramModel::uniform(vec!['a', 'b', 'c'], 0.2);
        let lp = bigram_logprob("abca", &h).unwrap();
        let expected = (0.8f64 / 3.0).ln() * 3.0 + (1.0f64 / 3.0).ln() + 0.2f64.ln();
        assert!((lp - expected).abs() < 1e-12);
        assert_eq!(bigram_logprob("", &h).unwrap(), f64::NEG_INFINITY);
        assert_eq!(
            bigram_logprob("abz", &h),
            Err(RaviError::OutOfAlphabet('z'))
        );
    }

    #[test]
    fn bigram_mass_over_short_strings() {
        let h = BigramModel::uniform(vec!['a', 'b'], 0.5);
        let mut mass = 0.0;
        let mut frontier = vec![String::new()];
        for _ in 0..12 {
            let mut next = Vec::new();
            for s in &frontier {
                for c in ['a', 'b'] {
                    let t = format!("{s}{c}");
                    mass += bigram_logprob(&t, &h).unwrap().exp();
                    next.push(t);
                }
            }
            frontier = next;
        }
        // Remaining mass is the probability of a string longer than 12 characters.
        assert!((mass + 0.5f64.powi(12) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn likelihood_rows_normalize() {
        let data = ["boston", "bostn", "denver", "denvr", "boston"];
        let h = BigramModel::fit(&data);
        let tl = TypoLikelihood::new(&data, &h).unwrap();
        assert_eq!(tl.lexicon.len(), 4);
        for row in &tl.log_f {
            assert!(logsumexp(row).abs() < 1e-12);
        }
        let one = typo_cluster_marginal(&[0], &data, &tl).unwrap();
        let perm = typo_cluster_marginal(&[4, 0, 1], &data, &tl).unwrap();
        let orig = typo_cluster_marginal(&[0, 1, 4], &data, &tl).unwrap();
        assert!((perm - orig).abs() < 1e-12);
        assert!(one.is_finite());
    }
}
