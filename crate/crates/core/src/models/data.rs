//! Synthetic datasets and the plain-text loader.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Geometric, Normal};

use crate::error::{RaviError, Result};

use super::nig::NigParams;
use super::partition::Partition;

/// A dataset with its generating clustering.
#[derive(Clone, Debug)]
pub struct Planted<T> {
    pub data: Vec<T>,
    pub truth: Partition,
}

/// Draws CRP table assignments for `n` customers.
pub fn crp_labels<R: Rng + ?Sized>(n: usize, alpha: f64, rng: &mut R) -> Vec<usize> {
    let mut counts: Vec<usize> = Vec::new();
    let mut labels = Vec::with_capacity(n);
    for t in 0..n {
        let u = rng.random::<f64>() * (t as f64 + alpha);
        let mut acc = 0.0;
        let mut k = counts.len();
        for (j, &c) in counts.iter().enumerate() {
            acc += c as f64;
            if u < acc {
                k = j;
                break;
            }
        }
        if k == counts.len() {
            counts.push(0);
        }
        counts[k] += 1;
        labels.push(k);
    }
    labels
}

/// One-dimensional draw from a DP mixture with a Normal-Inverse-Gamma base.
pub fn dp_mixture_gaussian<R: Rng + ?Sized>(
    n: usize,
    alpha: f64,
    base: &NigParams,
    rng: &mut R,
) -> Result<Planted<f64>> {
    let labels = crp_labels(n, alpha, rng);
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let precision = Gamma::new(base.a0, 1.0 / base.b0)
        .map_err(|e| RaviError::InvalidArgument(e.to_string()))?;
    let comps: Vec<(f64, f64)> = (0..k)
        .map(|_| {
            let var = 1.0 / precision.sample(rng);
            let mu = Normal::new(base.mu0, (var / base.kappa0).sqrt())
                .expect("finite scale")
                .sample(rng);
            (mu, var.sqrt())
        })
        .collect();
    let data = labels
        .iter()
        .map(|&l| {
            Normal::new(comps[l].0, comps[l].1)
                .expect("finite scale")
                .sample(rng)
        })
        .collect();
    Ok(Planted {
        data,
        truth: Partition::from_labels(&labels),
    })
}

/// Applies one random insertion, deletion, substitution or adjacent swap.
fn random_edit<R: Rng + ?Sized>(s: &[char], alphabet: &[char], rng: &mut R) -> Vec<char> {
    let mut out = s.to_vec();
    let op = if out.len() < 2 {
        rng.random_range(0..2) * 2
    } else {
        rng.random_range(0..4)
    };
    match op {
        0 => {
            let c = alphabet[rng.random_range(0..alphabet.len())];
            out.insert(rng.random_range(0..=out.len()), c);
        }
        1 => {
            out.remove(rng.random_range(0..out.len()));
        }
        2 if !out.is_empty() => {
            let i = rng.random_range(0..out.len());
            out[i] = alphabet[rng.random_range(0..alphabet.len())];
        }
        2 => out.push(alphabet[rng.random_range(0..alphabet.len())]),
        _ => {
            let i = rng.random_range(0..out.len() - 1);
            out.swap(i, i + 1);
        }
    }
    out
}

/// Lexicon of well-separated clean strings for the default typo corpus.
pub const DEFAULT_LEXICON: [&str; 4] = ["philadelphia", "sacramento", "minneapolis", "albuquerque"];

/// `copies` noisy duplicates of each lexicon string; each copy receives
/// `NegBin(⌈|x|/5⌉, p)` random edits over the lowercase alphabet.
pub fn typo_corpus<R: Rng + ?Sized>(
    lexicon: &[&str],
    copies: usize,
    p: f64,
    rng: &mut R,
) -> Result<Planted<String>> {
    let alphabet: Vec<char> = ('a'..='z').collect();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (k, word) in lexicon.iter().enumerate() {
        let chars: Vec<char> = word.chars().collect();
        let r = chars.len().max(1).div_ceil(5);
        let geom = Geometric::new(p).map_err(|e| RaviError::InvalidArgument(e.to_string()))?;
        for _ in 0..copies {
            let edits: u64 = (0..r).map(|_| geom.sample(rng)).sum();
            let mut s = chars.clone();
            for _ in 0..edits {
                s = random_edit(&s, &alphabet, rng);
            }
            data.push(s.into_iter().collect());
            labels.push(k);
        }
    }
    Ok(Planted {
        data,
        truth: Partition::from_labels(&labels),
    })
}

fn observation_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty())
}

/// Numbers, one per line; lines starting with `#` are skipped.
pub fn parse_reals(text: &str) -> Result<Vec<f64>> {
    observation_lines(text)
        .map(|(n, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| RaviError::InvalidArgument(format!("line {n}: {e}")))
        })
        .collect()
}

/// Raw strings, one per line; lines starting with `#` are skipped.
pub fn parse_strings(text: &str) -> Vec<String> {
    observation_lines(text)
        .map(|(_, l)| l.to_string())
        .collect()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| RaviError::InvalidArgument(format!("{}: {e}", path.display())))
}

pub fn load_reals(path: &Path) -> Result<Vec<f64>> {
    parse_reals(&read(path)?)
}

pub fn load_strings(path: &Path) -> Result<Vec<String>> {
    Ok(parse_strings(&read(path)?))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn loader_skips_comments() {
        let xs = parse_reals("# header\n1.5\n\n-2\n#x\n3e-1\n").unwrap();
        assert_eq!(xs, vec![1.5, -2.0, 0.3]);
        assert!(parse_reals("abc\n").is_err());
        assert_eq!(parse_strings("#c\nfoo bar\nbaz\n"), vec!["foo bar", "baz"]);
    }

    #[test]
    fn generators_are_seeded() {
        let a = dp_mixture_gaussian(
            10,
            1.0,
            &NigParams::default(),
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        let b = dp_mixture_gaussian(
            10,
            1.0,
            &NigParams::default(),
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        assert_eq!(a.data, b.data);
        let c = typo_corpus(&DEFAULT_LEXICON, 5, 0.9, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(c.data.len(), 20);
        assert_eq!(c.truth.len(), 4);
    }
}
