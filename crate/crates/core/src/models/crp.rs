//! Chinese restaurant process prior over partitions.

use crate::error::{RaviError, Result};
use crate::math::ln_gamma;

use super::partition::Partition;

/// `log CRP(Π; α)`: `Σ_I [log α + log Γ(|I|)] − Σ_{i<n} log(α + i)`.
pub fn crp_log_prior(p: &Partition, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(RaviError::InvalidArgument(format!(
            "CRP concentration {alpha}"
        )));
    }
    let clusters: f64 = p
        .clusters()
        .iter()
        .map(|c| alpha.ln() + ln_gamma(c.len() as f64))
        .sum();
    let norm: f64 = (0..p.n()).map(|i| (alpha + i as f64).ln()).sum();
    Ok(clusters - norm)
}

/// Change in the CRP log prior from merging clusters of sizes `a` and `b`.
pub fn crp_merge_delta(a: usize, b: usize, alpha: f64) -> f64 {
    ln_gamma((a + b) as f64) - ln_gamma(a as f64) - ln_gamma(b as f64) - alpha.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::logsumexp;
    use crate::models::partition::all_partitions;

    #[test]
    fn two_points() {
        let split = Partition::singletons(2);
        let joined = Partition::new(vec![vec![0, 1]], 2).unwrap();
        assert!((crp_log_prior(&split, 1.0).unwrap() - 0.5f64.ln()).abs() < 1e-14);
        assert!((crp_log_prior(&joined, 1.0).unwrap() - 0.5f64.ln()).abs() < 1e-14);
        assert!(crp_log_prior(&Partition::singletons(1), 1.0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn normalizes_over_all_partitions() {
        for n in 1..=8 {
            for alpha in [0.5, 1.0, 2.7] {
                let l: Vec<f64> = all_partitions(n)
                    .iter()
                    .map(|p| crp_log_prior(p, alpha).unwrap())
                    .collect();
                assert!(logsumexp(&l).abs() < 1e-12, "n={n} alpha={alpha}");
            }
        }
    }

    #[test]
    fn merge_delta_matches_prior_difference() {
        let p = Partition::new(vec![vec![0, 2], vec![1, 3, 4], vec![5]], 6).unwrap();
        let q = p.merge(0, 1);
        let d = crp_log_prior(&q, 1.3).unwrap() - crp_log_prior(&p, 1.3).unwrap();
        assert!((d - crp_merge_delta(2, 3, 1.3)).abs() < 1e-12);
    }
}
