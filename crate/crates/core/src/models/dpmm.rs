//! Collapsed Dirichlet process mixtures over partitions.

use std::sync::Arc;

use crate::error::{RaviError, Result};
use crate::math::logsumexp;
use crate::target::{Ctx, Target};
use crate::value::Value;

use super::crp::crp_log_prior;
use super::partition::{all_partitions, Partition};

/// Largest dataset for which partition targets advertise their atoms.
pub const ENUMERABLE_LIMIT: usize = 8;

/// Exchangeable cluster likelihood with additive sufficient statistics.
pub trait ClusterModel: Send + Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sufficient statistics of observation `i`; a cluster's are the sum.
    fn stats(&self, i: usize) -> Vec<f64>;

    /// `log F(y_I)` from summed statistics.
    fn log_marginal_stats(&self, stats: &[f64]) -> f64;

    fn cluster_stats(&self, indices: &[usize]) -> Vec<f64> {
        let mut acc = self.stats(indices[0]);
        for &i in &indices[1..] {
            for (a, s) in acc.iter_mut().zip(self.stats(i)) {
                *a += s;
            }
        }
        acc
    }

    fn log_marginal(&self, indices: &[usize]) -> f64 {
        self.log_marginal_stats(&self.cluster_stats(indices))
    }
}

/// CRP prior with concentration `alpha` and cluster likelihood `likelihood`.
#[derive(Clone)]
pub struct Dpmm {
    pub alpha: f64,
    pub likelihood: Arc<dyn ClusterModel>,
}

impl Dpmm {
    pub fn new(alpha: f64, likelihood: Arc<dyn ClusterModel>) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(RaviError::InvalidArgument(format!("concentration {alpha}")));
        }
        if likelihood.is_empty() {
            return Err(RaviError::InvalidArgument("empty dataset".into()));
        }
        Ok(Self { alpha, likelihood })
    }

    pub fn n(&self) -> usize {
        self.likelihood.len()
    }

    /// `log p(Π, y) = log CRP(Π) + Σ_I log F(y_I)`.
    pub fn log_joint(&self, p: &Partition) -> Result<f64> {
        if p.n() != self.n() {
            return Err(RaviError::InvalidPartition(format!(
                "partition of {} points for {} observations",
                p.n(),
                self.n()
            )));
        }
        let f: f64 = p
            .clusters()
            .iter()
            .map(|c| self.likelihood.log_marginal(c))
            .sum();
        Ok(crp_log_prior(p, self.alpha)? + f)
    }
}

/// `log p(y)` by summing over every partition.
pub fn exact_log_evidence(model: &Dpmm) -> Result<f64> {
    let l: Vec<f64> = all_partitions(model.n())
        .iter()
        .map(|p| model.log_joint(p))
        .collect::<Result<_>>()?;
    Ok(logsumexp(&l))
}

/// The posterior over partitions as an unnormalized target.
#[derive(Clone)]
pub struct DpmmTarget(pub Dpmm);

impl Target for DpmmTarget {
    fn log_density(&self, _cx: &Ctx, x: &Value) -> Result<f64> {
        self.0.log_joint(&Partition::from_value(x, self.0.n())?)
    }

    fn atoms(&self) -> Option<Vec<Value>> {
        (self.0.n() <= ENUMERABLE_LIMIT).then(|| {
            all_partitions(self.0.n())
                .iter()
                .map(Partition::to_value)
                .collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::nig::{GaussianClusters, NigParams};

    #[test]
    fn evidence_of_one_point_is_its_marginal() {
        let lik = Arc::new(GaussianClusters {
            data: vec![0.4],
            params: NigParams::default(),
        });
        let m = Dpmm::new(1.0, lik.clone()).unwrap();
        assert!((exact_log_evidence(&m).unwrap() - lik.log_marginal(&[0])).abs() < 1e-14);
    }
}
