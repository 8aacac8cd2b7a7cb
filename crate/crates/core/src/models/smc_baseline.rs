//! Sequential Monte Carlo over partitions, one datapoint at a time.

use crate::choice::Choices;
use crate::error::{RaviError, Result};
use crate::math::{log_mean_exp, logsumexp};

use super::dpmm::Dpmm;
use super::partition::Partition;

#[derive(Clone, Debug)]
struct Cluster {
    members: Vec<usize>,
    stats: Vec<f64>,
    log_f: f64,
}

#[derive(Clone, Debug, Default)]
struct Particle {
    clusters: Vec<Cluster>,
}

impl Particle {
    /// Log weights of joining each existing cluster, then of opening a new one,
    /// each times `F(y_{I∪t}) / F(y_I)` and divided by `t + α` with `t` points seen.
    fn options(&self, model: &Dpmm, i: usize, seen: usize) -> Vec<f64> {
        let lik = &model.likelihood;
        let s = lik.stats(i);
        let denom = (seen as f64 + model.alpha).ln();
        let mut out: Vec<f64> = self
            .clusters
            .iter()
            .map(|c| {
                let joined: Vec<f64> = c.stats.iter().zip(&s).map(|(a, b)| a + b).collect();
                (c.members.len() as f64).ln() + lik.log_marginal_stats(&joined) - c.log_f - denom
            })
            .collect();
        out.push(model.alpha.ln() + lik.log_marginal_stats(&s) - denom);
        out
    }

    fn assign(&mut self, model: &Dpmm, i: usize, k: usize) {
        let lik = &model.likelihood;
        if k == self.clusters.len() {
            let stats = lik.stats(i);
            let log_f = lik.log_marginal_stats(&stats);
            self.clusters.push(Cluster {
                members: vec![i],
                stats,
                log_f,
            });
        } else {
            let c = &mut self.clusters[k];
            c.members.push(i);
            for (a, b) in c.stats.iter_mut().zip(lik.stats(i)) {
                *a += b;
            }
            c.log_f = lik.log_marginal_stats(&c.stats);
        }
    }

    fn remove(&mut self, model: &Dpmm, i: usize) {
        let k = self
            .clusters
            .iter()
            .position(|c| c.members.contains(&i))
            .expect("assigned point");
        let c = &mut self.clusters[k];
        c.members.retain(|&m| m != i);
        if c.members.is_empty() {
            self.clusters.remove(k);
        } else {
            c.stats = model.likelihood.cluster_stats(&c.members);
            c.log_f = model.likelihood.log_marginal_stats(&c.stats);
        }
    }

    /// One systematic-scan Gibbs sweep over points `0..seen`.
    fn gibbs_sweep(&mut self, model: &Dpmm, seen: usize, ch: &mut dyn Choices) -> Result<()> {
        for i in 0..seen {
            self.remove(model, i);
            let opts = self.options(model, i, seen - 1);
            let k = ch.categorical(&opts)?;
            self.assign(model, i, k);
        }
        Ok(())
    }

    fn partition(&self, n: usize) -> Result<Partition> {
        Partition::new(self.clusters.iter().map(|c| c.members.clone()).collect(), n)
    }
}

/// Final particle population and evidence estimate.
#[derive(Clone, Debug)]
pub struct SmcBaselineOutput {
    pub log_z: f64,
    pub partitions: Vec<Partition>,
    /// Normalized-by-convention final log weights; zero after the last resampling.
    pub log_weights: Vec<f64>,
}

/// Fully adapted particle filter over CRP assignments.
///
/// Each step weights particles by the predictive `p(y_t | Π_{t-1})`,
/// resamples multinomially, then draws the assignment of `y_t` from its
/// exact conditional. With `rejuvenation_every = r > 0`, every particle gets
/// a Gibbs sweep over the points seen so far after each `r`-th datapoint.
pub fn dpmm_smc_baseline(
    model: &Dpmm,
    particles: usize,
    rejuvenation_every: usize,
    ch: &mut dyn Choices,
) -> Result<SmcBaselineOutput> {
    if particles == 0 {
        return Err(RaviError::InvalidArgument("at least one particle".into()));
    }
    let n = model.n();
    let mut pop = vec![Particle::default(); particles];
    let mut log_z = 0.0;
    for t in 0..n {
        let opts: Vec<Vec<f64>> = pop.iter().map(|p| p.options(model, t, t)).collect();
        let w: Vec<f64> = opts.iter().map(|o| logsumexp(o)).collect();
        log_z += log_mean_exp(&w);
        let idx = if particles == 1 {
            vec![0]
        } else {
            (0..particles)
                .map(|_| ch.categorical(&w))
                .collect::<Result<Vec<_>>>()?
        };
        let mut next = Vec::with_capacity(particles);
        for &a in &idx {
            let mut p = pop[a].clone();
            let k = ch.categorical(&opts[a])?;
            p.assign(model, t, k);
            next.push(p);
        }
        pop = next;
        if rejuvenation_every > 0 && (t + 1) % rejuvenation_every == 0 {
            for p in &mut pop {
                p.gibbs_sweep(model, t + 1, ch)?;
            }
        }
    }
    Ok(SmcBaselineOutput {
        log_z,
        partitions: pop.iter().map(|p| p.partition(n)).collect::<Result<_>>()?,
        log_weights: vec![0.0; particles],
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::choice::{enumerate, RngChoices};
    use crate::models::dpmm::exact_log_evidence;
    use crate::models::nig::{GaussianClusters, NigParams};

    fn model(data: Vec<f64>) -> Dpmm {
        Dpmm::new(
            1.0,
            Arc::new(GaussianClusters {
                data,
                params: NigParams::default(),
            }),
        )
        .unwrap()
    }

    #[test]
    fn single_particle_is_exact_for_one_point() {
        let m = model(vec![0.3]);
        let out = dpmm_smc_baseline(&m, 1, 0, &mut RngChoices::new(1)).unwrap();
        assert!((out.log_z - exact_log_evidence(&m).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn unbiased_by_enumeration_on_three_points() {
        let m = model(vec![-1.0, 0.2, 1.5]);
        let exact = exact_log_evidence(&m).unwrap().exp();
        for (particles, rejuv) in [(1, 0), (1, 1), (2, 0), (2, 2)] {
            let law = enumerate(
                |ch| dpmm_smc_baseline(&m, particles, rejuv, ch).map(|o| o.log_z),
                5_000_000,
            )
            .unwrap();
            let mean: f64 = law.iter().map(|(lz, p)| p * lz.exp()).sum();
            assert!(
                (mean / exact - 1.0).abs() < 1e-10,
                "N={particles} r={rejuv}"
            );
        }
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let m = model(vec![0.5; 6]);
        let out = dpmm_smc_baseline(&m, 50, 2, &mut RngChoices::new(3)).unwrap();
        let single = out.partitions.iter().filter(|p| p.len() == 1).count();
        assert!(single > 25);
    }
}
