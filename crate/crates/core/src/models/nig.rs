//! Normal-inverse-gamma conjugate Gaussian clusters.

use crate::math::ln_gamma;

use super::dpmm::ClusterModel;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Prior `σ² ~ InvGamma(a0, b0)`, `μ | σ² ~ N(μ0, σ²/κ0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NigParams {
    pub mu0: f64,
    pub kappa0: f64,
    pub a0: f64,
    pub b0: f64,
}

impl Default for NigParams {
    fn default() -> Self {
        Self {
            mu0: 0.0,
            kappa0: 0.1,
            a0: 1.0,
            b0: 1.0,
        }
    }
}

impl NigParams {
    /// Log marginal likelihood from the count, sum and sum of squares.
    pub fn log_marginal_stats(&self, n: f64, sum: f64, sumsq: f64) -> f64 {
        if n == 0.0 {
            return 0.0;
        }
        let kn = self.kappa0 + n;
        let mn = (self.kappa0 * self.mu0 + sum) / kn;
        let an = self.a0 + 0.5 * n;
        let bn = self.b0 + 0.5 * (sumsq + self.kappa0 * self.mu0 * self.mu0 - kn * mn * mn);
        ln_gamma(an) - ln_gamma(self.a0) + self.a0 * self.b0.ln() - an * bn.ln()
            + 0.5 * (self.kappa0.ln() - kn.ln())
            - n * HALF_LN_2PI
    }
}

/// `log F(y_I)` for the observations `data[i]`, `i ∈ indices`.
pub fn gaussian_cluster_marginal(indices: &[usize], data: &[f64], params: &NigParams) -> f64 {
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for &i in indices {
        sum += data[i];
        sumsq += data[i] * data[i];
    }
    params.log_marginal_stats(indices.len() as f64, sum, sumsq)
}

/// Gaussian observations with a conjugate prior per cluster.
#[derive(Clone, Debug)]
pub struct GaussianClusters {
    pub data: Vec<f64>,
    pub params: NigParams,
}

impl ClusterModel for GaussianClusters {
    fn len(&self) -> usize {
        self.data.len()
    }

    fn stats(&self, i: usize) -> Vec<f64> {
        vec![1.0, self.data[i], self.data[i] * self.data[i]]
    }

    fn log_marginal_stats(&self, stats: &[f64]) -> f64 {
        self.params.log_marginal_stats(stats[0], stats[1], stats[2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Continuous, StudentsT};

    #[test]
    fn single_point_is_student_t() {
        let p = NigParams {
            mu0: 0.0,
            kappa0: 1.0,
            a0: 1.0,
            b0: 1.0,
        };
        let scale = (p.b0 * (p.kappa0 + 1.0) / (p.a0 * p.kappa0)).sqrt();
        let t = StudentsT::new(p.mu0, scale, 2.0 * p.a0).unwrap();
        for y in [0.0, 0.7, -2.0] {
            let lm = gaussian_cluster_marginal(&[0], &[y], &p);
            assert!((lm - t.ln_pdf(y)).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_rule_and_exchangeability() {
        let p = NigParams::default();
        let data = [0.3, -1.2, 2.0];
        let joint = gaussian_cluster_marginal(&[0, 1, 2], &data, &p);
        let perm = gaussian_cluster_marginal(&[2, 0, 1], &data, &p);
        assert!((joint - perm).abs() < 1e-12);
        // p(y1, y2) = p(y1) p(y2 | y1), with the predictive a Student-t
        let one = gaussian_cluster_marginal(&[0], &data, &p);
        let two = gaussian_cluster_marginal(&[0, 1], &data, &p);
        let kn = p.kappa0 + 1.0;
        let mn = (p.kappa0 * p.mu0 + data[0]) / kn;
        let an = p.a0 + 0.5;
        let bn = p.b0 + 0.5 * p.kappa0 * (data[0] - p.mu0).powi(2) / kn;
        let t = StudentsT::new(mn, (bn * (kn + 1.0) / (an * kn)).sqrt(), 2.0 * an).unwrap();
        assert!((two - one - t.ln_pdf(data[1])).abs() < 1e-12);
    }
}
