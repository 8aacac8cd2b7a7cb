//! MCVI versus recursive MCVI across chain lengths.

use std::sync::Arc;

use anyhow::Result;
use ravi::models::GaussianMixtureTarget;
use ravi::strategies::{mcvi_sweep, McviExperiment, McviInit, McviRow, TrainConfig};

use crate::config::McviSection;
use crate::output::Table;

pub const COLUMNS: [&str; 7] = [
    "algorithm",
    "M",
    "K",
    "mean_elbo",
    "stderr",
    "gap_vs_ref",
    "mcmc_steps",
];

pub fn target(cfg: &McviSection) -> Result<Arc<GaussianMixtureTarget>> {
    let t = match cfg.target.as_str() {
        "mixture" => {
            let total: f64 = cfg.mixture_weights.iter().sum();
            let comps = cfg
                .mixture_weights
                .iter()
                .zip(&cfg.mixture_means)
                .zip(&cfg.mixture_stds)
                .map(|((w, m), s)| (w / total, *m, *s))
                .collect();
            GaussianMixtureTarget::new(comps, 0.0)?
        }
        _ => GaussianMixtureTarget::unnormalized_gaussian(cfg.gaussian_std)?,
    };
    Ok(Arc::new(t))
}

/// Trapezoid `log Z` over the target's effective support.
pub fn reference_log_z(t: &GaussianMixtureTarget, points: usize) -> f64 {
    let (lo, hi) = t.support_interval();
    t.log_z_quadrature(lo, hi, points)
}

pub fn run(cfg: &McviSection, seed: u64) -> Result<Vec<McviRow>> {
    let target = target(cfg)?;
    let log_z = reference_log_z(&target, cfg.quadrature_points);
    let exp = McviExperiment {
        target,
        step: cfg.step,
        m_values: cfg.m_values.clone(),
        k_values: cfg.k_values.clone(),
        init: McviInit::default(),
        train: TrainConfig {
            iters: cfg.iters,
            batch: cfg.batch,
            lr: cfg.lr,
            joint_weighting: cfg.joint_weighting,
            seed,
        },
        eval_reps: cfg.eval_reps,
        ais_scale: cfg.ais_scale,
        log_z,
    };
    Ok(mcvi_sweep(&exp)?)
}

pub fn table(rows: &[McviRow], hash: &str, seed: u64) -> Table {
    let mut t = Table::new(&COLUMNS, hash, seed);
    for r in rows {
        t.push(vec![
            r.algorithm.clone(),
            r.m.to_string(),
            r.k.to_string(),
            r.mean_elbo.to_string(),
            r.stderr.to_string(),
            r.gap.to_string(),
            r.mcmc_steps.to_string(),
        ]);
    }
    t
}
