//! Experiment configuration: `[section]` headers with `key = value` lines.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub mcvi: McviSection,
    pub dpmm: DpmmSection,
    pub diagnose: DiagnoseSection,
    pub kl_bound: KlBoundSection,
}

/// Target and training knobs of the MCVI sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McviSection {
    /// `"gaussian"` or `"mixture"`.
    pub target: String,
    pub gaussian_std: f64,
    pub mixture_means: Vec<f64>,
    pub mixture_stds: Vec<f64>,
    pub mixture_weights: Vec<f64>,
    pub step: f64,
    pub m_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub iters: usize,
    pub batch: usize,
    pub lr: f64,
    pub joint_weighting: bool,
    pub eval_reps: usize,
    /// Random-walk scale of the annealing baseline; zero disables it.
    pub ais_scale: f64,
    pub quadrature_points: usize,
}

impl Default for McviSection {
    fn default() -> Self {
        Self {
            target: "gaussian".into(),
            gaussian_std: 0.2,
            mixture_means: vec![-1.5, 1.5, 0.0],
            mixture_stds: vec![0.2, 0.3, 2.0],
            mixture_weights: vec![1.0, 1.0, 1.0],
            step: 0.015,
            m_values: vec![1, 5, 10, 15, 20, 25, 30, 40],
            k_values: vec![1, 4, 16],
            iters: 300,
            batch: 16,
            lr: 0.005,
            joint_weighting: true,
            eval_reps: 2000,
            ais_scale: 0.2,
            quadrature_points: 100_000,
        }
    }
}

/// Dataset and estimator grid of the DPMM comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpmmSection {
    /// `"gaussian"`, `"typos"` or `"file"`.
    pub dataset: String,
    /// Observations for `dataset = "file"`: reals for Gaussian clusters,
    /// strings when `file_kind = "strings"`.
    pub data_path: String,
    pub file_kind: String,
    pub n: usize,
    pub alpha: f64,
    pub mu0: f64,
    pub kappa0: f64,
    pub a0: f64,
    pub b0: f64,
    pub agglom_k: Vec<usize>,
    pub smc_particles: Vec<usize>,
    pub rejuvenation_every: usize,
    pub replicates: usize,
    pub typo_copies: usize,
    pub typo_runs: usize,
    pub modal_samples: usize,
    pub modal_k: usize,
}

impl Default for DpmmSection {
    fn default() -> Self {
        Self {
            dataset: "gaussian".into(),
            data_path: String::new(),
            file_kind: "reals".into(),
            n: 6,
            alpha: 1.0,
            mu0: 0.0,
            kappa0: 0.1,
            a0: 1.0,
            b0: 1.0,
            agglom_k: vec![1, 4],
            smc_particles: vec![1, 10],
            rejuvenation_every: 0,
            replicates: 2000,
            typo_copies: 5,
            typo_runs: 10,
            modal_samples: 50,
            modal_k: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSection {
    /// Monte Carlo replicates behind the empirical recursion columns.
    pub replicates: usize,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        Self { replicates: 2000 }
    }
}

/// Two binary latent models compared by the symmetric-KL bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KlBoundSection {
    pub p_prior_logit: f64,
    pub p_lik: [f64; 2],
    pub q_prior_logit: f64,
    pub q_lik: [f64; 2],
    pub replicates: usize,
}

impl Default for KlBoundSection {
    fn default() -> Self {
        Self {
            p_prior_logit: 0.5,
            p_lik: [0.2, 0.9],
            q_prior_logit: -0.3,
            q_lik: [0.35, 0.7],
            replicates: 100_000,
        }
    }
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        bail!("{name} must be positive");
    }
    Ok(())
}

fn positive_all(name: &str, vs: &[usize]) -> Result<()> {
    if vs.is_empty() {
        bail!("{name} is empty");
    }
    vs.iter().try_for_each(|&v| positive(name, v))
}

fn positive_real(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("{name} must be positive and finite, got {v}");
    }
    Ok(())
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                Self::parse(&text)
            }
            None => {
                let cfg = Self::default();
                cfg.validate()?;
                Ok(cfg)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.mcvi;
        match m.target.as_str() {
            "gaussian" => positive_real("mcvi.gaussian_std", m.gaussian_std)?,
            "mixture" => {
                let k = m.mixture_means.len();
                if k == 0 || m.mixture_stds.len() != k || m.mixture_weights.len() != k {
                    bail!("mcvi mixture means, stds and weights must be non-empty and of equal length");
                }
                m.mixture_stds
                    .iter()
                    .try_for_each(|&s| positive_real("mcvi.mixture_stds", s))?;
                m.mixture_weights
                    .iter()
                    .try_for_each(|&w| positive_real("mcvi.mixture_weights", w))?;
            }
            other => bail!("unknown mcvi.target {other:?}"),
        }
        positive_real("mcvi.step", m.step)?;
        positive_real("mcvi.lr", m.lr)?;
        positive_all("mcvi.m_values", &m.m_values)?;
        positive_all("mcvi.k_values", &m.k_values)?;
        positive("mcvi.iters", m.iters)?;
        positive("mcvi.batch", m.batch)?;
        if m.eval_reps < 2 {
            bail!("mcvi.eval_reps must be at least 2");
        }
        if m.quadrature_points < 2 {
            bail!("mcvi.quadrature_points must be at least 2");
        }
        if !(m.ais_scale >= 0.0 && m.ais_scale.is_finite()) {
            bail!("mcvi.ais_scale must be non-negative");
        }

        let d = &self.dpmm;
        match d.dataset.as_str() {
            "gaussian" | "typos" => {}
            "file" => {
                if d.data_path.is_empty() {
                    bail!("dpmm.dataset = \"file\" needs dpmm.data_path");
                }
                if !matches!(d.file_kind.as_str(), "reals" | "strings") {
                    bail!("unknown dpmm.file_kind {:?}", d.file_kind);
                }
            }
            other => bail!("unknown dpmm.dataset {other:?}"),
        }
        positive("dpmm.n", d.n)?;
        positive_real("dpmm.alpha", d.alpha)?;
        positive_real("dpmm.kappa0", d.kappa0)?;
        positive_real("dpmm.a0", d.a0)?;
        positive_real("dpmm.b0", d.b0)?;
        positive_all("dpmm.agglom_k", &d.agglom_k)?;
        positive_all("dpmm.smc_particles", &d.smc_particles)?;
        if d.replicates < 2 {
            bail!("dpmm.replicates must be at least 2");
        }
        positive("dpmm.typo_copies", d.typo_copies)?;
        positive("dpmm.typo_runs", d.typo_runs)?;
        positive("dpmm.modal_samples", d.modal_samples)?;
        positive("dpmm.modal_k", d.modal_k)?;

        if self.diagnose.replicates < 2 {
            bail!("diagnose.replicates must be at least 2");
        }

        let k = &self.kl_bound;
        for p in k.p_lik.iter().chain(&k.q_lik) {
            if !(*p > 0.0 && *p < 1.0) {
                bail!("kl_bound likelihoods must lie in (0, 1), got {p}");
            }
        }
        if k.replicates < 2 {
            bail!("kl_bound.replicates must be at least 2");
        }
        Ok(())
    }

    /// Hex SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::parse("[mcvi]\nstep_size = 0.1\n").is_err());
        assert!(Config::parse("[extra]\nx = 1\n").is_err());
    }

    #[test]
    fn overrides_change_the_hash() {
        let a = Config::parse("[mcvi]\nstep = 0.015\n").unwrap();
        let b = Config::parse("[mcvi]\nstep = 0.02\n").unwrap();
        assert_eq!(a.hash(), Config::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn zero_counts_are_rejected() {
        assert!(Config::parse("[mcvi]\nm_values = [1, 0]\n").is_err());
        assert!(Config::parse("[dpmm]\nreplicates = 1\n").is_err());
    }
}
