//! DPMM evidence estimates: agglomerative strategies against the SMC baseline.

use std::path::Path;
use std::sync::Arc;

use anyhow::Result;
use ravi::diagnostics::{replicate, EmpiricalStats};
use ravi::models::data::{load_reals, load_strings, DEFAULT_LEXICON};
use ravi::models::dpmm::ENUMERABLE_LIMIT;
use ravi::models::typo::TYPO_P;
use ravi::models::{
    dp_mixture_gaussian, dpmm_smc_baseline, exact_log_evidence, typo_corpus, BigramModel,
    ClusterModel, Dpmm, DpmmTarget, GaussianClusters, NigParams, Partition, TypoClusters,
};
use ravi::strategies::{agglom, modal_partition};
use ravi::{importance, Ctx, ParamStore, RngChoices};

use crate::config::DpmmSection;
use crate::output::{opt, Table};

pub const COLUMNS: [&str; 6] = [
    "method",
    "K_or_N",
    "mean_logZ",
    "std",
    "exact_logZ_or_NA",
    "replicates",
];
pub const TYPO_COLUMNS: [&str; 7] = [
    "run",
    "n",
    "clusters",
    "truth_clusters",
    "modal_share",
    "matches_truth",
    "modal_labels",
];

/// Replicated `log Ẑ` of one estimator.
#[derive(Clone, Debug)]
pub struct Estimate {
    pub method: String,
    pub k_or_n: usize,
    pub log_z: Vec<f64>,
    pub exact: Option<f64>,
}

impl Estimate {
    pub fn stats(&self) -> EmpiricalStats {
        EmpiricalStats::from_samples(&self.log_z)
    }

    /// Statistics of `Ẑ / exp(shift)`, the unbiased scale.
    pub fn z_stats(&self, shift: f64) -> EmpiricalStats {
        let z: Vec<f64> = self.log_z.iter().map(|l| (l - shift).exp()).collect();
        EmpiricalStats::from_samples(&z)
    }
}

/// Outcome of one planted typo run.
#[derive(Clone, Debug)]
pub struct TypoRun {
    pub run: usize,
    pub n: usize,
    pub modal: Partition,
    pub truth: Partition,
    pub share: f64,
}

impl TypoRun {
    pub fn matches(&self) -> bool {
        self.modal == self.truth
    }
}

pub fn nig(cfg: &DpmmSection) -> NigParams {
    NigParams {
        mu0: cfg.mu0,
        kappa0: cfg.kappa0,
        a0: cfg.a0,
        b0: cfg.b0,
    }
}

fn sub_seed(seed: u64, i: u64) -> u64 {
    seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i + 1))
}

/// The configured dataset as a cluster likelihood.
pub fn likelihood(cfg: &DpmmSection, seed: u64) -> Result<Arc<dyn ClusterModel>> {
    let mut rng = RngChoices::new(seed);
    Ok(match cfg.dataset.as_str() {
        "typos" => {
            let data = typo_corpus(&DEFAULT_LEXICON, cfg.typo_copies, TYPO_P, rng.rng())?.data;
            Arc::new(TypoClusters::new(&data, &BigramModel::fit(&data))?)
        }
        "file" if cfg.file_kind == "strings" => {
            let data = load_strings(Path::new(&cfg.data_path))?;
            Arc::new(TypoClusters::new(&data, &BigramModel::fit(&data))?)
        }
        "file" => Arc::new(GaussianClusters {
            data: load_reals(Path::new(&cfg.data_path))?,
            params: nig(cfg),
        }),
        _ => Arc::new(GaussianClusters {
            data: dp_mixture_gaussian(cfg.n, cfg.alpha, &nig(cfg), rng.rng())?.data,
            params: nig(cfg),
        }),
    })
}

/// Agglomerative and SMC estimates of `log p(y)` on a fixed model.
pub fn estimates(cfg: &DpmmSection, model: &Dpmm, seed: u64) -> Result<Vec<Estimate>> {
    let exact = if model.n() <= ENUMERABLE_LIMIT {
        Some(exact_log_evidence(model)?)
    } else {
        None
    };
    let store = ParamStore::new();
    let cx = Ctx::new(&store);
    let target = DpmmTarget(model.clone());
    let mut out = Vec::new();
    for (i, &k) in cfg.agglom_k.iter().enumerate() {
        let s = agglom(model.clone(), k)?;
        let log_z = replicate(cfg.replicates, sub_seed(seed, i as u64), |ch| {
            importance(&cx, &target, &s, ch).map(|w| w.log_weight)
        })?;
        out.push(Estimate {
            method: "agglom".into(),
            k_or_n: k,
            log_z,
            exact,
        });
    }
    for (i, &n) in cfg.smc_particles.iter().enumerate() {
        let log_z = replicate(
            cfg.replicates,
            sub_seed(seed, (cfg.agglom_k.len() + i) as u64),
            |ch| dpmm_smc_baseline(model, n, cfg.rejuvenation_every, ch).map(|o| o.log_z),
        )?;
        out.push(Estimate {
            method: "smc".into(),
            k_or_n: n,
            log_z,
            exact,
        });
    }
    Ok(out)
}

pub fn run(cfg: &DpmmSection, seed: u64) -> Result<Vec<Estimate>> {
    let model = Dpmm::new(cfg.alpha, likelihood(cfg, seed)?)?;
    estimates(cfg, &model, seed)
}

/// Modal agglomerative partitions on `typo_runs` planted corpora.
pub fn typo_runs(cfg: &DpmmSection, seed: u64) -> Result<Vec<TypoRun>> {
    let store = ParamStore::new();
    let cx = Ctx::new(&store);
    (0..cfg.typo_runs)
        .map(|r| {
            let s = seed.wrapping_add(r as u64);
            let planted = typo_corpus(
                &DEFAULT_LEXICON,
                cfg.typo_copies,
                TYPO_P,
                RngChoices::new(s).rng(),
            )?;
            let lik = TypoClusters::new(&planted.data, &BigramModel::fit(&planted.data))?;
            let model = Dpmm::new(cfg.alpha, Arc::new(lik))?;
            let (modal, share) = modal_partition(
                &cx,
                &model,
                cfg.modal_k,
                cfg.modal_samples,
                &mut RngChoices::stream(s, 1),
            )?;
            Ok(TypoRun {
                run: r,
                n: planted.data.len(),
                modal,
                truth: planted.truth,
                share,
            })
        })
        .collect()
}

pub fn table(est: &[Estimate], hash: &str, seed: u64) -> Table {
    let mut t = Table::new(&COLUMNS, hash, seed);
    for e in est {
        let s = e.stats();
        t.push(vec![
            e.method.clone(),
            e.k_or_n.to_string(),
            s.mean.to_string(),
            s.variance.sqrt().to_string(),
            opt(e.exact),
            e.log_z.len().to_string(),
        ]);
    }
    t
}

pub fn typo_table(runs: &[TypoRun], hash: &str, seed: u64) -> Table {
    let mut t = Table::new(&TYPO_COLUMNS, hash, seed);
    for r in runs {
        let labels: Vec<String> = r.modal.labels().iter().map(|l| l.to_string()).collect();
        t.push(vec![
            r.run.to_string(),
            r.n.to_string(),
            r.modal.len().to_string(),
            r.truth.len().to_string(),
            r.share.to_string(),
            r.matches().to_string(),
            labels.join(" "),
        ]);
    }
    t
}
