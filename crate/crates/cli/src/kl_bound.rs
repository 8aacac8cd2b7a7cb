//! Symmetric-KL bound between two binary latent models.

use std::sync::Arc;

use anyhow::Result;
use ravi::diagnostics::{replicate, EmpiricalStats};
use ravi::models::BinaryLatentModel;
use ravi::strategies::{sir, DiscreteProposal};
use ravi::{
    symmetric_kl_bound, Ctx, ModelWithStrategy, ParamRef, ParamStore, RaviError, Strategy, Value,
};

use crate::config::KlBoundSection;
use crate::output::Table;

pub const COLUMNS: [&str; 5] = ["strategy", "mean_bound", "stderr", "exact_kl", "replicates"];
pub const STRATEGIES: [&str; 3] = ["exact", "crude_uniform", "crude_sir_n2"];

#[derive(Clone, Debug)]
pub struct KlRow {
    pub strategy: String,
    pub stats: EmpiricalStats,
    pub exact: f64,
}

pub fn models(cfg: &KlBoundSection) -> Result<(Arc<BinaryLatentModel>, Arc<BinaryLatentModel>)> {
    Ok((
        Arc::new(BinaryLatentModel::new(
            ParamRef::Fixed(cfg.p_prior_logit),
            cfg.p_lik,
        )?),
        Arc::new(BinaryLatentModel::new(
            ParamRef::Fixed(cfg.q_prior_logit),
            cfg.q_lik,
        )?),
    ))
}

/// `KL(p‖q) + KL(q‖p)` between the data marginals, by enumeration.
pub fn exact_symmetric_kl(cx: &Ctx, p: &BinaryLatentModel, q: &BinaryLatentModel) -> f64 {
    (0..2)
        .map(|y| {
            let (lp, lq) = (p.log_evidence(cx, y), q.log_evidence(cx, y));
            (lp.exp() - lq.exp()) * (lp - lq)
        })
        .sum()
}

fn observed(y: &Value) -> ravi::Result<usize> {
    match y {
        Value::Int(b @ 0..=1) => Ok(*b as usize),
        other => Err(RaviError::InvalidArgument(format!(
            "expected a bit, got {other:?}"
        ))),
    }
}

fn with_strategy(model: &Arc<BinaryLatentModel>, kind: &str) -> ModelWithStrategy {
    let m = model.clone();
    let kind = kind.to_string();
    ModelWithStrategy::new(
        model.clone(),
        move |cx: &Ctx, y: &Value| -> ravi::Result<Strategy> {
            let y = observed(y)?;
            let atoms = BinaryLatentModel::atoms();
            match kind.as_str() {
                "exact" => {
                    let lz = m.log_evidence(cx, y);
                    let probs: Vec<f64> = (0..2)
                        .map(|x| (m.log_joint_bits(cx, x, y) - lz).exp())
                        .collect();
                    Ok(Strategy::terminal(DiscreteProposal::from_probs(
                        atoms, &probs,
                    )?))
                }
                "crude_uniform" => Ok(Strategy::terminal(DiscreteProposal::uniform(atoms))),
                _ => sir(
                    Arc::new(m.posterior(y)),
                    Arc::new(DiscreteProposal::uniform(atoms)),
                    2,
                ),
            }
        },
    )
}

pub fn run(cfg: &KlBoundSection, seed: u64) -> Result<Vec<KlRow>> {
    let store = ParamStore::new();
    let cx = Ctx::new(&store);
    let (p, q) = models(cfg)?;
    let exact = exact_symmetric_kl(&cx, &p, &q);
    STRATEGIES
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let (ps, qs) = (with_strategy(&p, kind), with_strategy(&q, kind));
            let d = replicate(cfg.replicates, seed.wrapping_add(i as u64), |ch| {
                symmetric_kl_bound(&cx, &ps, &qs, ch)
            })?;
            Ok(KlRow {
                strategy: kind.to_string(),
                stats: EmpiricalStats::from_samples(&d),
                exact,
            })
        })
        .collect()
}

pub fn table(rows: &[KlRow], hash: &str, seed: u64) -> Table {
    let mut t = Table::new(&COLUMNS, hash, seed);
    for r in rows {
        t.push(vec![
            r.strategy.clone(),
            r.stats.mean.to_string(),
            r.stats.std_err.to_string(),
            r.exact.to_string(),
            r.stats.n.to_string(),
        ]);
    }
    t
}
