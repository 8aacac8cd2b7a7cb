//! Exact variance and bias recursions over strategy levels.
//!
//! Each level contributes a divergence between a proposal marginal and the
//! distribution it targets, weighted by the levels above it. Level `l`
//! rows hold the weighted contribution of nesting depth `l`, so the rows
//! sum to the total. The enumerated law of the estimator itself gives an
//! independent value for the same total.

use crate::choice::Choices;
use crate::error::{RaviError, Result};
use crate::importance::{hme, importance};
use crate::math::logsumexp;
use crate::strategy::{Node, Strategy};
use crate::target::{Ctx, Target};
use crate::value::Value;

use super::law::enumerate_law;
use super::stats::{replicate, EmpiricalStats};

type Dist = Vec<(Value, f64)>;

fn prob(d: &Dist, x: &Value) -> f64 {
    d.iter().find(|(v, _)| v == x).map_or(0.0, |(_, p)| *p)
}

fn add(d: &mut Dist, x: Value, p: f64) {
    match d.iter_mut().find(|(v, _)| *v == x) {
        Some((_, q)) => *q += p,
        None => d.push((x, p)),
    }
}

/// Enumerated marginal of `S.q`, with the joint law of `(r, x)` grouped by
/// `x` for compound nodes.
struct Marginal {
    q: Dist,
    joint: Option<Vec<(Value, Dist)>>,
}

impl Marginal {
    fn of(cx: &Ctx, s: &Strategy) -> Result<Self> {
        match &s.node {
            Node::Terminal(q) => {
                let law = enumerate_law(|ch| q.sample(cx, ch))?;
                let mut d = Dist::new();
                for (x, p) in law.outcomes {
                    add(&mut d, x, p);
                }
                Ok(Self { q: d, joint: None })
            }
            Node::Compound(j) => {
                let law = enumerate_law(|ch| j.sample_joint(cx, ch))?;
                let mut q = Dist::new();
                let mut joint: Vec<(Value, Dist)> = Vec::new();
                for ((r, x), p) in law.outcomes {
                    add(&mut q, x.clone(), p);
                    match joint.iter_mut().find(|(v, _)| *v == x) {
                        Some((_, d)) => add(d, r, p),
                        None => joint.push((x, vec![(r, p)])),
                    }
                }
                Ok(Self {
                    q,
                    joint: Some(joint),
                })
            }
        }
    }

    /// `S.q(· | x)` and the meta-strategy at `x`, for compound nodes.
    fn conditional(&self, cx: &Ctx, s: &Strategy, x: &Value) -> Result<Option<(Dist, Strategy)>> {
        let (Some(joint), Node::Compound(j)) = (&self.joint, &s.node) else {
            return Ok(None);
        };
        let Some((_, d)) = joint.iter().find(|(v, _)| v == x) else {
            return Ok(None);
        };
        let qx: f64 = d.iter().map(|(_, p)| p).sum();
        let cond = d.iter().map(|(r, p)| (r.clone(), p / qx)).collect();
        Ok(Some((cond, j.meta(cx, x)?)))
    }
}

fn accumulate(terms: &mut Vec<f64>, sub: &[f64], w: f64) {
    for (l, t) in sub.iter().enumerate() {
        if terms.len() <= l + 1 {
            terms.push(0.0);
        }
        if w != 0.0 {
            terms[l + 1] += w * t;
        }
    }
}

fn var_hat(cx: &Ctx, pi: &Dist, s: &Strategy) -> Result<Vec<f64>> {
    let m = Marginal::of(cx, s)?;
    let mut terms = vec![-1.0];
    for (x, p) in pi.iter().filter(|(_, p)| *p > 0.0) {
        let q = prob(&m.q, x);
        terms[0] += p * p / q;
        if let Some((cond, meta)) = m.conditional(cx, s, x)? {
            accumulate(&mut terms, &var_check(cx, &cond, &meta)?, p * p / q);
        }
    }
    Ok(terms)
}

fn var_check(cx: &Ctx, pi: &Dist, s: &Strategy) -> Result<Vec<f64>> {
    let m = Marginal::of(cx, s)?;
    let mut terms = vec![-1.0];
    for (x, p) in pi.iter().filter(|(_, p)| *p > 0.0) {
        let q = prob(&m.q, x);
        terms[0] += q * q / p;
        if q > 0.0 {
            if let Some((cond, meta)) = m.conditional(cx, s, x)? {
                accumulate(&mut terms, &var_hat(cx, &cond, &meta)?, q * q / p);
            }
        }
    }
    Ok(terms)
}

fn kl_term(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / q).ln()
    }
}

fn bias_l(cx: &Ctx, pi: &Dist, s: &Strategy) -> Result<Vec<f64>> {
    let m = Marginal::of(cx, s)?;
    let mut terms = vec![0.0];
    for (x, q) in m.q.iter().filter(|(_, q)| *q > 0.0) {
        terms[0] -= kl_term(*q, prob(pi, x));
        if let Some((cond, meta)) = m.conditional(cx, s, x)? {
            accumulate(&mut terms, &bias_u(cx, &cond, &meta)?, -q);
        }
    }
    Ok(terms)
}

fn bias_u(cx: &Ctx, pi: &Dist, s: &Strategy) -> Result<Vec<f64>> {
    let m = Marginal::of(cx, s)?;
    let mut terms = vec![0.0];
    for (x, p) in pi.iter().filter(|(_, p)| *p > 0.0) {
        let q = prob(&m.q, x);
        terms[0] += kl_term(*p, q);
        if q > 0.0 {
            if let Some((cond, meta)) = m.conditional(cx, s, x)? {
                accumulate(&mut terms, &bias_l(cx, &cond, &meta)?, -p);
            }
        }
    }
    Ok(terms)
}

/// Normalized target law and `log Z`.
fn target_dist(cx: &Ctx, target: &dyn Target) -> Result<(Dist, f64)> {
    let atoms = target
        .atoms()
        .ok_or(RaviError::NotEnumerable("target does not list its atoms"))?;
    let lw: Vec<f64> = atoms
        .iter()
        .map(|a| target.log_density(cx, a))
        .collect::<Result<_>>()?;
    let log_z = logsumexp(&lw);
    let d = atoms
        .into_iter()
        .zip(&lw)
        .map(|(a, l)| (a, (l - log_z).exp()))
        .collect();
    Ok((d, log_z))
}

fn draw(d: &Dist, ch: &mut dyn Choices) -> Result<Value> {
    let lw: Vec<f64> = d.iter().map(|(_, p)| p.ln()).collect();
    Ok(d[ch.categorical(&lw)?].0.clone())
}

/// One CSV row: `level, term_name, exact_value, empirical_value, std_err`.
#[derive(Clone, Debug, PartialEq)]
pub struct RecursionRow {
    /// Nesting depth, or `None` for summary rows.
    pub level: Option<usize>,
    pub term_name: String,
    pub exact_value: f64,
    pub empirical_value: Option<f64>,
    pub std_err: Option<f64>,
}

/// Per-level terms of one recursion with its total.
#[derive(Clone, Debug, PartialEq)]
pub struct RecursionReport {
    pub quantity: String,
    pub terms: Vec<RecursionRow>,
    /// Sum of the level terms.
    pub total: f64,
    /// The same quantity from the enumerated law of the estimator.
    pub enumerated: f64,
    pub empirical: Option<EmpiricalStats>,
}

impl RecursionReport {
    fn new(quantity: &str, names: [&str; 2], terms: Vec<f64>, enumerated: f64) -> Self {
        let total = terms.iter().sum();
        let rows = terms
            .iter()
            .enumerate()
            .map(|(l, &v)| RecursionRow {
                level: Some(l),
                term_name: names[l % 2].to_string(),
                exact_value: v,
                empirical_value: None,
                std_err: None,
            })
            .collect();
        Self {
            quantity: quantity.to_string(),
            terms: rows,
            total,
            enumerated,
            empirical: None,
        }
    }

    /// Level rows followed by the total and the enumerated-law value.
    pub fn rows(&self) -> Vec<RecursionRow> {
        let mut out = self.terms.clone();
        out.push(RecursionRow {
            level: None,
            term_name: "total".into(),
            exact_value: self.total,
            empirical_value: self.empirical.map(|e| e.mean),
            std_err: self.empirical.map(|e| e.std_err),
        });
        out.push(RecursionRow {
            level: None,
            term_name: "enumerated".into(),
            exact_value: self.enumerated,
            empirical_value: None,
            std_err: None,
        });
        out
    }

    /// Relative gap between the recursion total and the enumerated value.
    pub fn rel_error(&self) -> f64 {
        (self.total - self.enumerated).abs() / self.enumerated.abs().max(f64::MIN_POSITIVE)
    }
}

/// Relative variances of `Ẑ` (importance) and `Z/Ž` (harmonic mean, `x ~ π`).
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceReport {
    pub zhat: RecursionReport,
    pub zcheck: RecursionReport,
}

/// Biases of `L̂` and `Û` as estimators of `log Z`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasReport {
    pub lower: RecursionReport,
    pub upper: RecursionReport,
}

/// Variance recursion for a strategy on an enumerable target.
pub fn variance_recursion(cx: &Ctx, target: &dyn Target, s: &Strategy) -> Result<VarianceReport> {
    let (pi, log_z) = target_dist(cx, target)?;
    let imp =
        enumerate_law(|ch| importance(cx, target, s, ch).map(|w| (w.log_weight - log_z).exp()))?;
    let rev = enumerate_law(|ch| {
        let x = draw(&pi, ch)?;
        hme(cx, target, &x, s, ch).map(|lw| (lw + log_z).exp())
    })?;
    Ok(VarianceReport {
        zhat: RecursionReport::new(
            "var_zhat",
            ["chi2(target||q)", "chi2(q||target)"],
            var_hat(cx, &pi, s)?,
            imp.variance(),
        ),
        zcheck: RecursionReport::new(
            "var_zcheck",
            ["chi2(q||target)", "chi2(target||q)"],
            var_check(cx, &pi, s)?,
            rev.variance(),
        ),
    })
}

/// Bias recursion for a strategy on an enumerable unnormalized posterior
/// `x ↦ p(x, y)`.
pub fn bias_recursion(cx: &Ctx, target: &dyn Target, s: &Strategy) -> Result<BiasReport> {
    let (pi, log_z) = target_dist(cx, target)?;
    let lower = enumerate_law(|ch| importance(cx, target, s, ch).map(|w| w.log_weight - log_z))?;
    let upper = enumerate_law(|ch| {
        let x = draw(&pi, ch)?;
        hme(cx, target, &x, s, ch).map(|lw| -lw - log_z)
    })?;
    Ok(BiasReport {
        lower: RecursionReport::new(
            "bias_lower",
            ["-kl(q||target)", "-kl(target||q)"],
            bias_l(cx, &pi, s)?,
            lower.mean(),
        ),
        upper: RecursionReport::new(
            "bias_upper",
            ["kl(target||q)", "kl(q||target)"],
            bias_u(cx, &pi, s)?,
            upper.mean(),
        ),
    })
}

/// Sample variance of `xs` with the standard error of that variance.
fn variance_with_se(xs: &[f64]) -> EmpiricalStats {
    let s = EmpiricalStats::from_samples(xs);
    let n = xs.len() as f64;
    let m4 = xs.iter().map(|x| (x - s.mean).powi(4)).sum::<f64>() / n;
    EmpiricalStats {
        n: xs.len(),
        mean: s.variance,
        variance: f64::NAN,
        std_err: ((m4 - s.variance * s.variance) / n).max(0.0).sqrt(),
    }
}

impl VarianceReport {
    /// Adds Monte Carlo estimates of both totals from `reps` replicates.
    pub fn with_empirical(
        mut self,
        cx: &Ctx,
        target: &dyn Target,
        s: &Strategy,
        reps: usize,
        seed: u64,
    ) -> Result<Self> {
        let (pi, log_z) = target_dist(cx, target)?;
        let a = replicate(reps, seed, |ch| {
            importance(cx, target, s, ch).map(|w| (w.log_weight - log_z).exp())
        })?;
        let b = replicate(reps, seed ^ 0x5eed, |ch| {
            let x = draw(&pi, ch)?;
            hme(cx, target, &x, s, ch).map(|lw| (lw + log_z).exp())
        })?;
        self.zhat.empirical = Some(variance_with_se(&a));
        self.zcheck.empirical = Some(variance_with_se(&b));
        Ok(self)
    }
}

impl BiasReport {
    /// Adds Monte Carlo estimates of both totals from `reps` replicates.
    pub fn with_empirical(
        mut self,
        cx: &Ctx,
        target: &dyn Target,
        s: &Strategy,
        reps: usize,
        seed: u64,
    ) -> Result<Self> {
        let (pi, log_z) = target_dist(cx, target)?;
        let a = replicate(reps, seed, |ch| {
            importance(cx, target, s, ch).map(|w| w.log_weight - log_z)
        })?;
        let b = replicate(reps, seed ^ 0x5eed, |ch| {
            let x = draw(&pi, ch)?;
            hme(cx, target, &x, s, ch).map(|lw| -lw - log_z)
        })?;
        self.lower.empirical = Some(EmpiricalStats::from_samples(&a));
        self.upper.empirical = Some(EmpiricalStats::from_samples(&b));
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::models::DiscreteTarget;
    use crate::params::ParamStore;
    use crate::strategies::{sir, DiscreteProposal};

    fn atoms() -> Vec<Value> {
        vec![Value::Int(0), Value::Int(1)]
    }

    #[test]
    fn terminal_chi_square_base_cases() {
        let params = ParamStore::new();
        let cx = Ctx::new(&params);
        let t = DiscreteTarget::from_weights(&[0.75, 0.25]).unwrap();
        let s = Strategy::terminal(DiscreteProposal::uniform(atoms()));
        let r = variance_recursion(&cx, &t, &s).unwrap();
        assert!((r.zhat.total - 0.25).abs() < 1e-14);
        assert!((r.zcheck.total - 1.0 / 3.0).abs() < 1e-14);
        assert!(r.zhat.rel_error() < 1e-10);
        assert!(r.zcheck.rel_error() < 1e-10);
    }

    #[test]
    fn sir_recursion_matches_law() {
        let params = ParamStore::new();
        let cx = Ctx::new(&params);
        let t = DiscreteTarget::from_weights(&[2.0, 6.0, 1.0]).unwrap();
        let atoms3 = vec![Value::Int(0), Value::Int(1), Value::Int(2)];
        let q: Arc<dyn crate::strategy::Proposal> = Arc::new(DiscreteProposal::uniform(atoms3));
        let s = sir(Arc::new(t.clone()), q, 2).unwrap();
        let v = variance_recursion(&cx, &t, &s).unwrap();
        assert!(v.zhat.rel_error() < 1e-8, "{v:?}");
        assert!(v.zcheck.rel_error() < 1e-8, "{v:?}");
        let b = bias_recursion(&cx, &t, &s).unwrap();
        assert!(b.lower.rel_error() < 1e-8, "{b:?}");
        assert!(b.upper.rel_error() < 1e-8, "{b:?}");
    }
}
