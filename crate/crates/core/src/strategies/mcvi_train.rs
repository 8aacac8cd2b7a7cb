//! Trainable MCVI families on one-dimensional targets: Langevin forward
//! chain, Gaussian initial proposal, affine-Gaussian reverse kernels and
//! Gaussian weighting distributions, fit by constant-step stochastic
//! gradient ascent.

use std::sync::Arc;

use rayon::prelude::*;

use crate::choice::{Choices, RngChoices};
use crate::dual::Dual;
use crate::error::{RaviError, Result};
use crate::importance::importance;
use crate::models::{langevin_kernel, GaussianMixtureTarget};
use crate::params::{ParamRef, ParamStore};
use crate::reparam::{elbo_reparam, Args, ReparamJoint, ReparamProposal, ReparamStrategy};
use crate::strategy::{Proposal, Strategy};
use crate::target::Ctx;

use super::gaussian::{param_dual, Gaussian1d};
use super::kernel::{AffineGaussian, Kernel};
use super::mcvi::{mcvi, rmcvi, McviConfig};

/// Initial parameter values.
#[derive(Clone, Copy, Debug)]
pub struct McviInit {
    pub q0_mean: f64,
    pub q0_std: f64,
    /// Reverse kernels start at `N(a·x + b, s²)`.
    pub reverse_a: f64,
    pub reverse_b: f64,
    pub reverse_std: f64,
}

impl Default for McviInit {
    fn default() -> Self {
        Self {
            q0_mean: 0.0,
            q0_std: 1.0,
            reverse_a: 1.0,
            reverse_b: 0.0,
            reverse_std: 0.5,
        }
    }
}

/// A chain of length `m` with its parameters registered in a store.
#[derive(Clone)]
pub struct McviFamily {
    pub target: Arc<GaussianMixtureTarget>,
    pub step: f64,
    pub m: usize,
    pub q0: Gaussian1d,
    pub reverse: Vec<AffineGaussian>,
    /// `weighting[i]` for `i = 0..=m`; entry 0 is unused by `rmcvi`.
    pub weighting: Vec<Gaussian1d>,
}

impl McviFamily {
    pub fn new(
        store: &mut ParamStore,
        target: Arc<GaussianMixtureTarget>,
        step: f64,
        m: usize,
        init: &McviInit,
    ) -> Result<Self> {
        if !(step > 0.0) || !(init.q0_std > 0.0) || !(init.reverse_std > 0.0) {
            return Err(RaviError::InvalidArgument(
                "step and scales must be positive".into(),
            ));
        }
        let q0 = Gaussian1d {
            mean: store.add("q0.mean", init.q0_mean)?,
            log_std: store.add("q0.log_std", init.q0_std.ln())?,
        };
        let reverse = (0..m)
            .map(|i| {
                Ok(AffineGaussian {
                    a: store.add(&format!("r{i}.a"), init.reverse_a)?,
                    b: store.add(&format!("r{i}.b"), init.reverse_b)?,
                    c: store.add(&format!("r{i}.c"), init.reverse_std.ln())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let weighting = (0..=m)
            .map(|i| {
                if i == 0 {
                    return Ok(q0);
                }
                Ok(Gaussian1d {
                    mean: store.add(&format!("q{i}.mean"), init.q0_mean)?,
                    log_std: store.add(&format!("q{i}.log_std"), init.q0_std.ln())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            target,
            step,
            m,
            q0,
            reverse,
            weighting,
        })
    }

    fn config(&self, k: usize) -> McviConfig {
        McviConfig {
            m: self.m,
            k,
            q0: Arc::new(self.q0),
            t: Arc::new(langevin_kernel(self.target.clone(), self.step)),
            r: self
                .reverse
                .iter()
                .map(|r| Arc::new(*r) as Arc<dyn Kernel>)
                .collect(),
            q: self
                .weighting
                .iter()
                .map(|q| Arc::new(*q) as Arc<dyn Proposal>)
                .collect(),
        }
    }

    /// Vanilla MCVI strategy at the store's current values.
    pub fn mcvi(&self) -> Result<Strategy> {
        mcvi(self.config(1))
    }

    /// MCVI with a `k`-particle backward SMC meta-strategy.
    pub fn rmcvi(&self, k: usize) -> Result<Strategy> {
        rmcvi(self.config(k))
    }

    /// Pathwise-differentiable form of the vanilla strategy.
    pub fn reparam(&self) -> ReparamStrategy {
        if self.m == 0 {
            ReparamStrategy::Terminal(Arc::new(self.q0))
        } else {
            ReparamStrategy::Compound(Arc::new(ChainReparam(Arc::new(self.clone()))))
        }
    }

    /// `x_0..=x_m` of one forward rollout.
    pub fn rollout(&self, cx: &Ctx, ch: &mut dyn Choices) -> Result<Vec<f64>> {
        let t = langevin_kernel(self.target.clone(), self.step);
        let mut xs = Vec::with_capacity(self.m + 1);
        let mut x = self.q0.sample(cx, ch)?;
        xs.push(x.as_real());
        for _ in 0..self.m {
            x = t.sample(cx, &x, ch)?;
            xs.push(x.as_real());
        }
        Ok(xs)
    }
}

/// `r = x_{0..m}`, `x = x_m` through Langevin steps of shared noise.
struct ChainReparam(Arc<McviFamily>);

impl ChainReparam {
    fn drift(&self, x: &Dual) -> Dual {
        let f = &self.0;
        x + &f.target.grad_x_dual(x).scale(f.step)
    }
}

impl ReparamJoint for ChainReparam {
    fn noise(&self, _args: &Args, ch: &mut dyn Choices) -> Result<Vec<f64>> {
        (0..=self.0.m).map(|_| ch.std_normal()).collect()
    }

    fn push(&self, args: &Args, eps: &[f64]) -> Result<(Vec<Dual>, Vec<Dual>)> {
        let f = &self.0;
        let sd = (2.0 * f.step).sqrt();
        let mut x = ReparamProposal::push(&f.q0, args, &eps[..1])?.remove(0);
        let mut r = Vec::with_capacity(f.m);
        for e in &eps[1..] {
            let next = self.drift(&x).add_const(sd * e);
            r.push(std::mem::replace(&mut x, next));
        }
        Ok((r, vec![x]))
    }

    fn log_joint_density(&self, args: &Args, r: &[Dual], x: &[Dual]) -> Result<Dual> {
        let f = &self.0;
        if r.len() != f.m || x.len() != 1 {
            return Err(RaviError::InvalidArgument(
                "chain history has the wrong length".into(),
            ));
        }
        let log_sd = args.constant((2.0 * f.step).sqrt().ln());
        let mut total = ReparamProposal::log_density(&f.q0, args, &r[..1])?;
        for i in 0..f.m {
            let next = r.get(i + 1).unwrap_or(&x[0]);
            total = &total + &next.log_normal_pdf(&self.drift(&r[i]), &log_sd);
        }
        Ok(total)
    }

    fn meta(&self) -> ReparamStrategy {
        ReparamStrategy::Terminal(Arc::new(ReverseReparam(self.0.clone())))
    }
}

/// `Π R_i(x_i | x_{i+1})` with `x_m` taken from the conditioning values.
struct ReverseReparam(Arc<McviFamily>);

fn endpoint(args: &Args) -> Result<&Dual> {
    args.cond
        .first()
        .ok_or_else(|| RaviError::InvalidArgument("reverse kernels need the chain endpoint".into()))
}

impl ReparamProposal for ReverseReparam {
    fn noise(&self, _args: &Args, ch: &mut dyn Choices) -> Result<Vec<f64>> {
        (0..self.0.m).map(|_| ch.std_normal()).collect()
    }

    /// Runs the reverse kernels down from `x_m`.
    fn push(&self, args: &Args, eps: &[f64]) -> Result<Vec<Dual>> {
        let f = &self.0;
        let mut next = endpoint(args)?.clone();
        let mut r = vec![args.constant(0.0); f.m];
        for i in (0..f.m).rev() {
            let k = &f.reverse[i];
            let mean = &(&param_dual(&k.a, args) * &next) + &param_dual(&k.b, args);
            r[i] = &mean + &param_dual(&k.c, args).exp().scale(eps[i]);
            next = r[i].clone();
        }
        Ok(r)
    }

    fn log_density(&self, args: &Args, r: &[Dual]) -> Result<Dual> {
        let f = &self.0;
        let x = endpoint(args)?;
        let mut total = args.constant(0.0);
        for (i, k) in f.reverse.iter().enumerate() {
            let next = r.get(i + 1).unwrap_or(x);
            let mean = &(&param_dual(&k.a, args) * next) + &param_dual(&k.b, args);
            total = &total + &r[i].log_normal_pdf(&mean, &param_dual(&k.c, args));
        }
        Ok(total)
    }
}

/// Stochastic gradient settings.
#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    pub iters: usize,
    pub batch: usize,
    pub lr: f64,
    /// Fit the weighting distributions to forward rollouts during training;
    /// otherwise they are fit once before training and frozen.
    pub joint_weighting: bool,
    pub seed: u64,
}

fn stream(seed: u64, it: usize, b: usize, batch: usize) -> RngChoices {
    RngChoices::stream(seed, (it * batch + b) as u64)
}

/// Moment-matches the weighting distributions to `n` forward rollouts.
pub fn fit_weighting(
    family: &McviFamily,
    store: &mut ParamStore,
    n: usize,
    seed: u64,
) -> Result<()> {
    let rolls = (0..n)
        .into_par_iter()
        .map(|b| family.rollout(&Ctx::new(store), &mut RngChoices::stream(seed, b as u64)))
        .collect::<Result<Vec<_>>>()?;
    for i in 1..=family.m {
        let mean = rolls.iter().map(|r| r[i]).sum::<f64>() / n as f64;
        let var = rolls.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / n as f64;
        set(store, &family.weighting[i].mean, mean);
        set(
            store,
            &family.weighting[i].log_std,
            0.5 * var.max(1e-12).ln(),
        );
    }
    Ok(())
}

fn set(store: &mut ParamStore, p: &ParamRef, v: f64) {
    if let Some(i) = p.index() {
        store.set(i, v);
    }
}

/// Trains `q0` and the reverse kernels by pathwise ELBO ascent; returns the
/// batch-mean ELBO per iteration.
pub fn train_mcvi(
    family: &McviFamily,
    store: &mut ParamStore,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    if cfg.batch == 0 || !(cfg.lr > 0.0) {
        return Err(RaviError::InvalidArgument(
            "training needs a positive batch and step".into(),
        ));
    }
    let strategy = family.reparam();
    if !cfg.joint_weighting {
        fit_weighting(family, store, 4096, cfg.seed ^ 0x9e37)?;
    }
    let mut trace = Vec::with_capacity(cfg.iters);
    for it in 0..cfg.iters {
        let theta = store.values().to_vec();
        let draws = (0..cfg.batch)
            .into_par_iter()
            .map(|b| {
                let mut ch = stream(cfg.seed, it, b, cfg.batch);
                let (l, g) = elbo_reparam(family.target.as_ref(), &strategy, &theta, &mut ch)?;
                let roll = family.rollout(&Ctx::new(store), &mut ch)?;
                Ok((l, g, roll))
            })
            .collect::<Result<Vec<_>>>()?;
        let scale = 1.0 / cfg.batch as f64;
        let mut next = theta.clone();
        for (l, g, _) in &draws {
            if !l.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(RaviError::InvalidArgument(format!(
                    "non-finite ELBO gradient at iteration {it}"
                )));
            }
            for (n, gi) in next.iter_mut().zip(g) {
                *n += cfg.lr * scale * gi;
            }
        }
        if cfg.joint_weighting {
            for (i, q) in family.weighting.iter().enumerate().skip(1) {
                let (m, s) = (q.mean.get(store), q.log_std.get(store));
                let var = (2.0 * s).exp();
                let (mut gm, mut gs) = (0.0, 0.0);
                for (_, _, roll) in &draws {
                    let d = roll[i] - m;
                    gm += d / var;
                    gs += d * d / var - 1.0;
                }
                if let Some(j) = q.mean.index() {
                    next[j] += cfg.lr * scale * gm * var;
                }
                if let Some(j) = q.log_std.index() {
                    next[j] += cfg.lr * scale * gs;
                }
            }
        }
        store.set_values(&next);
        trace.push(draws.iter().map(|d| d.0).sum::<f64>() * scale);
    }
    Ok(trace)
}

/// `log Ẑ` replicates of `s` on `target`, in replicate order.
pub fn log_weights(
    store: &ParamStore,
    target: &GaussianMixtureTarget,
    s: &Strategy,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..reps)
        .into_par_iter()
        .map(|b| {
            let cx = Ctx::new(store);
            importance(&cx, target, s, &mut RngChoices::stream(seed, b as u64))
                .map(|w| w.log_weight)
        })
        .collect()
}

/// One row of the MCVI comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct McviRow {
    pub algorithm: String,
    pub m: usize,
    pub k: usize,
    pub mean_elbo: f64,
    pub stderr: f64,
    /// `log Z − mean_elbo`.
    pub gap: f64,
    pub mcmc_steps: usize,
}

/// Settings of the MCVI comparison.
#[derive(Clone, Debug)]
pub struct McviExperiment {
    pub target: Arc<GaussianMixtureTarget>,
    pub step: f64,
    pub m_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub init: McviInit,
    pub train: TrainConfig,
    pub eval_reps: usize,
    /// Random-walk scale of the annealing baseline; no baseline rows when zero.
    pub ais_scale: f64,
    pub log_z: f64,
}

fn row(algorithm: &str, m: usize, k: usize, lw: &[f64], log_z: f64, mcmc_steps: usize) -> McviRow {
    let s = crate::diagnostics::EmpiricalStats::from_samples(lw);
    McviRow {
        algorithm: algorithm.to_string(),
        m,
        k,
        mean_elbo: s.mean,
        stderr: s.std_err,
        gap: log_z - s.mean,
        mcmc_steps,
    }
}

/// Geometric ladder from `N(0, 1)` to the target with `m` random-walk moves.
fn ais_strategy(target: &Arc<GaussianMixtureTarget>, m: usize, scale: f64) -> Result<Strategy> {
    use crate::target::{FnTarget, Target};
    use crate::value::Value;

    let init = Gaussian1d::fixed(0.0, 1.0);
    let targets: Vec<Arc<dyn Target>> = (0..=m)
        .map(|t| {
            let beta = if m == 0 { 1.0 } else { t as f64 / m as f64 };
            let tg = target.clone();
            Arc::new(FnTarget::new(move |_cx: &Ctx, x: &Value| {
                let v = x.as_real();
                Ok((1.0 - beta) * crate::math::log_normal_pdf(v, 0.0, 1.0)
                    + beta * tg.log_density_at(v))
            })) as Arc<dyn Target>
        })
        .collect();
    let kernels = targets[..m]
        .iter()
        .map(|t| {
            Arc::new(super::kernel::RandomWalkMetropolis {
                target: t.clone(),
                scale,
            }) as Arc<dyn Kernel>
        })
        .collect();
    super::ais::ais(targets, Strategy::from_terminal(Arc::new(init)), kernels)
}

/// Trains one family per chain length and evaluates `mcvi`, `rmcvi(K)` and
/// the annealing baseline with the same number of replicates.
pub fn mcvi_sweep(exp: &McviExperiment) -> Result<Vec<McviRow>> {
    let mut rows = Vec::new();
    for (j, &m) in exp.m_values.iter().enumerate() {
        let mut store = ParamStore::new();
        let family = McviFamily::new(&mut store, exp.target.clone(), exp.step, m, &exp.init)?;
        let train = TrainConfig {
            seed: exp.train.seed.wrapping_add(j as u64),
            ..exp.train
        };
        train_mcvi(&family, &mut store, &train)?;
        let seed = train.seed ^ 0xe7a1;
        let lw = log_weights(&store, &exp.target, &family.mcvi()?, exp.eval_reps, seed)?;
        rows.push(row("mcvi", m, 1, &lw, exp.log_z, m));
        for &k in &exp.k_values {
            let lw = log_weights(
                &store,
                &exp.target,
                &family.rmcvi(k)?,
                exp.eval_reps,
                seed ^ k as u64,
            )?;
            rows.push(row("rmcvi", m, k, &lw, exp.log_z, k * m));
        }
        if exp.ais_scale > 0.0 {
            let s = ais_strategy(&exp.target, m, exp.ais_scale)?;
            let lw = log_weights(&store, &exp.target, &s, exp.eval_reps, seed ^ 0xa15)?;
            rows.push(row("ais", m, 1, &lw, exp.log_z, m));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::log_mean_exp;
    use crate::reparam::eubo_reparam;

    fn family(m: usize) -> (ParamStore, McviFamily) {
        let mut store = ParamStore::new();
        let t = Arc::new(GaussianMixtureTarget::unnormalized_gaussian(0.2).unwrap());
        let f = McviFamily::new(&mut store, t, 0.015, m, &McviInit::default()).unwrap();
        (store, f)
    }

    #[test]
    fn reparam_elbo_matches_importance_weight() {
        let (store, f) = family(3);
        let s = f.mcvi().unwrap();
        let r = f.reparam();
        for seed in 0..5 {
            let (l, _) = elbo_reparam(
                f.target.as_ref(),
                &r,
                store.values(),
                &mut RngChoices::new(seed),
            )
            .unwrap();
            let w = importance(
                &Ctx::new(&store),
                f.target.as_ref(),
                &s,
                &mut RngChoices::new(seed),
            )
            .unwrap();
            assert!((l - w.log_weight).abs() < 1e-9, "{l} vs {}", w.log_weight);
        }
    }

    #[test]
    fn reparam_gradient_matches_fixed_noise_difference() {
        let (store, f) = family(2);
        let r = f.reparam();
        let theta = store.values().to_vec();
        let (_, g) = elbo_reparam(f.target.as_ref(), &r, &theta, &mut RngChoices::new(11)).unwrap();
        for i in 0..theta.len() {
            let h = 1e-6;
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[i] += h;
            dn[i] -= h;
            let fu = elbo_reparam(f.target.as_ref(), &r, &up, &mut RngChoices::new(11))
                .unwrap()
                .0;
            let fd = elbo_reparam(f.target.as_ref(), &r, &dn, &mut RngChoices::new(11))
                .unwrap()
                .0;
            let num = (fu - fd) / (2.0 * h);
            assert!(
                (num - g[i]).abs() <= 1e-4 * num.abs().max(1.0),
                "{i}: {num} vs {}",
                g[i]
            );
        }
    }

    #[test]
    fn eubo_reparam_gradient_matches_fixed_noise_difference() {
        let (store, f) = family(3);
        let r = f.reparam();
        let theta = store.values().to_vec();
        let x = [0.07];
        let eval = |t: &[f64]| {
            eubo_reparam(f.target.as_ref(), &x, &r, t, &mut RngChoices::new(5)).unwrap()
        };
        let (_, g) = eval(&theta);
        for i in 0..theta.len() {
            let h = 1e-6;
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[i] += h;
            dn[i] -= h;
            let num = (eval(&up).0 - eval(&dn).0) / (2.0 * h);
            assert!(
                (num - g[i]).abs() <= 1e-4 * num.abs().max(1.0),
                "{i}: {num} vs {}",
                g[i]
            );
        }
    }

    #[test]
    fn training_raises_the_elbo_and_stays_unbiased() {
        let (mut store, f) = family(2);
        let cfg = TrainConfig {
            iters: 200,
            batch: 16,
            lr: 0.01,
            joint_weighting: true,
            seed: 3,
        };
        let trace = train_mcvi(&f, &mut store, &cfg).unwrap();
        let head: f64 = trace[..20].iter().sum::<f64>() / 20.0;
        let tail: f64 = trace[trace.len() - 20..].iter().sum::<f64>() / 20.0;
        assert!(tail > head, "{head} -> {tail}");
        let lw = log_weights(&store, &f.target, &f.rmcvi(4).unwrap(), 20_000, 9).unwrap();
        let err = log_mean_exp(&lw) - f.target.log_z();
        assert!(err.abs() < 0.02, "{err}");
    }
}
