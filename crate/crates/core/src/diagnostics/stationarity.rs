//! Invariance checks for Markov kernels and estimated-density MH chains.

use crate::choice::{enumerate, Choices, DEFAULT_PATH_LIMIT};
use std::collections::BTreeMap;

use crate::error::{RaviError, Result};
use crate::mh::{MhState, RaviMh};
use crate::models::DiscreteTarget;
use crate::strategies::Kernel;
use crate::target::Ctx;
use crate::value::Value;

/// Total variation between `π` and `πK` on a finite target.
pub fn kernel_stationarity_check(
    cx: &Ctx,
    kernel: &dyn Kernel,
    target: &DiscreteTarget,
) -> Result<f64> {
    let atoms = target.atoms();
    let pi = target.probs();
    let mut tv = 0.0;
    for (j, y) in atoms.iter().enumerate() {
        let mut pushed = 0.0;
        for (i, x) in atoms.iter().enumerate() {
            if pi[i] > 0.0 {
                pushed += pi[i] * kernel.log_density(cx, x, y)?.exp();
            }
        }
        tv += (pushed - pi[j]).abs();
    }
    Ok(0.5 * tv)
}

/// Total variation between a normalized 1-D density and its push through
/// `kernel`, by midpoint quadrature with `n` cells on `[lo, hi]`.
pub fn kernel_stationarity_check_1d(
    cx: &Ctx,
    kernel: &dyn Kernel,
    log_pdf: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<f64> {
    let dx = (hi - lo) / n as f64;
    let grid: Vec<f64> = (0..n).map(|i| lo + (i as f64 + 0.5) * dx).collect();
    let pi: Vec<f64> = grid.iter().map(|&x| log_pdf(x).exp()).collect();
    let mut tv = 0.0;
    for (j, &y) in grid.iter().enumerate() {
        let mut pushed = 0.0;
        for (i, &x) in grid.iter().enumerate() {
            if pi[i] > 0.0 {
                pushed += pi[i]
                    * kernel
                        .log_density(cx, &Value::Real(x), &Value::Real(y))?
                        .exp()
                    * dx;
            }
        }
        tv += (pushed - pi[j]).abs() * dx;
    }
    Ok(0.5 * tv)
}

type StateKey = (Value, u64);

fn key(s: &MhState) -> StateKey {
    (s.x.clone(), s.log_z.to_bits())
}

fn add(v: &mut Vec<(StateKey, f64)>, k: StateKey, p: f64) {
    match v.iter_mut().find(|(u, _)| *u == k) {
        Some((_, q)) => *q += p,
        None => v.push((k, p)),
    }
}

/// `‖ψP − ψ‖₁` for a chain on `(x, log Ẑ)` whose invariant law should be
/// `ψ(x, Ẑ) ∝ P(Ẑ | x) · Ẑ`, with `Ẑ` drawn by `init`. All randomness in
/// `init` and `step` must be finite.
pub fn chain_stationarity_residual<I, S>(atoms: &[Value], init: I, step: S) -> Result<f64>
where
    I: Fn(&Value, &mut dyn Choices) -> Result<f64>,
    S: Fn(&MhState, &mut dyn Choices) -> Result<MhState>,
{
    let mut psi: Vec<(StateKey, f64)> = Vec::new();
    let mut states: Vec<MhState> = Vec::new();
    for x in atoms {
        for (log_z, p) in enumerate(|ch| init(x, ch), DEFAULT_PATH_LIMIT)? {
            let s = MhState {
                x: x.clone(),
                log_z,
            };
            if !psi.iter().any(|(k, _)| *k == key(&s)) {
                states.push(s.clone());
            }
            add(&mut psi, key(&s), p * log_z.exp());
        }
    }
    let total: f64 = psi.iter().map(|(_, p)| p).sum();
    psi.iter_mut().for_each(|(_, p)| *p /= total);

    let mut pushed: Vec<(StateKey, f64)> = Vec::new();
    for s in &states {
        let w = psi
            .iter()
            .find(|(k, _)| *k == key(s))
            .map_or(0.0, |(_, p)| *p);
        if w == 0.0 {
            continue;
        }
        for (next, p) in enumerate(|ch| step(s, ch), DEFAULT_PATH_LIMIT)? {
            add(&mut pushed, key(&next), w * p);
        }
    }
    let mut residual = 0.0;
    for (k, p) in &psi {
        let q = pushed.iter().find(|(u, _)| u == k).map_or(0.0, |(_, q)| *q);
        residual += (q - p).abs();
    }
    for (k, q) in &pushed {
        if !psi.iter().any(|(u, _)| u == k) {
            residual += q.abs();
        }
    }
    Ok(residual)
}

/// Exact one-step invariance residual of an estimated-density MH chain.
///
/// Equal to [`chain_stationarity_residual`] on the chain's own step, but
/// enumerates the proposal and the target estimate separately, since the
/// fresh estimate does not depend on the current one.
pub fn mh_stationarity_check(cx: &Ctx, mh: &RaviMh, atoms: &[Value]) -> Result<f64> {
    let pos = |x: &Value| {
        atoms.iter().position(|a| a == x).ok_or_else(|| {
            RaviError::InvalidArgument(format!("{x} is not among the chain's atoms"))
        })
    };
    let mut laws: Vec<Vec<(f64, f64)>> = Vec::with_capacity(atoms.len());
    for x in atoms {
        let mut law: Vec<(u64, f64)> = Vec::new();
        for (lz, p) in enumerate(|ch| mh.estimate(cx, x, ch), DEFAULT_PATH_LIMIT)? {
            match law.iter_mut().find(|(b, _)| *b == lz.to_bits()) {
                Some((_, q)) => *q += p,
                None => law.push((lz.to_bits(), p)),
            }
        }
        laws.push(
            law.into_iter()
                .map(|(b, p)| (f64::from_bits(b), p))
                .collect(),
        );
    }
    let mut moves: Vec<Vec<(usize, f64, f64)>> = Vec::with_capacity(atoms.len());
    for x in atoms {
        let mut out = Vec::new();
        for ((y, ratio), p) in enumerate(|ch| mh.propose_move(cx, x, ch), DEFAULT_PATH_LIMIT)? {
            out.push((pos(&y)?, ratio, p));
        }
        moves.push(out);
    }

    let mut psi: BTreeMap<(usize, u64), f64> = BTreeMap::new();
    for (i, law) in laws.iter().enumerate() {
        for &(lz, p) in law {
            *psi.entry((i, lz.to_bits())).or_default() += p * lz.exp();
        }
    }
    let total: f64 = psi.values().sum();
    psi.values_mut().for_each(|p| *p /= total);

    let mut pushed: BTreeMap<(usize, u64), f64> = BTreeMap::new();
    for (&(i, bits), &w) in &psi {
        if w == 0.0 {
            continue;
        }
        let lz = f64::from_bits(bits);
        let mut stay = 0.0;
        for &(j, ratio, pm) in &moves[i] {
            for &(lz_new, pz) in &laws[j] {
                let log_alpha = lz_new - lz + ratio;
                if log_alpha.is_nan() {
                    return Err(RaviError::SupportViolation(
                        "undefined acceptance ratio".into(),
                    ));
                }
                let a = log_alpha.min(0.0).exp();
                *pushed.entry((j, lz_new.to_bits())).or_default() += w * pm * pz * a;
                stay += pm * pz * (1.0 - a);
            }
        }
        *pushed.entry((i, bits)).or_default() += w * stay;
    }
    let mut residual: f64 = psi
        .iter()
        .map(|(k, p)| (pushed.get(k).copied().unwrap_or(0.0) - p).abs())
        .sum();
    residual += pushed
        .iter()
        .filter(|(k, _)| !psi.contains_key(k))
        .map(|(_, q)| q.abs())
        .sum::<f64>();
    Ok(residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamStore;
    use crate::strategies::{gibbs_kernel, IdentityKernel};

    #[test]
    fn exact_kernels_are_stationary() {
        let params = ParamStore::new();
        let cx = Ctx::new(&params);
        let t = DiscreteTarget::from_weights(&[1.0, 3.0]).unwrap();
        assert!(kernel_stationarity_check(&cx, &IdentityKernel, &t).unwrap() < 1e-15);
        let g = gibbs_kernel(&cx, &t).unwrap();
        assert!(kernel_stationarity_check(&cx, &g, &t).unwrap() < 1e-15);
    }

    #[test]
    fn factored_mh_residual_matches_full_enumeration() {
        let params = ParamStore::new();
        let cx = Ctx::new(&params);
        let mh = crate::diagnostics::zoo::mh_example();
        let atoms = crate::diagnostics::zoo::mh_atoms();
        let fast = mh_stationarity_check(&cx, &mh, &atoms).unwrap();
        let full = chain_stationarity_residual(
            &atoms,
            |x, ch| mh.estimate(&cx, x, ch),
            |s, ch| mh.step(&cx, s, ch).map(|(next, _)| next),
        )
        .unwrap();
        assert!(fast < 1e-12, "{fast}");
        assert!(full < 1e-12, "{full}");
    }
}
