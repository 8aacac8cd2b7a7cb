//! The diagnostic suite run over the strategy zoo.

use std::sync::Arc;

use crate::choice::Choices;
use crate::error::{RaviError, Result};
use crate::importance::{hme, importance};
use crate::math::logsumexp;
use crate::mh::{JointTarget, ProposalKernel, RaviMh};
use crate::strategies::DiscreteProposal;
use crate::strategy::Strategy;
use crate::target::{Ctx, Target};
use crate::value::Value;

use super::law::enumerate_law;
use super::recursion::{bias_recursion, variance_recursion};
use super::stationarity::mh_stationarity_check;
use super::zoo::ZooEntry;

/// Tolerance of the unbiasedness check.
pub const UNBIASED_TOL: f64 = 1e-10;
/// Tolerance of the recursion and stationarity checks.
pub const RECURSION_TOL: f64 = 1e-8;

/// Exact means of both estimators against their targets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unbiasedness {
    pub z: f64,
    pub mean_zhat: f64,
    /// `E[w]` for `x ~ π`; its target is `1/Z`.
    pub mean_hme: f64,
}

impl Unbiasedness {
    pub fn rel_error_zhat(&self) -> f64 {
        (self.mean_zhat - self.z).abs() / self.z
    }

    pub fn rel_error_hme(&self) -> f64 {
        (self.mean_hme * self.z - 1.0).abs()
    }
}

/// Enumerates both estimators on a target that lists its atoms.
pub fn unbiasedness(cx: &Ctx, target: &dyn Target, s: &Strategy) -> Result<Unbiasedness> {
    let atoms = target
        .atoms()
        .ok_or(RaviError::NotEnumerable("target does not list its atoms"))?;
    let lw: Vec<f64> = atoms
        .iter()
        .map(|a| target.log_density(cx, a))
        .collect::<Result<_>>()?;
    let log_z = logsumexp(&lw);
    let imp =
        enumerate_law(|ch| importance(cx, target, s, ch).map(|w| (w.log_weight - log_z).exp()))?;
    let mut mean_hme = 0.0;
    for (x, l) in atoms.iter().zip(&lw) {
        let p = (l - log_z).exp();
        if p > 0.0 {
            let law = enumerate_law(|ch| hme(cx, target, x, s, ch).map(|w| (w + log_z).exp()))?;
            mean_hme += p * law.mean();
        }
    }
    Ok(Unbiasedness {
        z: log_z.exp(),
        mean_zhat: imp.mean() * log_z.exp(),
        mean_hme: mean_hme / log_z.exp(),
    })
}

/// `π̃(r, x) = w_x · π̃(r)` over three outer atoms.
struct Lifted {
    inner: Arc<dyn Target>,
}

/// Outer weights of the lifted MH target.
pub const LIFT_WEIGHTS: [f64; 3] = [1.0, 2.5, 0.5];

impl JointTarget for Lifted {
    fn log_density(&self, cx: &Ctx, r: &Value, x: &Value) -> Result<f64> {
        Ok(LIFT_WEIGHTS[x.as_index()].ln() + self.inner.log_density(cx, r)?)
    }
}

/// `s ∈ {0, 1}` uniform, `x' = (x + 1 + s) mod 3`.
struct Rotate;

impl ProposalKernel for Rotate {
    fn sample(&self, _cx: &Ctx, x: &Value, ch: &mut dyn Choices) -> Result<(Value, Value)> {
        let s = ch.uniform_index(2)?;
        Ok((Value::index(s), Value::index((x.as_index() + 1 + s) % 3)))
    }

    fn log_density(&self, _cx: &Ctx, x: &Value, s: &Value, x_new: &Value) -> Result<f64> {
        let ok = s.as_index() < 2 && (x.as_index() + 1 + s.as_index()) % 3 == x_new.as_index();
        Ok(if ok { -(2f64).ln() } else { f64::NEG_INFINITY })
    }
}

/// MH on three outer atoms whose marginal densities are estimated by the
/// entry's strategy on its own target.
pub fn lifted_mh(entry: &ZooEntry) -> RaviMh {
    let s = entry.strategy.clone();
    RaviMh::new(
        Arc::new(Lifted {
            inner: entry.target.clone(),
        }),
        Arc::new(Rotate),
        move |_cx: &Ctx, _x: &Value| Ok(s.clone()),
        |_cx: &Ctx, x: &Value, y: &Value| {
            let s = (y.as_index() + 5 - x.as_index()) % 3;
            Ok(Strategy::terminal(DiscreteProposal::uniform(vec![
                Value::index(s),
            ])))
        },
    )
}

/// Names of the checks, in row order.
pub const CHECKS: [&str; 4] = [
    "unbiasedness",
    "variance_recursion",
    "bias_recursion",
    "mh_stationarity",
];

/// One outcome of the suite.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub strategy: String,
    pub check: &'static str,
    /// Worst relative error (or residual) over the quantities checked.
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Failure message when the check could not be evaluated.
    pub note: String,
}

fn worst(values: &[f64]) -> f64 {
    values
        .iter()
        .fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(*v) })
}

fn run_check(cx: &Ctx, e: &ZooEntry, check: &'static str) -> Result<(f64, f64)> {
    let t = e.target.as_ref();
    match check {
        "unbiasedness" => {
            let u = unbiasedness(cx, t, &e.strategy)?;
            Ok((
                worst(&[u.rel_error_zhat(), u.rel_error_hme()]),
                UNBIASED_TOL,
            ))
        }
        "variance_recursion" => {
            let v = variance_recursion(cx, t, &e.strategy)?;
            Ok((
                worst(&[v.zhat.rel_error(), v.zcheck.rel_error()]),
                RECURSION_TOL,
            ))
        }
        "bias_recursion" => {
            let b = bias_recursion(cx, t, &e.strategy)?;
            let abs = |r: &super::recursion::RecursionReport| {
                (r.total - r.enumerated).abs() / r.enumerated.abs().max(1.0)
            };
            Ok((worst(&[abs(&b.lower), abs(&b.upper)]), RECURSION_TOL))
        }
        "mh_stationarity" => {
            let atoms: Vec<Value> = (0..3).map(Value::index).collect();
            Ok((
                mh_stationarity_check(cx, &lifted_mh(e), &atoms)?,
                RECURSION_TOL,
            ))
        }
        _ => Err(RaviError::InvalidArgument(format!("unknown check {check}"))),
    }
}

/// Every check on one entry.
pub fn check_entry(cx: &Ctx, e: &ZooEntry) -> Vec<CheckRow> {
    CHECKS
        .iter()
        .map(|&check| match run_check(cx, e, check) {
            Ok((error, tolerance)) => CheckRow {
                strategy: e.name.clone(),
                check,
                error,
                tolerance,
                passed: error <= tolerance,
                note: String::new(),
            },
            Err(err) => CheckRow {
                strategy: e.name.clone(),
                check,
                error: f64::NAN,
                tolerance: f64::NAN,
                passed: false,
                note: err.to_string(),
            },
        })
        .collect()
}
