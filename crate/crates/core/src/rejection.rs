//! Exact sampling by rejection on recursive importance weights.

use crate::choice::Choices;
use crate::error::{RaviError, Result};
use crate::importance::importance;
use crate::strategy::Strategy;
use crate::target::{Ctx, Target};
use crate::value::Value;

/// Slack allowed above the bound for floating-point rounding of `log Ẑ`.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct RejectionOutcome {
    pub x: Value,
    /// Number of proposals drawn, including the accepted one.
    pub tries: usize,
}

/// Draws `(x, Ẑ)` from `importance` and accepts with probability `Ẑ / M`
/// until acceptance. Accepted samples are exactly distributed as `π`
/// whenever `log Ẑ ≤ log_bound` almost surely.
pub fn rejection_sample(
    cx: &Ctx,
    target: &dyn Target,
    s: &Strategy,
    log_bound: f64,
    max_tries: usize,
    ch: &mut dyn Choices,
) -> Result<RejectionOutcome> {
    for tries in 1..=max_tries {
        let ws = importance(cx, target, s, ch)?;
        let excess = ws.log_weight - log_bound;
        if excess > BOUND_SLACK * log_bound.abs().max(1.0) {
            return Err(RaviError::BoundExceeded {
                log_weight: ws.log_weight,
                log_bound,
            });
        }
        if ch.bernoulli(excess.min(0.0).exp())? {
            return Ok(RejectionOutcome { x: ws.x, tries });
        }
    }
    Err(RaviError::TooManyRejections(max_tries))
}

/// Composite bound from per-layer bounds on normalized weights: `log Z`
/// plus the log bounds of each level's density ratio.
pub fn composite_log_bound(log_z_bound: f64, layer_log_bounds: &[f64]) -> f64 {
    log_z_bound + layer_log_bounds.iter().sum::<f64>()
}
