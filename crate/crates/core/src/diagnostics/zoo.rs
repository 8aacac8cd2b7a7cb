//! The bundled strategy zoo on small enumerable targets.

use std::sync::Arc;

use crate::choice::Choices;
use crate::error::Result;
use crate::mh::{JointTarget, KernelSlice, ModelSlice, ProposalKernel, RaviMh};
use crate::models::nig::{GaussianClusters, NigParams};
use crate::models::{DiscreteTarget, Dpmm, DpmmTarget};
use crate::strategies::{
    agglom, ais, antithetic, compound, gibbs_kernel, kernel_strategy, mcvi, metropolis_kernel,
    ravi_sir, rmcvi, sir, sir_fault_injected, smc, DiscreteProposal, Kernel, MatrixKernel,
    McviConfig, Permutation, StrategyFamily,
};
use crate::strategy::{Proposal, Strategy};
use crate::target::{Ctx, Target};
use crate::value::Value;

/// A named strategy with the target it is run against.
#[derive(Clone)]
pub struct ZooEntry {
    pub name: String,
    pub target: Arc<dyn Target>,
    pub strategy: Strategy,
}

fn atoms(n: usize) -> Vec<Value> {
    (0..n).map(Value::index).collect()
}

/// Four-atom base target with `Z = 14`.
pub fn base_target() -> DiscreteTarget {
    DiscreteTarget::from_weights(&[2.0, 6.0, 1.0, 5.0]).expect("positive weights")
}

fn crude_q() -> Arc<dyn Proposal> {
    Arc::new(DiscreteProposal::from_probs(atoms(4), &[0.4, 0.1, 0.3, 0.2]).expect("four atoms"))
}

fn uniform_q() -> Arc<dyn Proposal> {
    Arc::new(DiscreteProposal::uniform(atoms(4)))
}

/// Row-stochastic matrix with a heavy diagonal.
fn sticky(n: usize, stay: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        stay
                    } else {
                        (1.0 - stay) / (n - 1) as f64
                    }
                })
                .collect()
        })
        .collect()
}

fn matrix(rows: &[Vec<f64>]) -> Arc<dyn Kernel> {
    Arc::new(MatrixKernel::new(atoms(rows.len()), rows).expect("stochastic rows"))
}

/// Two-level strategy: `r ∈ {0, 1}`, `x | r` from one of two rows, and a
/// fixed terminal meta-strategy over `r`.
pub fn two_level() -> Strategy {
    const PR: [f64; 2] = [0.3, 0.7];
    const ROWS: [[f64; 4]; 2] = [[0.1, 0.2, 0.3, 0.4], [0.5, 0.3, 0.1, 0.1]];
    compound(
        |_cx: &Ctx, ch: &mut dyn Choices| {
            let r = ch.categorical(&PR.map(f64::ln))?;
            let x = ch.categorical(&ROWS[r].map(f64::ln))?;
            Ok((Value::index(r), Value::index(x)))
        },
        |_cx: &Ctx, r: &Value, x: &Value| {
            let (r, x) = (r.as_index(), x.as_index());
            Ok(if r < 2 && x < 4 {
                (PR[r] * ROWS[r][x]).ln()
            } else {
                f64::NEG_INFINITY
            })
        },
        |_cx: &Ctx, x: &Value| {
            let p = 0.2 + 0.15 * x.as_index() as f64;
            Ok(Strategy::terminal(DiscreteProposal::from_probs(
                atoms(2),
                &[p, 1.0 - p],
            )?))
        },
    )
}

fn smc_entry(cx: &Ctx, target: &Arc<dyn Target>, steps: usize, n: usize) -> Result<Strategy> {
    let tilted: Arc<dyn Target> = Arc::new(DiscreteTarget::from_weights(&[1.0, 2.0, 2.0, 1.0])?);
    let mut targets = vec![target.clone()];
    if steps == 2 {
        targets.insert(0, tilted);
    }
    let fwd = matrix(&sticky(4, 0.55));
    let bwd = matrix(&sticky(4, 0.4));
    let forward: Vec<StrategyFamily> = (1..steps)
        .map(|_| {
            let k = fwd.clone();
            Arc::new(move |_cx: &Ctx, x: &Value| Ok(kernel_strategy(k.clone(), x)))
                as StrategyFamily
        })
        .collect();
    let backward: Vec<StrategyFamily> = (1..steps)
        .map(|_| {
            let k = bwd.clone();
            Arc::new(move |_cx: &Ctx, x: &Value| Ok(kernel_strategy(k.clone(), x)))
                as StrategyFamily
        })
        .collect();
    let _ = cx;
    smc(
        targets,
        Strategy::from_terminal(crude_q()),
        forward,
        backward,
        n,
    )
}

fn ais_entry(cx: &Ctx, rungs: usize) -> Result<Strategy> {
    let base = base_target();
    let lw = base.log_weights().to_vec();
    let targets: Vec<Arc<dyn Target>> = (0..rungs)
        .map(|k| {
            let beta = (k + 1) as f64 / rungs as f64;
            Arc::new(
                DiscreteTarget::new(atoms(4), lw.iter().map(|l| beta * l).collect())
                    .expect("finite"),
            ) as Arc<dyn Target>
        })
        .collect();
    let mut kernels: Vec<Arc<dyn Kernel>> = Vec::new();
    for (k, t) in targets.iter().take(rungs - 1).enumerate() {
        if k % 2 == 0 {
            kernels.push(Arc::new(
                metropolis_kernel(cx, t.as_ref(), &sticky(4, 0.0))?.with_reversible(false),
            ));
        } else {
            kernels.push(Arc::new(gibbs_kernel(cx, t.as_ref())?));
        }
    }
    ais(targets, Strategy::from_terminal(uniform_q()), kernels)
}

fn mcvi_config(cx: &Ctx, m: usize, k: usize) -> Result<McviConfig> {
    let t = base_target();
    let reverse = [
        vec![0.6, 0.2, 0.1, 0.1],
        vec![0.1, 0.5, 0.2, 0.2],
        vec![0.25; 4],
        vec![0.1, 0.1, 0.3, 0.5],
    ];
    let q = (0..=m)
        .map(|i| {
            let p = if i % 2 == 0 {
                [0.1, 0.4, 0.1, 0.4]
            } else {
                [0.25; 4]
            };
            Ok(Arc::new(DiscreteProposal::from_probs(atoms(4), &p)?) as Arc<dyn Proposal>)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(McviConfig {
        m,
        k,
        q0: crude_q(),
        t: Arc::new(metropolis_kernel(cx, &t, &sticky(4, 0.0))?),
        r: (0..m).map(|_| matrix(&reverse)).collect(),
        q,
    })
}

fn dpmm3() -> Result<Dpmm> {
    Dpmm::new(
        1.0,
        Arc::new(GaussianClusters {
            data: vec![-0.4, 0.3, 1.8],
            params: NigParams::default(),
        }),
    )
}

/// Every bundled strategy on a small enumerable target. With `fault`, the
/// two-particle `sir` entry swaps one pair of resampling weights.
pub fn zoo(cx: &Ctx, fault: bool) -> Result<Vec<ZooEntry>> {
    let base: Arc<dyn Target> = Arc::new(base_target());
    let mut out = Vec::new();
    let mut push = |name: &str, target: &Arc<dyn Target>, strategy: Strategy| {
        out.push(ZooEntry {
            name: name.to_string(),
            target: target.clone(),
            strategy,
        })
    };
    push("terminal", &base, Strategy::from_terminal(crude_q()));
    push("compound", &base, two_level());
    for n in 1..=3 {
        let s = if fault && n == 2 {
            sir_fault_injected(base.clone(), crude_q(), n)?
        } else {
            sir(base.clone(), crude_q(), n)?
        };
        push(&format!("sir_n{n}"), &base, s);
    }
    push(
        "ravi_sir_n2",
        &base,
        ravi_sir(base.clone(), two_level(), 2)?,
    );
    push("smc_t1", &base, smc_entry(cx, &base, 1, 2)?);
    push("smc_t2", &base, smc_entry(cx, &base, 2, 2)?);
    for rungs in 2..=4 {
        push(&format!("ais_{rungs}"), &base, ais_entry(cx, rungs)?);
    }
    for m in 1..=2 {
        push(&format!("mcvi_m{m}"), &base, mcvi(mcvi_config(cx, m, 1)?)?);
    }
    for (m, k) in [(1, 2), (2, 2)] {
        push(
            &format!("rmcvi_m{m}_k{k}"),
            &base,
            rmcvi(mcvi_config(cx, m, k)?)?,
        );
    }
    let swap = Permutation {
        atoms: atoms(4),
        image: vec![3, 2, 1, 0],
    };
    push(
        "antithetic",
        &base,
        antithetic(base.clone(), crude_q(), Arc::new(swap)),
    );
    let model = dpmm3()?;
    let dp: Arc<dyn Target> = Arc::new(DpmmTarget(model.clone()));
    push("agglom_n3", &dp, agglom(model, 2)?);
    Ok(out)
}

/// `π̃(r, x)` from a table indexed `[x][r]`.
struct TableJoint(Vec<Vec<f64>>);

impl JointTarget for TableJoint {
    fn log_density(&self, _cx: &Ctx, r: &Value, x: &Value) -> Result<f64> {
        Ok(self.0[x.as_index()][r.as_index()].ln())
    }
}

/// `s` uniform on `0..4`, `x' = (x + 1 + s) mod 3`.
struct CyclicProposal;

impl ProposalKernel for CyclicProposal {
    fn sample(&self, _cx: &Ctx, x: &Value, ch: &mut dyn Choices) -> Result<(Value, Value)> {
        let s = ch.uniform_index(4)?;
        Ok((Value::index(s), Value::index((x.as_index() + 1 + s) % 3)))
    }

    fn log_density(&self, _cx: &Ctx, x: &Value, s: &Value, x_new: &Value) -> Result<f64> {
        let ok = s.as_index() < 4 && (x.as_index() + 1 + s.as_index()) % 3 == x_new.as_index();
        Ok(if ok { -(4f64).ln() } else { f64::NEG_INFINITY })
    }
}

/// Joint weights of the MH example, indexed `[x][r]`.
pub const MH_TABLE: [[f64; 2]; 3] = [[1.0, 2.0], [0.5, 4.0], [2.0, 0.5]];

/// Estimated-density MH on three atoms with two-valued target auxiliaries
/// and four-valued proposal auxiliaries; both meta-strategies are `sir`,
/// the proposal one restricted to the auxiliaries that reach `x'`.
pub fn mh_example() -> RaviMh {
    let model: Arc<dyn JointTarget> =
        Arc::new(TableJoint(MH_TABLE.iter().map(|r| r.to_vec()).collect()));
    let proposal: Arc<dyn ProposalKernel> = Arc::new(CyclicProposal);
    let m = model.clone();
    let p = proposal.clone();
    RaviMh::new(
        model,
        proposal,
        move |_cx: &Ctx, x: &Value| {
            let slice: Arc<dyn Target> = Arc::new(ModelSlice {
                model: m.clone(),
                x: x.clone(),
            });
            let q: Arc<dyn Proposal> =
                Arc::new(DiscreteProposal::from_probs(atoms(2), &[0.6, 0.4])?);
            sir(slice, q, 2)
        },
        move |_cx: &Ctx, x: &Value, x_new: &Value| {
            let slice: Arc<dyn Target> = Arc::new(KernelSlice {
                kernel: p.clone(),
                from: x.clone(),
                to: x_new.clone(),
            });
            let d = (x_new.as_index() + 5 - x.as_index()) % 3;
            let q: Arc<dyn Proposal> = if d == 0 {
                Arc::new(DiscreteProposal::from_probs(
                    vec![Value::index(0), Value::index(3)],
                    &[0.7, 0.3],
                )?)
            } else {
                Arc::new(DiscreteProposal::uniform(vec![Value::index(d)]))
            };
            sir(slice, q, 2)
        },
    )
}

/// Exact marginal of the MH example over its three atoms.
pub fn mh_example_posterior() -> Vec<f64> {
    let w: Vec<f64> = MH_TABLE.iter().map(|r| r.iter().sum()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}

pub fn mh_atoms() -> Vec<Value> {
    atoms(3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::checks::check_entry;
    use crate::params::ParamStore;

    #[test]
    fn zoo_passes_every_check() {
        let ps = ParamStore::new();
        let cx = Ctx::new(&ps);
        for e in zoo(&cx, false).unwrap() {
            for row in check_entry(&cx, &e) {
                assert!(row.passed, "{row:?}");
            }
        }
    }

    #[test]
    fn fault_injection_is_detected() {
        let ps = ParamStore::new();
        let cx = Ctx::new(&ps);
        let z = zoo(&cx, true).unwrap();
        let e = z.iter().find(|e| e.name == "sir_n2").unwrap();
        let rows = check_entry(&cx, e);
        assert!(rows.iter().any(|r| !r.passed), "{rows:?}");
    }
}
