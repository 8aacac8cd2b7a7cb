//! Randomized agglomerative clustering as a proposal over DPMM partitions.
//!
//! The forward sampler starts from singletons and repeatedly merges a pair
//! of clusters or stops, with probabilities proportional to the posterior
//! score of the resulting partition. Its auxiliary variable is the merge
//! sequence. The meta-strategy runs a `K`-particle SMC restricted to merges
//! consistent with the observed partition, and the meta-meta-strategy is
//! the matching conditional SMC.

use std::collections::BTreeMap;

use crate::choice::Choices;
use crate::error::{RaviError, Result};
use crate::importance::importance;
use crate::math::logsumexp;
use crate::models::crp::crp_merge_delta;
use crate::models::dpmm::{Dpmm, DpmmTarget};
use crate::models::partition::Partition;
use crate::strategies::basic::PointMass;
use crate::strategy::{JointProposal, Proposal, Strategy};
use crate::target::Ctx;
use crate::value::Value;

#[derive(Clone, Debug)]
struct Cluster {
    members: Vec<usize>,
    stats: Vec<f64>,
    log_f: f64,
}

/// Clusters ordered by least element.
#[derive(Clone, Debug)]
struct State {
    clusters: Vec<Cluster>,
}

/// A candidate merge of the clusters at positions `a < b`.
#[derive(Clone, Copy, Debug)]
struct Merge {
    a: usize,
    b: usize,
    log_w: f64,
}

impl State {
    fn singletons(model: &Dpmm) -> Self {
        let lik = &model.likelihood;
        let clusters = (0..model.n())
            .map(|i| {
                let stats = lik.stats(i);
                let log_f = lik.log_marginal_stats(&stats);
                Cluster {
                    members: vec![i],
                    stats,
                    log_f,
                }
            })
            .collect();
        Self { clusters }
    }

    /// Every pairwise merge with its log score relative to stopping.
    fn merges(&self, model: &Dpmm) -> Vec<Merge> {
        let lik = &model.likelihood;
        let mut out = Vec::new();
        for a in 0..self.clusters.len() {
            for b in a + 1..self.clusters.len() {
                let (ca, cb) = (&self.clusters[a], &self.clusters[b]);
                let joined: Vec<f64> = ca.stats.iter().zip(&cb.stats).map(|(x, y)| x + y).collect();
                let log_w = crp_merge_delta(ca.members.len(), cb.members.len(), model.alpha)
                    + lik.log_marginal_stats(&joined)
                    - ca.log_f
                    - cb.log_f;
                out.push(Merge { a, b, log_w });
            }
        }
        out
    }

    fn apply(&mut self, model: &Dpmm, m: Merge) {
        let moved = self.clusters.remove(m.b);
        let c = &mut self.clusters[m.a];
        c.members.extend(moved.members);
        c.members.sort_unstable();
        for (x, y) in c.stats.iter_mut().zip(moved.stats) {
            *x += y;
        }
        c.log_f = model.likelihood.log_marginal_stats(&c.stats);
    }

    fn move_value(&self, m: Merge) -> Value {
        Value::pair(
            Value::index(self.clusters[m.a].members[0]),
            Value::index(self.clusters[m.b].members[0]),
        )
    }

    /// Position of the merge named by `v` among `merges`.
    fn find(&self, merges: &[Merge], v: &Value) -> Option<usize> {
        let Value::List(p) = v else { return None };
        let [Value::Int(i), Value::Int(j)] = p.as_slice() else {
            return None;
        };
        let a = self
            .clusters
            .iter()
            .position(|c| c.members[0] as i64 == *i)?;
        let b = self
            .clusters
            .iter()
            .position(|c| c.members[0] as i64 == *j)?;
        merges.iter().position(|m| m.a == a && m.b == b)
    }

    fn partition(&self, n: usize) -> Result<Partition> {
        Partition::new(self.clusters.iter().map(|c| c.members.clone()).collect(), n)
    }
}

fn stop_log_prob(merges: &[Merge]) -> f64 {
    let mut all: Vec<f64> = merges.iter().map(|m| m.log_w).collect();
    all.push(0.0);
    -logsumexp(&all)
}

/// Agglomerative clustering strategy for the posterior of `model`, with
/// `k` particles in its meta-inference.
pub fn agglom(model: Dpmm, k: usize) -> Result<Strategy> {
    if k == 0 {
        return Err(RaviError::InvalidArgument(
            "agglom needs at least one particle".into(),
        ));
    }
    Ok(Strategy::compound(Agglom { model, k }))
}

struct Agglom {
    model: Dpmm,
    k: usize,
}

impl JointProposal for Agglom {
    fn sample_joint(&self, _cx: &Ctx, ch: &mut dyn Choices) -> Result<(Value, Value)> {
        let mut state = State::singletons(&self.model);
        let mut moves = Vec::new();
        loop {
            let merges = self.model_merges(&state);
            let mut lw: Vec<f64> = merges.iter().map(|m| m.log_w).collect();
            lw.push(0.0);
            let i = ch.categorical(&lw)?;
            if i == merges.len() {
                break;
            }
            moves.push(state.move_value(merges[i]));
            state.apply(&self.model, merges[i]);
        }
        Ok((
            Value::List(moves),
            state.partition(self.model.n())?.to_value(),
        ))
    }

    fn log_joint_density(&self, _cx: &Ctx, r: &Value, x: &Value) -> Result<f64> {
        let target = Partition::from_value(x, self.model.n())?;
        let Value::List(moves) = r else {
            return Ok(f64::NEG_INFINITY);
        };
        let mut state = State::singletons(&self.model);
        let mut total = 0.0;
        for mv in moves {
            let merges = self.model_merges(&state);
            let Some(i) = state.find(&merges, mv) else {
                return Ok(f64::NEG_INFINITY);
            };
            total += merges[i].log_w + stop_log_prob(&merges);
            state.apply(&self.model, merges[i]);
        }
        if state.partition(self.model.n())? != target {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(total + stop_log_prob(&self.model_merges(&state)))
    }

    fn meta(&self, _cx: &Ctx, x: &Value) -> Result<Strategy> {
        let target = Partition::from_value(x, self.model.n())?;
        let steps = self.model.n() - target.len();
        if steps == 0 {
            return Ok(Strategy::terminal(PointMass(Value::List(Vec::new()))));
        }
        Ok(Strategy::compound(MergeSmc {
            model: self.model.clone(),
            labels: target.labels(),
            steps,
            k: self.k,
        }))
    }
}

impl Agglom {
    fn model_merges(&self, state: &State) -> Vec<Merge> {
        state.merges(&self.model)
    }
}

/// SMC over merge sequences that stay finer than a fixed partition.
///
/// Auxiliary layout: `[moves[L][K], anc[L][K]]`; `anc[l][k]` is the particle
/// whose post-step-`l` state particle `k` continues from. The output is the
/// trace of particle 0 after the last resampling.
#[derive(Clone)]
struct MergeSmc {
    model: Dpmm,
    labels: Vec<usize>,
    steps: usize,
    k: usize,
}

/// Proposal options of one particle at one step.
struct Step {
    merges: Vec<Merge>,
    /// Positions in `merges` consistent with the observed partition.
    ok: Vec<usize>,
    /// `log Σ_Ok w − log Σ_All w`.
    log_w: f64,
    log_ok: f64,
}

impl MergeSmc {
    fn step(&self, state: &State) -> Step {
        let merges = state.merges(&self.model);
        let ok: Vec<usize> = (0..merges.len())
            .filter(|&i| {
                let m = merges[i];
                self.labels[state.clusters[m.a].members[0]]
                    == self.labels[state.clusters[m.b].members[0]]
            })
            .collect();
        let ok_w: Vec<f64> = ok.iter().map(|&i| merges[i].log_w).collect();
        let log_ok = logsumexp(&ok_w);
        let log_w = log_ok + stop_log_prob(&merges);
        Step {
            merges,
            ok,
            log_w,
            log_ok,
        }
    }

    fn propose(&self, st: &Step, ch: &mut dyn Choices) -> Result<usize> {
        let lw: Vec<f64> = st.ok.iter().map(|&i| st.merges[i].log_w).collect();
        Ok(st.ok[ch.categorical(&lw)?])
    }

    /// Runs the SMC, pinning particle `pins[l]` to `trace[l]` at step `l` and
    /// the ancestor of particle `pins[l + 1]` to `pins[l]`, when given.
    fn run(
        &self,
        pinned: Option<(&[usize], &[Value])>,
        ch: &mut dyn Choices,
    ) -> Result<(Value, Vec<Value>)> {
        let mut states = vec![State::singletons(&self.model); self.k];
        let mut traces: Vec<Vec<Value>> = vec![Vec::new(); self.k];
        let mut all_moves = Vec::with_capacity(self.steps);
        let mut all_anc = Vec::with_capacity(self.steps);
        for l in 0..self.steps {
            let mut moves = Vec::with_capacity(self.k);
            let mut log_w = Vec::with_capacity(self.k);
            for (j, state) in states.iter_mut().enumerate() {
                let st = self.step(state);
                let i = match pinned {
                    Some((pins, trace)) if pins[l] == j => state
                        .find(&st.merges, &trace[l])
                        .filter(|i| st.ok.contains(i))
                        .ok_or_else(|| {
                            RaviError::SupportViolation("pinned merge is not admissible".into())
                        })?,
                    _ => self.propose(&st, ch)?,
                };
                let mv = state.move_value(st.merges[i]);
                traces[j].push(mv.clone());
                moves.push(mv);
                log_w.push(st.log_w);
                state.apply(&self.model, st.merges[i]);
            }
            let mut anc = Vec::with_capacity(self.k);
            for j in 0..self.k {
                let a = match pinned {
                    Some((pins, _)) if pins[l + 1] == j => pins[l],
                    _ => ch.categorical(&log_w)?,
                };
                anc.push(a);
            }
            states = anc.iter().map(|&a| states[a].clone()).collect();
            traces = anc.iter().map(|&a| traces[a].clone()).collect();
            all_moves.push(Value::List(moves));
            all_anc.push(Value::indices(&anc));
        }
        let aux = Value::pair(Value::List(all_moves), Value::List(all_anc));
        Ok((aux, traces.swap_remove(0)))
    }

    /// Splits the auxiliary value, checking its shape.
    fn unpack<'a>(&self, aux: &'a Value) -> Option<(Vec<&'a [Value]>, Vec<Vec<usize>>)> {
        let Value::List(parts) = aux else { return None };
        let [Value::List(moves), Value::List(anc)] = parts.as_slice() else {
            return None;
        };
        if moves.len() != self.steps || anc.len() != self.steps {
            return None;
        }
        let mut mv = Vec::with_capacity(self.steps);
        let mut an = Vec::with_capacity(self.steps);
        for (m, a) in moves.iter().zip(anc) {
            let (Value::List(m), Value::List(a)) = (m, a) else {
                return None;
            };
            if m.len() != self.k || a.len() != self.k {
                return None;
            }
            let a: Option<Vec<usize>> = a
                .iter()
                .map(|v| match v {
                    Value::Int(i) if *i >= 0 && (*i as usize) < self.k => Some(*i as usize),
                    _ => None,
                })
                .collect();
            mv.push(m.as_slice());
            an.push(a?);
        }
        Some((mv, an))
    }

    /// Indices of the output particle's ancestors, `pins[l]` at step `l`, with `pins[L] = 0`.
    fn lineage(&self, anc: &[Vec<usize>]) -> Vec<usize> {
        let mut pins = vec![0; self.steps + 1];
        for l in (0..self.steps).rev() {
            pins[l] = anc[l][pins[l + 1]];
        }
        pins
    }

    /// Per-step proposal and resampling log probabilities of every particle,
    /// or `None` when some move is inadmissible.
    fn replay(
        &self,
        moves: &[&[Value]],
        anc: &[Vec<usize>],
    ) -> Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let mut states = vec![State::singletons(&self.model); self.k];
        let mut prop = Vec::with_capacity(self.steps);
        let mut res = Vec::with_capacity(self.steps);
        for l in 0..self.steps {
            let mut lp = Vec::with_capacity(self.k);
            let mut log_w = Vec::with_capacity(self.k);
            for (j, state) in states.iter_mut().enumerate() {
                let st = self.step(state);
                let i = state
                    .find(&st.merges, &moves[l][j])
                    .filter(|i| st.ok.contains(i))?;
                lp.push(st.merges[i].log_w - st.log_ok);
                log_w.push(st.log_w);
                state.apply(&self.model, st.merges[i]);
            }
            let z = logsumexp(&log_w);
            res.push(anc[l].iter().map(|&a| log_w[a] - z).collect());
            prop.push(lp);
            states = anc[l].iter().map(|&a| states[a].clone()).collect();
        }
        Some((prop, res))
    }
}

impl JointProposal for MergeSmc {
    fn sample_joint(&self, _cx: &Ctx, ch: &mut dyn Choices) -> Result<(Value, Value)> {
        let (aux, trace) = self.run(None, ch)?;
        Ok((aux, Value::List(trace)))
    }

    fn log_joint_density(&self, _cx: &Ctx, r: &Value, x: &Value) -> Result<f64> {
        let Some((moves, anc)) = self.unpack(r) else {
            return Ok(f64::NEG_INFINITY);
        };
        let pins = self.lineage(&anc);
        let trace: Vec<Value> = (0..self.steps).map(|l| moves[l][pins[l]].clone()).collect();
        if *x != Value::List(trace) {
            return Ok(f64::NEG_INFINITY);
        }
        let Some((prop, res)) = self.replay(&moves, &anc) else {
            return Ok(f64::NEG_INFINITY);
        };
        Ok(prop.iter().chain(&res).flatten().sum())
    }

    fn meta(&self, _cx: &Ctx, x: &Value) -> Result<Strategy> {
        let Value::List(trace) = x else {
            return Err(RaviError::InvalidArgument(format!(
                "{x} is not a merge sequence"
            )));
        };
        Ok(Strategy::terminal(CondMergeSmc {
            smc: self.clone(),
            trace: trace.clone(),
        }))
    }
}

/// Conditional SMC given the output trace.
struct CondMergeSmc {
    smc: MergeSmc,
    trace: Vec<Value>,
}

impl Proposal for CondMergeSmc {
    fn sample(&self, _cx: &Ctx, ch: &mut dyn Choices) -> Result<Value> {
        let s = &self.smc;
        let mut pins = vec![0; s.steps + 1];
        for p in pins.iter_mut().take(s.steps) {
            *p = ch.uniform_index(s.k)?;
        }
        let (aux, _) = s.run(Some((&pins, &self.trace)), ch)?;
        Ok(aux)
    }

    fn log_density(&self, _cx: &Ctx, r: &Value) -> Result<f64> {
        let s = &self.smc;
        let Some((moves, anc)) = s.unpack(r) else {
            return Ok(f64::NEG_INFINITY);
        };
        let pins = s.lineage(&anc);
        if (0..s.steps).any(|l| moves[l][pins[l]] != self.trace[l]) {
            return Ok(f64::NEG_INFINITY);
        }
        let Some((prop, res)) = s.replay(&moves, &anc) else {
            return Ok(f64::NEG_INFINITY);
        };
        let mut total = -(s.steps as f64) * (s.k as f64).ln();
        for l in 0..s.steps {
            for j in 0..s.k {
                if j != pins[l] {
                    total += prop[l][j];
                }
                if j != pins[l + 1] {
                    total += res[l][j];
                }
            }
        }
        Ok(total)
    }
}

/// Importance-weighted mode of `samples` agglomerative draws: the partition
/// with the largest summed weight, and its share of the total weight.
pub fn modal_partition(
    cx: &Ctx,
    model: &Dpmm,
    k: usize,
    samples: usize,
    ch: &mut dyn Choices,
) -> Result<(Partition, f64)> {
    let target = DpmmTarget(model.clone());
    let s = agglom(model.clone(), k)?;
    let mut seen: BTreeMap<Partition, Vec<f64>> = BTreeMap::new();
    for _ in 0..samples {
        let w = importance(cx, &target, &s, ch)?;
        let p = Partition::from_value(&w.x, model.n())?;
        seen.entry(p).or_default().push(w.log_weight);
    }
    let total = logsumexp(&seen.values().flatten().copied().collect::<Vec<_>>());
    seen.into_iter()
        .map(|(p, lw)| (p, (logsumexp(&lw) - total).exp()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| RaviError::InvalidArgument("no samples".into()))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::choice::{enumerate, RngChoices};
    use crate::importance::{hme, importance};
    use crate::models::dpmm::{exact_log_evidence, DpmmTarget};
    use crate::models::nig::{GaussianClusters, NigParams};
    use crate::params::ParamStore;
    use crate::target::Target;

    fn model(data: Vec<f64>) -> Dpmm {
        Dpmm::new(
            0.7,
            Arc::new(GaussianClusters {
                data,
                params: NigParams::default(),
            }),
        )
        .unwrap()
    }

    #[test]
    fn one_point_is_exact() {
        let m = model(vec![0.4]);
        let s = agglom(m.clone(), 2).unwrap();
        let params = ParamStore::new();
        let cx = Ctx::new(&params);
        let t = DpmmTarget(m.clone());
        let w = importance(&cx, &t, &s, &mut RngChoices::new(0)).unwrap();
        assert!((w.log_weight - exact_log_evidence(&m).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn unbiased_on_three_points() {
        let m = model(vec![-0.5, 0.1, 2.0]);
        let exact = exact_log_evidence(&m).unwrap();
        let params = ParamStore::new();
        let cx = Ctx::new(&params);
        let t = DpmmTarget(m.clone());
        for k in [1, 2] {
            let s = agglom(m.clone(), k).unwrap();
            let law = enumerate(
                |ch| importance(&cx, &t, &s, ch).map(|w| w.log_weight),
                10_000_000,
            )
            .unwrap();
            let mean: f64 = law.iter().map(|(lw, p)| p * (lw - exact).exp()).sum();
            assert!((mean - 1.0).abs() < 1e-10, "K={k}: {mean}");
            let mut mean = 0.0;
            for x in all_partitions_values(3) {
                let post = (t.log_density(&cx, &x).unwrap() - exact).exp();
                let law = enumerate(|ch| hme(&cx, &t, &x, &s, ch), 10_000_000).unwrap();
                mean += post
                    * law
                        .iter()
                        .map(|(lw, p)| p * (lw + exact).exp())
                        .sum::<f64>();
            }
            assert!((mean - 1.0).abs() < 1e-10, "K={k}: {mean}");
        }
    }

    fn all_partitions_values(n: usize) -> Vec<Value> {
        crate::models::partition::all_partitions(n)
            .iter()
            .map(Partition::to_value)
            .collect()
    }

    #[test]
    fn meta_traces_reproduce_the_partition() {
        let m = model(vec![0.0, 0.1, 3.0, 3.1, 0.2]);
        let p = Partition::new(vec![vec![0, 1, 4], vec![2, 3]], 5).unwrap();
        let s = agglom(m.clone(), 3).unwrap();
        let params = ParamStore::new();
        let cx = Ctx::new(&params);
        let crate::strategy::Node::Compound(j) = &s.node else {
            panic!()
        };
        let meta = j.meta(&cx, &p.to_value()).unwrap();
        let crate::strategy::Node::Compound(mj) = &meta.node else {
            panic!()
        };
        let mut ch = RngChoices::new(7);
        for _ in 0..20 {
            let (aux, mv) = mj.sample_joint(&cx, &mut ch).unwrap();
            assert!(j
                .log_joint_density(&cx, &mv, &p.to_value())
                .unwrap()
                .is_finite());
            assert!(mj.log_joint_density(&cx, &aux, &mv).unwrap().is_finite());
        }
    }
}
