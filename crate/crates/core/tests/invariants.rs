use std::sync::Arc;

use proptest::prelude::*;
use ravi::diagnostics::{bias_recursion, unbiasedness, variance_recursion};
use ravi::math::logsumexp;
use ravi::models::{all_partitions, crp_log_prior, DiscreteTarget, Partition};
use ravi::strategies::{ravi_sir, sir, DiscreteProposal};
use ravi::Strategy as InferenceStrategy;
use ravi::{rejection_sample, Ctx, ParamStore, RngChoices};

fn weights(n: usize) -> impl proptest::strategy::Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..5.0, n)
}

fn setup(w: &[f64], q: &[f64]) -> (Arc<DiscreteTarget>, Arc<DiscreteProposal>) {
    let t = Arc::new(DiscreteTarget::from_weights(w).unwrap());
    let total: f64 = q.iter().sum();
    let probs: Vec<f64> = q.iter().map(|v| v / total).collect();
    let q = Arc::new(DiscreteProposal::from_probs(t.atoms().to_vec(), &probs).unwrap());
    (t, q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sir_is_unbiased_for_z_and_its_inverse(w in weights(3), q in weights(3), n in 1usize..4) {
        let store = ParamStore::new();
        let cx = Ctx::new(&store);
        let (t, q) = setup(&w, &q);
        let s = sir(t.clone(), q, n).unwrap();
        let u = unbiasedness(&cx, t.as_ref(), &s).unwrap();
        prop_assert!(u.rel_error_zhat() < 1e-10);
        prop_assert!(u.rel_error_hme() < 1e-10);
    }

    #[test]
    fn nested_sir_is_unbiased(w in weights(3), q in weights(3)) {
        let store = ParamStore::new();
        let cx = Ctx::new(&store);
        let (t, q) = setup(&w, &q);
        let inner = sir(t.clone(), q, 2).unwrap();
        let s = ravi_sir(t.clone(), inner, 2).unwrap();
        let u = unbiasedness(&cx, t.as_ref(), &s).unwrap();
        prop_assert!(u.rel_error_zhat() < 1e-10);
        prop_assert!(u.rel_error_hme() < 1e-10);
    }

    #[test]
    fn recursions_match_enumerated_laws(w in weights(4), q in weights(4), n in 1usize..3) {
        let store = ParamStore::new();
        let cx = Ctx::new(&store);
        let (t, q) = setup(&w, &q);
        let s = sir(t.clone(), q, n).unwrap();
        let v = variance_recursion(&cx, t.as_ref(), &s).unwrap();
        prop_assert!(v.zhat.rel_error() < 1e-8);
        prop_assert!(v.zcheck.rel_error() < 1e-8);
        let b = bias_recursion(&cx, t.as_ref(), &s).unwrap();
        prop_assert!((b.lower.total - b.lower.enumerated).abs() < 1e-8 * b.lower.enumerated.abs().max(1.0));
        prop_assert!((b.upper.total - b.upper.enumerated).abs() < 1e-8 * b.upper.enumerated.abs().max(1.0));
        prop_assert!(b.lower.total <= 1e-12);
        prop_assert!(b.upper.total >= -1e-12);
    }

    #[test]
    fn terminal_bias_is_kl(w in weights(3), q in weights(3)) {
        let store = ParamStore::new();
        let cx = Ctx::new(&store);
        let (t, qp) = setup(&w, &q);
        let s = InferenceStrategy::from_terminal(qp);
        let pi = t.probs();
        let total: f64 = q.iter().sum();
        let qn: Vec<f64> = q.iter().map(|v| v / total).collect();
        let kl_q_pi: f64 = qn.iter().zip(&pi).map(|(a, b)| a * (a / b).ln()).sum();
        let kl_pi_q: f64 = pi.iter().zip(&qn).map(|(a, b)| a * (a / b).ln()).sum();
        let b = bias_recursion(&cx, t.as_ref(), &s).unwrap();
        prop_assert!((b.lower.total + kl_q_pi).abs() < 1e-12);
        prop_assert!((b.upper.total - kl_pi_q).abs() < 1e-12);
    }

    #[test]
    fn crp_prior_is_normalized(n in 1usize..6, alpha in 0.1f64..5.0) {
        let l: Vec<f64> = all_partitions(n).iter().map(|p| crp_log_prior(p, alpha).unwrap()).collect();
        prop_assert!(logsumexp(&l).abs() < 1e-12);
    }

    #[test]
    fn partition_labels_round_trip(labels in prop::collection::vec(0usize..4, 1..9)) {
        let p = Partition::from_labels(&labels);
        prop_assert_eq!(Partition::from_labels(&p.labels()), p.clone());
        prop_assert_eq!(Partition::from_value(&p.to_value(), labels.len()).unwrap(), p);
    }

    #[test]
    fn logsumexp_is_shift_invariant(xs in prop::collection::vec(-50f64..50.0, 1..8), c in -700f64..700.0) {
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        prop_assert!((logsumexp(&shifted) - logsumexp(&xs) - c).abs() < 1e-9);
    }

    #[test]
    fn rejection_never_exceeds_a_valid_bound(w in weights(3), seed in 0u64..1000) {
        let store = ParamStore::new();
        let cx = Ctx::new(&store);
        let (t, q) = setup(&w, &[1.0, 1.0, 1.0]);
        let s = InferenceStrategy::from_terminal(q);
        let bound = w.iter().cloned().fold(0.0, f64::max).ln() + 3f64.ln();
        let out = rejection_sample(&cx, t.as_ref(), &s, bound, 10_000, &mut RngChoices::new(seed)).unwrap();
        prop_assert!(t.position(&out.x).is_some());
        prop_assert!(out.tries >= 1);
    }
}
