use std::sync::Arc;

use ravi::diagnostics::zoo::{mh_atoms, mh_example_posterior};
use ravi::diagnostics::{mh_example, mh_stationarity_check, EmpiricalStats};
use ravi::models::GaussianMixtureTarget;
use ravi::strategies::{Kernel, RandomWalkMetropolis};
use ravi::{mh_step, Ctx, ParamStore, RngChoices, Value};

#[test]
fn mh_example_is_stationary_and_mixes() {
    let store = ParamStore::new();
    let cx = Ctx::new(&store);
    let mh = mh_example();
    let atoms = mh_atoms();
    assert!(mh_stationarity_check(&cx, &mh, &atoms).unwrap() < 1e-10);

    let mut ch = RngChoices::new(21);
    let mut state = mh.init(&cx, atoms[2].clone(), &mut ch).unwrap();
    let steps = 30_000;
    let mut counts = [0usize; 3];
    let mut accepted = 0;
    for _ in 0..steps {
        let (next, acc) = mh_step(&cx, &mh, &state, &mut ch).unwrap();
        accepted += usize::from(acc);
        state = next;
        counts[atoms.iter().position(|a| *a == state.x).unwrap()] += 1;
    }
    let tv: f64 = 0.5
        * counts
            .iter()
            .zip(mh_example_posterior())
            .map(|(&c, p)| (c as f64 / steps as f64 - p).abs())
            .sum::<f64>();
    assert!(tv < 0.03, "{tv}");
    assert!(accepted > 0 && accepted < steps);
}

#[test]
fn random_walk_metropolis_targets_a_gaussian() {
    let store = ParamStore::new();
    let cx = Ctx::new(&store);
    let t = Arc::new(GaussianMixtureTarget::unnormalized_gaussian(0.5).unwrap());
    let k = RandomWalkMetropolis {
        target: t,
        scale: 0.6,
    };
    let mut ch = RngChoices::new(4);
    let mut x = Value::Real(2.0);
    let mut xs = Vec::new();
    for i in 0..60_000 {
        x = k.sample(&cx, &x, &mut ch).unwrap();
        if i >= 1000 && i % 10 == 0 {
            xs.push(x.as_real());
        }
    }
    let s = EmpiricalStats::from_samples(&xs);
    assert!(s.mean.abs() < 0.03, "{}", s.mean);
    assert!((s.variance - 0.25).abs() < 0.02, "{}", s.variance);
}
