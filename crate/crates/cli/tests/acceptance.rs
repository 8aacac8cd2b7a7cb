//! End-to-end acceptance checks, one line per criterion.

use std::io::Write;
use std::sync::Arc;

use ravi::diagnostics::law::enumerate_law;
use ravi::diagnostics::zoo::{mh_atoms, mh_example_posterior};
use ravi::diagnostics::{
    bias_recursion, check_entry, empirical_vec_stats, finite_diff_gradient, mh_example,
    mh_stationarity_check, replicate, variance_recursion, zoo, CheckRow, CHECKS,
};
use ravi::models::{
    binary_terminal, BinaryCompound, BinaryLatentModel, Dpmm, GaussianMixtureTarget,
};
use ravi::strategies::{sir, DiscreteProposal, McviFamily, McviInit};
use ravi::{
    elbo_grad, elbo_reparam, eubo_grad, eubo_reparam, rejection_sample, Ctx, GenerativeModel,
    ParamStore, RngChoices, Strategy, Value,
};
use ravi_cli::config::{Config, McviSection};
use ravi_cli::{dpmm, kl_bound, mcvi, Command, Run};
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Verdict = anyhow::Result<(bool, String)>;

fn report(n: usize, v: &Verdict) -> bool {
    let (ok, line) = match v {
        Ok((ok, detail)) => (
            *ok,
            format!(
                "criterion {n:>2}: {} ({detail})",
                if *ok { "PASS" } else { "FAIL" }
            ),
        ),
        Err(e) => (false, format!("criterion {n:>2}: FAIL (error: {e:#})")),
    };
    // Written past the test harness's capture so the lines land in the log.
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").ok();
    out.flush().ok();
    ok
}

fn zoo_rows() -> anyhow::Result<Vec<CheckRow>> {
    let store = ParamStore::new();
    let cx = Ctx::new(&store);
    Ok(zoo(&cx, false)?
        .iter()
        .flat_map(|e| check_entry(&cx, e))
        .collect())
}

fn rows_pass(rows: &[CheckRow], check: &str) -> (bool, String) {
    let sel: Vec<&CheckRow> = rows.iter().filter(|r| r.check == check).collect();
    let worst = sel.iter().map(|r| r.error).fold(0.0, f64::max);
    let failed: Vec<&str> = sel
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.strategy.as_str())
        .collect();
    (
        failed.is_empty() && !sel.is_empty(),
        format!(
            "{} strategies, worst error {worst:.2e}, failed {failed:?}",
            sel.len()
        ),
    )
}

fn two_atom_case() -> anyhow::Result<(ravi::models::DiscreteTarget, Strategy)> {
    let t = ravi::models::DiscreteTarget::from_weights(&[0.75, 0.25])?;
    let s = Strategy::terminal(DiscreteProposal::uniform(t.atoms().to_vec()));
    Ok((t, s))
}

fn criterion_1(rows: &[CheckRow]) -> Verdict {
    Ok(rows_pass(rows, "unbiasedness"))
}

fn criterion_2(rows: &[CheckRow]) -> Verdict {
    let (ok, detail) = rows_pass(rows, "variance_recursion");
    let store = ParamStore::new();
    let cx = Ctx::new(&store);
    let (t, s) = two_atom_case()?;
    let r = variance_recursion(&cx, &t, &s)?;
    let base = (r.zhat.total - 0.25).abs() < 1e-12 && (r.zcheck.total - 1.0 / 3.0).abs() < 1e-12;
    Ok((
        ok && base,
        format!(
            "{detail}; base cases {:.15} and {:.15}",
            r.zhat.total, r.zcheck.total
        ),
    ))
}

fn criterion_3(rows: &[CheckRow]) -> Verdict {
    let (ok, detail) = rows_pass(rows, "bias_recursion");
    let store = ParamStore::new();
    let cx = Ctx::new(&store);
    let (t, s) = two_atom_case()?;
    let r = bias_recursion(&cx, &t, &s)?;
    let (pi, q): ([f64; 2], [f64; 2]) = ([0.75, 0.25], [0.5, 0.5]);
    let kl_q_pi: f64 = (0..2).map(|i| q[i] * (q[i] / pi[i]).ln()).sum();
    let kl_pi_q: f64 = (0..2).map(|i| pi[i] * (pi[i] / q[i]).ln()).sum();
    let base = (r.lower.total + kl_q_pi).abs() < 1e-14 && (r.upper.total - kl_pi_q).abs() < 1e-14;
    Ok((
        ok && base,
        format!(
            "{detail}; terminal bias {:.6} / {:.6}",
            r.lower.total, r.upper.total
        ),
    ))
}

fn bit(v: &Value) -> usize {
    match v {
        Value::Int(1) => 1,
        _ => 0,
    }
}

/// Largest `|MC − FD| / SE` over coordinates, with a floor for the
/// truncation error of the central difference.
fn gradient_agreement(mc: &ravi::diagnostics::VecStats, fd: &[f64]) -> (bool, f64) {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for i in 0..fd.len() {
        let err = (mc.mean[i] - fd[i]).abs();
        ok &= err <= 3.0 * mc.std_err[i] + 1e-7;
        if mc.std_err[i] > 0.0 {
            worst = worst.max(err / mc.std_err[i]);
        }
    }
    (ok, worst)
}

fn criterion_4() -> Verdict {
    let mut store = ParamStore::new();
    let theta = store.add("theta", 0.3)?;
    let term = binary_terminal(store.add("l0", 0.2)?, store.add("l1", -0.4)?);
    let mut p = |name: &str, v: f64| store.add(name, v);
    let compound = BinaryCompound {
        a: [p("a0", 0.1)?, p("a1", -0.3)?],
        b: [
            [p("b00", 0.5)?, p("b01", -0.2)?],
            [p("b10", -0.6)?, p("b11", 0.4)?],
        ],
        c: [
            [p("c00", 0.3)?, p("c01", 0.0)?],
            [p("c10", -0.2)?, p("c11", 0.7)?],
        ],
    }
    .strategy();
    let model = Arc::new(BinaryLatentModel::new(theta, [0.2, 0.7])?);
    let post = model.posterior(1);
    let reps = 100_000;
    let mut details = Vec::new();
    let mut all = true;
    for (name, s) in [("terminal", &term), ("compound", &compound)] {
        let elbo_fd = finite_diff_gradient(&store, 1e-4, |ps| {
            let cx = Ctx::new(ps);
            Ok((
                enumerate_law(|ch| elbo_grad(&cx, &post, s, ch).map(|g| g.objective))?.mean(),
                0.0,
            ))
        })?;
        let cx = Ctx::new(&store);
        let elbo_mc =
            empirical_vec_stats(reps, 41, |ch| elbo_grad(&cx, &post, s, ch).map(|g| g.grad))?;
        let (ok_l, z_l) = gradient_agreement(&elbo_mc, &elbo_fd.grad);

        let eubo = |cx: &Ctx, ch: &mut dyn ravi::Choices| -> ravi::Result<ravi::GradientEstimate> {
            let (x, y) = model.sample(cx, ch)?;
            eubo_grad(cx, &model.posterior(bit(&y)), &x, s, ch)
        };
        let eubo_fd = finite_diff_gradient(&store, 1e-4, |ps| {
            let cx = Ctx::new(ps);
            Ok((
                enumerate_law(|ch| eubo(&cx, ch).map(|g| g.objective))?.mean(),
                0.0,
            ))
        })?;
        let eubo_mc = empirical_vec_stats(reps, 43, |ch| eubo(&cx, ch).map(|g| g.grad))?;
        let (ok_u, z_u) = gradient_agreement(&eubo_mc, &eubo_fd.grad);
        all &= ok_l && ok_u;
        details.push(format!("{name} elbo max z {z_l:.2}, eubo max z {z_u:.2}"));
    }

    let mut rstore = ParamStore::new();
    let target = Arc::new(GaussianMixtureTarget::unnormalized_gaussian(0.2)?);
    let family = McviFamily::new(&mut rstore, target.clone(), 0.015, 2, &McviInit::default())?;
    let r = family.reparam();
    let th = rstore.values().to_vec();
    let mut worst_rel: f64 = 0.0;
    for seed in 0..5u64 {
        let x = [0.05 * seed as f64 - 0.1];
        let elbo = |t: &[f64]| elbo_reparam(target.as_ref(), &r, t, &mut RngChoices::new(seed));
        let eubo = |t: &[f64]| eubo_reparam(target.as_ref(), &x, &r, t, &mut RngChoices::new(seed));
        for f in [
            &elbo as &dyn Fn(&[f64]) -> ravi::Result<(f64, Vec<f64>)>,
            &eubo,
        ] {
            let (_, g) = f(&th)?;
            for i in 0..th.len() {
                let h = 1e-6;
                let (mut up, mut dn) = (th.clone(), th.clone());
                up[i] += h;
                dn[i] -= h;
                let num = (f(&up)?.0 - f(&dn)?.0) / (2.0 * h);
                worst_rel = worst_rel.max((num - g[i]).abs() / num.abs().max(1.0));
            }
        }
    }
    let ok_r = worst_rel <= 1e-4;
    details.push(format!("reparam worst relative error {worst_rel:.2e}"));
    Ok((all && ok_r, details.join("; ")))
}

fn criterion_5() -> Verdict {
    let store = ParamStore::new();
    let cx = Ctx::new(&store);
    let mh = mh_example();
    let atoms = mh_atoms();
    let residual = mh_stationarity_check(&cx, &mh, &atoms)?;
    let exact = mh_example_posterior();
    let mut ch = RngChoices::new(5);
    let mut state = mh.init(&cx, atoms[0].clone(), &mut ch)?;
    let steps = 100_000;
    let mut counts = vec![0usize; atoms.len()];
    for _ in 0..steps {
        state = mh.step(&cx, &state, &mut ch)?.0;
        counts[atoms
            .iter()
            .position(|a| *a == state.x)
            .expect("chain stays on atoms")] += 1;
    }
    let tv: f64 = 0.5
        * counts
            .iter()
            .zip(&exact)
            .map(|(&c, p)| (c as f64 / steps as f64 - p).abs())
            .sum::<f64>();
    Ok((
        residual < 1e-8 && tv < 0.02,
        format!("stationary residual {residual:.2e}, chain TV {tv:.4}"),
    ))
}

/// The smallest sweep index from which successive MCVI gaps never drop by
/// more than two joint standard errors.
fn degradation_onset(gaps: &[(f64, f64)]) -> usize {
    let mut start = gaps.len() - 1;
    while start > 0 {
        let (prev, cur) = (gaps[start - 1], gaps[start]);
        if cur.0 < prev.0 - 2.0 * (prev.1 * prev.1 + cur.1 * cur.1).sqrt() {
            break;
        }
        start -= 1;
    }
    start
}

fn criterion_6() -> Verdict {
    let cfg = McviSection {
        k_values: vec![16],
        ais_scale: 0.0,
        ..McviSection::default()
    };
    let rows = mcvi::run(&cfg, 1)?;
    let pick = |alg: &str| -> Vec<(usize, f64, f64)> {
        rows.iter()
            .filter(|r| r.algorithm == alg)
            .map(|r| (r.m, r.gap, r.stderr))
            .collect()
    };
    let (plain, rec) = (pick("mcvi"), pick("rmcvi"));
    let gaps: Vec<(f64, f64)> = plain.iter().map(|r| (r.1, r.2)).collect();
    let onset = degradation_onset(&gaps);
    let m_star = plain[onset].0;
    let dominated = plain.iter().zip(&rec).skip(onset).all(|(a, b)| b.1 <= a.1);
    let (a, b) = (plain.last().unwrap(), rec.last().unwrap());
    let margin = (a.1 - b.1) / (a.2 * a.2 + b.2 * b.2).sqrt();
    let summary: Vec<String> = plain
        .iter()
        .zip(&rec)
        .map(|(a, b)| format!("M={} {:.3}/{:.3}", a.0, a.1, b.1))
        .collect();
    Ok((
        m_star < 40 && dominated && margin > 2.0,
        format!(
            "M* = {m_star}, gap mcvi/rmcvi(16): {}; M=40 difference {margin:.1} SE",
            summary.join(", ")
        ),
    ))
}

fn criterion_7() -> Verdict {
    let base = Config::default().dpmm;
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in [3, 6] {
        for seed in 0..3u64 {
            let cfg = ravi_cli::config::DpmmSection {
                n,
                replicates: 20_000,
                agglom_k: vec![1, 4],
                smc_particles: vec![1, 10],
                ..base.clone()
            };
            let model = Dpmm::new(cfg.alpha, dpmm::likelihood(&cfg, seed)?)?;
            for e in dpmm::estimates(&cfg, &model, seed)? {
                let exact = e.exact.expect("enumerable");
                let s = e.z_stats(exact);
                let z = (s.mean - 1.0).abs() / s.std_err;
                ok &= s.within(1.0, 3.0);
                worst = worst.max(z);
                cases += 1;
            }
        }
    }
    let runs = dpmm::typo_runs(&base, 0)?;
    let hits = runs.iter().filter(|r| r.matches()).count();
    Ok((
        ok && hits >= 9,
        format!("{cases} evidence cases, worst |mean Z/Z_exact - 1| = {worst:.2} SE; typo truth recovered {hits}/10"),
    ))
}

fn criterion_8() -> Verdict {
    let store = ParamStore::new();
    let cx = Ctx::new(&store);
    let t = Arc::new(ravi::models::DiscreteTarget::from_weights(&[
        2.0, 6.0, 1.0, 5.0,
    ])?);
    let q = Arc::new(DiscreteProposal::from_probs(
        t.atoms().to_vec(),
        &[0.4, 0.1, 0.3, 0.2],
    )?);
    let s = sir(t.clone(), q, 2)?;
    let log_bound = 60f64.ln();
    let n = 100_000;
    let draws = replicate(n, 8, |ch| {
        rejection_sample(&cx, t.as_ref(), &s, log_bound, 100_000, ch)
    })?;
    let mut counts = [0f64; 4];
    let mut tries = 0usize;
    for d in &draws {
        counts[t.position(&d.x).expect("atom")] += 1.0;
        tries += d.tries;
    }
    let probs = t.probs();
    let chi2: f64 = counts
        .iter()
        .zip(&probs)
        .map(|(c, p)| (c - n as f64 * p).powi(2) / (n as f64 * p))
        .sum();
    let p_value = 1.0 - ChiSquared::new(3.0)?.cdf(chi2);
    let rate = n as f64 / tries as f64;
    let expected = 14.0 / 60.0;
    let se = (rate * (1.0 - rate) / tries as f64).sqrt();
    let ok = p_value > 0.01 && (rate - expected).abs() <= 3.0 * se;
    Ok((
        ok,
        format!("chi-square p = {p_value:.3}, acceptance {rate:.5} vs {expected:.5} (SE {se:.1e})"),
    ))
}

fn criterion_9() -> Verdict {
    let rows = kl_bound::run(&Config::default().kl_bound, 9)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for r in &rows {
        let pass = if r.strategy == "exact" {
            r.stats.within(r.exact, 3.0)
        } else {
            r.stats.mean >= r.exact - 3.0 * r.stats.std_err
        };
        ok &= pass;
        parts.push(format!(
            "{} {:.4} ± {:.4}",
            r.strategy, r.stats.mean, r.stats.std_err
        ));
    }
    Ok((
        ok,
        format!("exact KL {:.4}; {}", rows[0].exact, parts.join(", ")),
    ))
}

fn criterion_10() -> Verdict {
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    for d in &dirs {
        let run = Run {
            command: Command::Diagnose {
                fault_inject: false,
            },
            config: Config::default(),
            seed: 17,
            out: d.path().to_path_buf(),
        };
        let outcome = run.execute()?;
        anyhow::ensure!(
            outcome.exit_code == 0,
            "diagnose exited with {}",
            outcome.exit_code
        );
    }
    let mut same = true;
    for name in ["diagnose.csv", "recursion.csv"] {
        let a = std::fs::read(dirs[0].path().join(name))?;
        let b = std::fs::read(dirs[1].path().join(name))?;
        same &= a == b;
    }
    let text = std::fs::read_to_string(dirs[0].path().join("diagnose.csv"))?;
    let rows = text.lines().count() - 1;
    let expected = zoo(&Ctx::new(&ParamStore::new()), false)?.len() * CHECKS.len();
    Ok((
        same && rows == expected,
        format!("byte-identical {same}, {rows} check rows of {expected} expected"),
    ))
}

#[test]
fn acceptance() {
    let rows = zoo_rows();
    let zoo_verdict = |f: fn(&[CheckRow]) -> Verdict| match &rows {
        Ok(r) => f(r),
        Err(e) => Err(anyhow::anyhow!("{e:#}")),
    };
    let verdicts = [
        zoo_verdict(criterion_1),
        zoo_verdict(criterion_2),
        zoo_verdict(criterion_3),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ];
    let passed: Vec<bool> = verdicts
        .iter()
        .enumerate()
        .map(|(i, v)| report(i + 1, v))
        .collect();
    let failed: Vec<usize> = passed
        .iter()
        .enumerate()
        .filter(|(_, p)| !**p)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
