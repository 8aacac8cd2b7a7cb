use std::path::Path;
use std::process::{Command, Output};

fn ravi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ravi"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// Every data row starts with the same config hash and the seed.
fn assert_tagged(rows: &[Vec<String>], seed: &str) {
    assert_eq!(rows[0][..2], ["config_hash", "seed"]);
    assert!(rows.len() > 1);
    let hash = &rows[1][0];
    assert_eq!(hash.len(), 64);
    for r in &rows[1..] {
        assert_eq!(&r[0], hash);
        assert_eq!(r[1], seed);
    }
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[kl_bound]\nreplicate = 5\n");
    let out = ravi(&[
        "kl-bound",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
}

#[test]
fn fault_injection_flag_is_diagnose_only() {
    let out = ravi(&["kl-bound", "--fault-inject"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.status.success());
}

#[test]
fn diagnose_reports_every_check_and_fails_under_fault_injection() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[diagnose]\nreplicates = 50\n");
    let d = dir.path().to_str().unwrap();
    let ok = ravi(&[
        "diagnose",
        "--config",
        &cfg,
        "--seed",
        "5",
        "--out",
        d,
        "--threads",
        "2",
    ]);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    let rows = csv(&dir.path().join("diagnose.csv"));
    assert_tagged(&rows, "5");
    assert_eq!(rows.len() - 1, 17 * 4);
    assert_tagged(&csv(&dir.path().join("recursion.csv")), "5");

    let bad = ravi(&[
        "diagnose",
        "--config",
        &cfg,
        "--seed",
        "5",
        "--out",
        d,
        "--fault-inject",
    ]);
    assert_eq!(bad.status.code(), Some(2));
    let rows = csv(&dir.path().join("diagnose.csv"));
    assert!(rows[1..]
        .iter()
        .any(|r| r[2] == "sir_n2" && r[6] == "false"));
}

#[test]
fn kl_bound_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[kl_bound]\nreplicates = 2000\n");
    let out = ravi(&[
        "kl-bound",
        "--config",
        &cfg,
        "--seed",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let rows = csv(&dir.path().join("kl_bound.csv"));
    assert_tagged(&rows, "3");
    assert_eq!(
        rows[0][2..],
        ["strategy", "mean_bound", "stderr", "exact_kl", "replicates"]
    );
    assert_eq!(rows.len(), 4);
}

#[test]
fn dpmm_schema_and_exact_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[dpmm]\nn = 4\nreplicates = 50\nsmc_particles = [2]\n",
    );
    let out = ravi(&[
        "dpmm",
        "--config",
        &cfg,
        "--seed",
        "9",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv(&dir.path().join("dpmm.csv"));
    assert_tagged(&rows, "9");
    assert_eq!(
        rows[0][2..],
        [
            "method",
            "K_or_N",
            "mean_logZ",
            "std",
            "exact_logZ_or_NA",
            "replicates"
        ]
    );
    assert_eq!(rows.len() - 1, 3);
    assert!(rows[1..]
        .iter()
        .all(|r| r[6].parse::<f64>().is_ok() && r[7] == "50"));
}

#[test]
fn dpmm_reads_observations_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("y.txt");
    std::fs::write(&data, "# heights\n0.1\n-0.3\n2.2\n").unwrap();
    let text = format!(
        "[dpmm]\ndataset = \"file\"\ndata_path = \"{}\"\nreplicates = 20\n",
        data.display()
    );
    let cfg = write_config(dir.path(), &text);
    let out = ravi(&[
        "dpmm",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(csv(&dir.path().join("dpmm.csv")).len() - 1, 4);
}

#[test]
fn mcvi_schema_and_step_accounting() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[mcvi]\nm_values = [1, 2]\nk_values = [3]\niters = 3\nbatch = 2\neval_reps = 20\nais_scale = 0.3\nquadrature_points = 2000\n",
    );
    let out = ravi(&[
        "mcvi",
        "--config",
        &cfg,
        "--seed",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv(&dir.path().join("mcvi.csv"));
    assert_tagged(&rows, "2");
    assert_eq!(
        rows[0][2..],
        [
            "algorithm",
            "M",
            "K",
            "mean_elbo",
            "stderr",
            "gap_vs_ref",
            "mcmc_steps"
        ]
    );
    let steps: Vec<(String, String, String)> = rows[1..]
        .iter()
        .map(|r| (r[2].clone(), r[3].clone(), r[8].clone()))
        .collect();
    let expect = |a: &str, m: &str, s: &str| (a.to_string(), m.to_string(), s.to_string());
    assert_eq!(
        steps,
        [
            expect("mcvi", "1", "1"),
            expect("rmcvi", "1", "3"),
            expect("ais", "1", "1"),
            expect("mcvi", "2", "2"),
            expect("rmcvi", "2", "6"),
            expect("ais", "2", "2"),
        ]
    );
}
