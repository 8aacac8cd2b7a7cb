//! The oracle suite over the bundled strategy zoo.

use anyhow::Result;
use ravi::diagnostics::{
    bias_recursion, check_entry, variance_recursion, zoo, CheckRow, RecursionReport, ZooEntry,
};
use ravi::{Ctx, ParamStore};
use rayon::prelude::*;

use crate::config::DiagnoseSection;
use crate::output::{opt, Table};

pub const COLUMNS: [&str; 6] = ["strategy", "check", "error", "tolerance", "passed", "note"];
pub const RECURSION_COLUMNS: [&str; 7] = [
    "strategy",
    "quantity",
    "level",
    "term_name",
    "exact_value",
    "empirical_value",
    "std_err",
];

/// Exit status of `diagnose` when some check exceeds its tolerance.
pub const EXIT_TOLERANCE: i32 = 2;
/// Exit status when some check could not be evaluated.
pub const EXIT_UNEVALUABLE: i32 = 3;

pub struct Report {
    pub checks: Vec<CheckRow>,
    /// Per strategy, the four recursion reports or the error that stopped them.
    pub recursions: Vec<(String, std::result::Result<Vec<RecursionReport>, String>)>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.checks.iter().any(|r| !r.note.is_empty()) {
            EXIT_UNEVALUABLE
        } else if self.checks.iter().any(|r| !r.passed) {
            EXIT_TOLERANCE
        } else {
            0
        }
    }
}

fn recursions(
    cx: &Ctx,
    e: &ZooEntry,
    reps: usize,
    seed: u64,
) -> ravi::Result<Vec<RecursionReport>> {
    let t = e.target.as_ref();
    let v =
        variance_recursion(cx, t, &e.strategy)?.with_empirical(cx, t, &e.strategy, reps, seed)?;
    let b = bias_recursion(cx, t, &e.strategy)?.with_empirical(
        cx,
        t,
        &e.strategy,
        reps,
        seed ^ 0xb1a5,
    )?;
    Ok(vec![v.zhat, v.zcheck, b.lower, b.upper])
}

pub fn run(cfg: &DiagnoseSection, seed: u64, fault: bool) -> Result<Report> {
    let store = ParamStore::new();
    let cx = Ctx::new(&store);
    let entries = zoo(&cx, fault)?;
    let checks = entries
        .par_iter()
        .flat_map_iter(|e| check_entry(&cx, e))
        .collect();
    let recursions = entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let r = recursions(&cx, e, cfg.replicates, seed.wrapping_add(i as u64))
                .map_err(|err| err.to_string());
            (e.name.clone(), r)
        })
        .collect();
    Ok(Report { checks, recursions })
}

pub fn table(report: &Report, hash: &str, seed: u64) -> Table {
    let mut t = Table::new(&COLUMNS, hash, seed);
    for r in &report.checks {
        t.push(vec![
            r.strategy.clone(),
            r.check.to_string(),
            r.error.to_string(),
            r.tolerance.to_string(),
            r.passed.to_string(),
            r.note.clone(),
        ]);
    }
    t
}

pub fn recursion_table(report: &Report, hash: &str, seed: u64) -> Table {
    let mut t = Table::new(&RECURSION_COLUMNS, hash, seed);
    for (name, r) in &report.recursions {
        match r {
            Ok(reports) => {
                for rep in reports {
                    for row in rep.rows() {
                        t.push(vec![
                            name.clone(),
                            rep.quantity.clone(),
                            row.level.map_or_else(|| "NA".into(), |l| l.to_string()),
                            row.term_name,
                            row.exact_value.to_string(),
                            opt(row.empirical_value),
                            opt(row.std_err),
                        ]);
                    }
                }
            }
            Err(msg) => t.push(vec![
                name.clone(),
                "error".into(),
                "NA".into(),
                msg.clone(),
                "NA".into(),
                "NA".into(),
                "NA".into(),
            ]),
        }
    }
    t
}
