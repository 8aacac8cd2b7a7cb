//! Experiment runner for the `ravi` crate: MCVI sweeps, DPMM evidence
//! comparisons, the diagnostics suite and the symmetric-KL bound, each
//! writing CSV tables tagged with the config hash and seed.

pub mod config;
pub mod diagnose;
pub mod dpmm;
pub mod kl_bound;
pub mod mcvi;
pub mod output;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub use config::Config;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Mcvi,
    Dpmm,
    Diagnose { fault_inject: bool },
    KlBound,
}

/// A resolved invocation.
#[derive(Clone, Debug)]
pub struct Run {
    pub command: Command,
    pub config: Config,
    pub seed: u64,
    pub out: PathBuf,
}

/// Files written by a run and the process exit status.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub exit_code: i32,
}

fn emit(out: &Path, name: &str, table: &output::Table, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join(name);
    table.write(&path)?;
    files.push(path);
    Ok(())
}

impl Run {
    pub fn execute(&self) -> Result<Outcome> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        let hash = self.config.hash();
        let (seed, out) = (self.seed, self.out.as_path());
        let mut files = Vec::new();
        let mut exit_code = 0;
        match self.command {
            Command::Mcvi => {
                let rows = mcvi::run(&self.config.mcvi, seed)?;
                emit(
                    out,
                    "mcvi.csv",
                    &mcvi::table(&rows, &hash, seed),
                    &mut files,
                )?;
            }
            Command::Dpmm => {
                let cfg = &self.config.dpmm;
                let est = dpmm::run(cfg, seed)?;
                for e in &est {
                    let s = e.stats();
                    match e.exact {
                        Some(z) => println!(
                            "{}({}): log Z = {:.4} ± {:.4}, exact {:.4}, bias {:.4}",
                            e.method,
                            e.k_or_n,
                            s.mean,
                            s.variance.sqrt(),
                            z,
                            s.mean - z
                        ),
                        None => println!(
                            "{}({}): log Z = {:.4} ± {:.4}",
                            e.method,
                            e.k_or_n,
                            s.mean,
                            s.variance.sqrt()
                        ),
                    }
                }
                emit(out, "dpmm.csv", &dpmm::table(&est, &hash, seed), &mut files)?;
                if cfg.dataset == "typos" {
                    let runs = dpmm::typo_runs(cfg, seed)?;
                    let hits = runs.iter().filter(|r| r.matches()).count();
                    println!(
                        "planted partition recovered in {hits} of {} runs",
                        runs.len()
                    );
                    emit(
                        out,
                        "typo.csv",
                        &dpmm::typo_table(&runs, &hash, seed),
                        &mut files,
                    )?;
                }
            }
            Command::Diagnose { fault_inject } => {
                let report = diagnose::run(&self.config.diagnose, seed, fault_inject)?;
                emit(
                    out,
                    "diagnose.csv",
                    &diagnose::table(&report, &hash, seed),
                    &mut files,
                )?;
                emit(
                    out,
                    "recursion.csv",
                    &diagnose::recursion_table(&report, &hash, seed),
                    &mut files,
                )?;
                let failed = report.checks.iter().filter(|r| !r.passed).count();
                println!("{} checks, {failed} failed", report.checks.len());
                exit_code = report.exit_code();
            }
            Command::KlBound => {
                let rows = kl_bound::run(&self.config.kl_bound, seed)?;
                emit(
                    out,
                    "kl_bound.csv",
                    &kl_bound::table(&rows, &hash, seed),
                    &mut files,
                )?;
            }
        }
        Ok(Outcome { files, exit_code })
    }
}
