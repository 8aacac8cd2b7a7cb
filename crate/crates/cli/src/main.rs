use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ravi_cli::{Command, Config, Run};

#[derive(Parser)]
#[command(
    name = "ravi",
    version,
    about = "Recursive auxiliary-variable inference experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// Config file with `[section]` headers and `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for CSV files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Trained MCVI against recursive MCVI over chain lengths.
    Mcvi(Common),
    /// DPMM evidence: agglomerative strategies against the SMC baseline.
    Dpmm(Common),
    /// Oracle checks over the bundled strategy zoo.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Swap in a strategy with corrupted resampling weights.
        #[arg(long)]
        fault_inject: bool,
    },
    /// Symmetric-KL bound between two binary latent models.
    KlBound(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Mcvi(c) => (Command::Mcvi, c),
        Sub::Dpmm(c) => (Command::Dpmm, c),
        Sub::Diagnose {
            common,
            fault_inject,
        } => (Command::Diagnose { fault_inject }, common),
        Sub::KlBound(c) => (Command::KlBound, c),
    };
    let result = (|| {
        if let Some(n) = common.threads {
            anyhow::ensure!(n > 0, "--threads must be positive");
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()?;
        }
        let run = Run {
            command,
            config: Config::load(common.config.as_deref())?,
            seed: common.seed,
            out: common.out,
        };
        run.execute()
    })();
    match result {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
