use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use laplace_cert::experiment::{run, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "lapcert", version, about = "Laplace approximation certificates for GLM inverse problems")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Eigenpairs of R Rᵀ and their diagnostics.
    Eigen,
    /// Draw a dataset from the truth.
    Simulate,
    /// MAP estimate and Laplace approximation.
    Fit,
    /// Certificates for D_G, I/α(I), and D(γ₀).
    Certify,
    /// Certificates plus empirical TV, tails and the ω chain.
    Validate,
    /// Regime sweep over p or n.
    Sweep,
    /// Every stage.
    All,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Eigen => Command::Eigen,
            Sub::Simulate => Command::Simulate,
            Sub::Fit => Command::Fit,
            Sub::Certify => Command::Certify,
            Sub::Validate => Command::Validate,
            Sub::Sweep => Command::Sweep,
            Sub::All => Command::All,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let mut cfg = match &cli.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::from_json("{}", "<defaults>").expect("defaults are valid"),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.output = o;
    }
    let out = cfg.output.clone();
    match run(cli.command.into(), &cfg, &out) {
        Ok(report) => {
            for n in &report.notes {
                eprintln!("note: {n}");
            }
            for f in &report.failures {
                eprintln!("invariant failed: {f}");
            }
            println!("{}", report.out_dir.display());
            if report.ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
