use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

mod run;

/// Stability benchmarks for meshless RBF-FD and WLS Laplacian stencils.
#[derive(Debug, Parser)]
#[command(name = "meshfree-lab", version)]
struct Cli {
    verb: Verb,
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving the CSV outputs.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override a configuration key, e.g. `--set m=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Verb {
    /// Solve once and dump the nodal solution.
    Solve,
    /// Error against node count, with order estimates.
    Converge,
    /// Error against stencil size.
    StencilScan,
    /// Repeated re-discretization and normalized spread.
    Stability,
    /// Monomial-exactness check of every weight engine.
    CheckWeights,
}

impl Verb {
    fn name(self) -> &'static str {
        match self {
            Verb::Solve => "solve",
            Verb::Converge => "converge",
            Verb::StencilScan => "stencil-scan",
            Verb::Stability => "stability",
            Verb::CheckWeights => "check-weights",
        }
    }
}

/// `MESHFREE_THREADS` caps the worker pool.
fn limit_threads() {
    let Some(cap) = std::env::var("MESHFREE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    else {
        return;
    };
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(cap.clamp(1, available))
        .build_global();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    limit_threads();
    match run::dispatch(cli.verb, cli.config.as_deref(), &cli.out, &cli.overrides) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("meshfree-lab {}: {e}", cli.verb.name());
            ExitCode::from(2)
        }
    }
}
