use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use aphom_lab::emit::emit;
use aphom_lab::report::{CheckStatus, RowStatus};
use aphom_lab::{run, ExperimentKind, ExperimentSpec};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aphom", version, about = "Homogenization experiment sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-scale error rate in ε
    Converge(Common),
    /// Corrector norms and Cauchy distances along T
    Growth(Common),
    /// ρ_k(L, L) decay and fitted θ
    Rho(Common),
    /// Convergence under a decaying perturbation of A
    Perturb(Common),
    /// Ball-average profile of ∇^m χ_T
    Holder(Common),
    /// Flux-divergence identity and dual correctors
    Flux(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment spec (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to `output.dir`, then `out`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the experiment seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores)
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(kind: ExperimentKind, args: Common) -> anyhow::Result<i32> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut spec = ExperimentSpec::from_path(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    if spec.kind != kind {
        bail!("config describes a `{}` experiment, not `{}`", spec.kind.as_str(), kind.as_str());
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    let report = run(&spec)?;
    let dir = args.out.or_else(|| spec.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    for path in emit(&report, &dir, &spec.output.formats)? {
        println!("wrote {}", path.display());
    }
    for row in report.rows.iter().filter(|r| r.status == RowStatus::Failed) {
        println!("row failed  {} {}: {}", row.field, row.label, row.error.as_deref().unwrap_or(""));
    }
    for c in &report.checks {
        let tag = match c.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Inconclusive => "INCONCLUSIVE",
        };
        let value = c.value.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into());
        println!("{tag:<12} {:<20} {:<28} value {value} (threshold {})", c.name, c.field, c.threshold);
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Converge(a) => (ExperimentKind::Converge, a),
        Command::Growth(a) => (ExperimentKind::CorrectorGrowth, a),
        Command::Rho(a) => (ExperimentKind::RhoDecay, a),
        Command::Perturb(a) => (ExperimentKind::Perturb, a),
        Command::Holder(a) => (ExperimentKind::HolderProfile, a),
        Command::Flux(a) => (ExperimentKind::FluxIdentity, a),
    };
    match execute(kind, args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
