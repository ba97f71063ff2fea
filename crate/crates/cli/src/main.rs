//! `hetmm` — benchmark harness for the heterogeneous matrix
//! multiplication engine.
//!
//! Subcommands:
//! - `sweep`: run size sweeps over the selected algorithms, CSV out.
//! - `dual`: run one problem independently on both accelerators.
//! - `capacity`: print the staging capacity of every configured engine.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hetmm_core::bench::{
    csv_string, dual_independent_bench, run_sweep, Algo, BenchRecord, SweepSpec,
};
use hetmm_core::engine::{capacity_of, EngineKind, EngineRegistry, Preset, PRESETS};
use hetmm_core::scheduler::DispatchPolicy;

#[derive(Parser)]
#[command(
    name = "hetmm",
    about = "Heterogeneous matrix-multiplication benchmark harness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep problem sizes over one or more algorithms and emit CSV.
    Sweep(SweepArgs),
    /// Run one size per repetition independently on both accelerators
    /// (reported at the effective size 2^(1/3) * n) and emit CSV.
    Dual(DualArgs),
    /// Print the staging capacity of every configured engine.
    Capacity(CapacityArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Problem sizes, comma separated, strictly increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Algorithms: naive, blocked, winograd, rmul, dual_independent.
    #[arg(long, value_delimiter = ',', default_value = "naive,blocked,winograd,rmul")]
    algos: Vec<String>,
    #[command(flatten)]
    common: CommonArgs,
    /// Dispatch policy JSON ({"k0", "k1", "recursion_point"|"auto"}).
    #[arg(long)]
    policy: Option<PathBuf>,
}

#[derive(Args)]
struct DualArgs {
    /// Problem sizes, comma separated, strictly increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CapacityArgs {
    /// Engine configuration JSON (defaults to the built-in pair).
    #[arg(long)]
    engines: Option<PathBuf>,
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration preset: Default, 90, 100, 112, 114 or 115.
    #[arg(long, default_value = "Default")]
    preset: String,
    /// Engine configuration JSON (defaults to the built-in pair).
    #[arg(long)]
    engines: Option<PathBuf>,
    /// Timed repetitions per point (one extra warm-up run is untimed).
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the operand fill.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Sweep(args) => sweep(args),
        Command::Dual(args) => dual(args),
        Command::Capacity(args) => capacity(args),
    }
}

fn load_registry(path: &Option<PathBuf>) -> Result<EngineRegistry> {
    match path {
        Some(p) => EngineRegistry::from_path(p)
            .with_context(|| format!("loading engine configuration {}", p.display())),
        None => Ok(EngineRegistry::default_pair()),
    }
}

fn lookup_preset(label: &str) -> Result<&'static Preset> {
    Preset::lookup(label).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|p| p.label).collect();
        anyhow!("unknown preset {label:?}; known presets: {}", known.join(", "))
    })
}

fn parse_algos(names: &[String]) -> Result<Vec<Algo>> {
    names
        .iter()
        .map(|s| s.parse::<Algo>().map_err(|e| anyhow!("{e}")))
        .collect()
}

fn write_records(records: &[BenchRecord], out: &Option<PathBuf>) -> Result<()> {
    let text = csv_string(records);
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let preset = lookup_preset(&args.common.preset)?;
    let registry = load_registry(&args.common.engines)?.with_preset(preset);
    let policy = match &args.policy {
        Some(p) => DispatchPolicy::from_path(p, &registry)
            .with_context(|| format!("loading policy {}", p.display()))?,
        None => DispatchPolicy::default_for(&registry)
            .context("no usable default policy for this engine configuration")?,
    };
    let spec = SweepSpec {
        sizes: args.sizes,
        algos: parse_algos(&args.algos)?,
        label: preset.label.to_string(),
        repetitions: args.common.reps,
        seed: args.common.seed,
    };
    let records = run_sweep(&spec, &registry, &policy)?;
    write_records(&records, &args.common.out)
}

fn dual(args: DualArgs) -> Result<()> {
    let preset = lookup_preset(&args.common.preset)?;
    let registry = load_registry(&args.common.engines)?.with_preset(preset);
    if !args.sizes.windows(2).all(|w| w[0] < w[1]) || args.sizes.is_empty() {
        bail!("sizes must be non-empty and strictly increasing");
    }
    if args.common.reps < 1 {
        bail!("reps must be at least 1");
    }
    let mut records = Vec::new();
    for &n in &args.sizes {
        // Warm-up, then timed repetitions.
        dual_independent_bench(n, preset.label, &registry, args.common.seed)?;
        for _ in 0..args.common.reps {
            records.push(dual_independent_bench(
                n,
                preset.label,
                &registry,
                args.common.seed,
            )?);
        }
    }
    write_records(&records, &args.common.out)
}

fn capacity(args: CapacityArgs) -> Result<()> {
    let registry = load_registry(&args.engines)?;
    if registry.engines().is_empty() {
        bail!("no engines configured");
    }
    for e in registry.engines() {
        let kind = match e.kind {
            EngineKind::HostCpu => "host-cpu",
            EngineKind::Accelerator => "accelerator",
        };
        println!(
            "engine {} ({kind}, rank {}): capacity {}",
            e.id,
            e.priority_rank,
            capacity_of(e)
        );
    }
    Ok(())
}
