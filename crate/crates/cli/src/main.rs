use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use jumpflow_cli::config::RunConfig;
use jumpflow_cli::manifest::{replay, run, RunManifest};

/// Exit codes: 0 all gates passed, 1 a gate failed or a replay differed,
/// 2 usage, config or runtime error.
#[derive(Parser)]
#[command(name = "jumpflow", version, about = "Experiments for SDEs with Hölder drift and stable-like jump noise")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "JUMPFLOW_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sector bounds, small-jump moments and ψ(0) for a model.
    SymbolCheck(RunArgs),
    /// Increment samples against the exact characteristic function.
    Sample(RunArgs),
    /// Decay rate of ‖D R_t f‖₀.
    SemigroupDecay(RunArgs),
    /// Resolvent solve with maximum-principle and Schauder diagnostics.
    Resolvent(RunArgs),
    /// Build ψ = id + u and report the c_λ curve.
    Transform(RunArgs),
    /// Direct and transformed simulation on common noise.
    Simulate(RunArgs),
    /// Common-noise flow from sorted starts.
    Flow(RunArgs),
    /// Dispersion of pairs started δ apart.
    Dispersion(RunArgs),
    /// Dispersion slope over an (α, β) grid.
    RegimeSweep(RunArgs),
    /// Re-run a manifest and compare output hashes.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn report(m: &RunManifest) {
    for g in &m.gates {
        println!("{} {}: {}", if g.pass { "PASS" } else { "FAIL" }, g.name, g.detail);
    }
    for o in &m.outputs {
        println!("wrote {} {}", o.sha256, o.path);
    }
}

fn execute(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let (tag, args) = match cli.command {
        Command::Replay { manifest, out } => {
            let m = RunManifest::read(&manifest)?;
            let r = replay(&m, &out)?;
            report(&r.manifest);
            if r.identical() {
                println!("replay identical: {} outputs", r.manifest.outputs.len());
            } else {
                println!("replay differs: {}", r.mismatches.join(", "));
            }
            return Ok(r.identical() && r.manifest.passed());
        }
        Command::SymbolCheck(a) => ("symbol-check", a),
        Command::Sample(a) => ("sample", a),
        Command::SemigroupDecay(a) => ("semigroup-decay", a),
        Command::Resolvent(a) => ("resolvent", a),
        Command::Transform(a) => ("transform", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Flow(a) => ("flow", a),
        Command::Dispersion(a) => ("dispersion", a),
        Command::RegimeSweep(a) => ("regime-sweep", a),
    };
    let config = RunConfig::read(&args.config)?;
    if config.experiment.tag() != tag {
        bail!("config describes a {} run, not {tag}", config.experiment.tag());
    }
    let m = run(&config, &args.out)?;
    report(&m);
    Ok(m.passed())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
