//! `popvote`: sweeps, mean-field curves and overlays for majority-voting protocols.

// `!(x > 0.0)` style guards are how NaN gets rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod meanfield;
mod output;
mod overlay;
mod run;

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use popvote_core::meanfield::DEFAULT_DT;
use popvote_core::rng::{child_seed, rng_from_seed};
use popvote_core::TopologyKind;

use crate::config::{ConfigFile, ExperimentSpec};
use crate::meanfield::{MeanfieldJob, Which};
use crate::output::{fmt_g, sink};

const THREADS_VAR: &str = "POPVOTE_THREADS";

#[derive(Parser)]
#[command(name = "popvote", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep of replicated simulations and write per-cell and summary CSVs.
    Run(RunArgs),
    /// Emit mean-field curves, completion-time bounds or the phase-2 drift grid.
    Meanfield(MeanfieldArgs),
    /// Compare a simulated series against a mean-field bound.
    Overlay(OverlayArgs),
    /// Write a topology as an edge list (`i j` per line).
    TopologyExport(ExportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory; overrides `[experiment] out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; overrides `[experiment] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Replicas per cell; overrides `[experiment] replicas`.
    #[arg(long)]
    replicas: Option<usize>,
    /// Exit nonzero if any replica failed to converge.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct MeanfieldArgs {
    #[arg(long, value_enum)]
    which: Which,
    /// Configuration file whose `[meanfield]` section supplies defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Neighbourhood size (degree) of the broadcast.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    rho2: Option<f64>,
    /// Defaults to `1 − rho2`.
    #[arg(long)]
    rho1: Option<f64>,
    /// End time; defaults to the matching completion-time bound.
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Output spacing in time units (a multiple of dt).
    #[arg(long)]
    sample: Option<f64>,
    /// Initial wrong-memory count for phase 2; defaults to n·rho1.
    #[arg(long)]
    z0: Option<f64>,
    /// Spacing of the drift grid over (m1, m2).
    #[arg(long)]
    grid_step: Option<usize>,
    /// Exit nonzero unless curves are non-increasing and drift is negative wherever m2 > m1 > 0.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct OverlayArgs {
    /// Simulated series: `time` plus `mean`[,`sem`] or `value`.
    sim: PathBuf,
    /// Bound curve: `time` plus `value` or `mean`.
    bound: PathBuf,
    /// Write the pointwise comparison here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit nonzero if the satisfied fraction falls below --min-fraction.
    #[arg(long)]
    check: bool,
    #[arg(long, default_value_t = overlay::DEFAULT_MIN_FRACTION)]
    min_fraction: f64,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    topology: TopologyKind,
    #[arg(long)]
    n: usize,
    /// Edge probability for `er`; defaults to 2 ln n / n.
    #[arg(long)]
    er_p: Option<f64>,
    /// Run seed; the graph matches the one a run with this seed uses.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| dispatch(cli.command)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| anyhow!("{THREADS_VAR} must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("cannot configure the thread pool")
}

/// `Ok(false)` means a `--check` failed.
fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Run(a) => cmd_run(a),
        Command::Meanfield(a) => cmd_meanfield(a),
        Command::Overlay(a) => cmd_overlay(a),
        Command::TopologyExport(a) => cmd_export(a),
    }
}

fn cmd_run(a: RunArgs) -> Result<bool> {
    let mut spec = ExperimentSpec::from_config(&ConfigFile::load(&a.spec)?)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if let Some(r) = a.replicas {
        spec.replicas = r;
    }
    let out = a
        .out
        .or_else(|| spec.out.clone())
        .ok_or_else(|| anyhow!("no output directory: pass --out or set [experiment] out"))?;
    let stdout = io::stdout();
    let report = run::run_experiment(&spec, &out, &mut stdout.lock())?;
    println!(
        "{} cells, {} runs, {} not converged; CSVs in {}",
        report.cells,
        report.runs,
        report.unconverged,
        out.display()
    );
    Ok(!a.check || report.unconverged == 0)
}

fn cmd_meanfield(a: MeanfieldArgs) -> Result<bool> {
    let cfg = match &a.spec {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let pick = |flag: Option<f64>, key: &str| -> Result<Option<f64>> {
        Ok(match flag {
            Some(v) => Some(v),
            None => cfg.get("meanfield", key)?,
        })
    };
    let n = match a.n {
        Some(v) => Some(v),
        None => cfg.get("meanfield", "n")?,
    };
    let d = match a.d {
        Some(v) => Some(v),
        None => cfg.get("meanfield", "d")?,
    };
    let grid_step = match a.grid_step {
        Some(v) => Some(v),
        None => cfg.get("meanfield", "grid_step")?,
    };
    let rho2 = pick(a.rho2, "rho2")?.ok_or_else(|| anyhow!("rho2 is required (--rho2 or [meanfield] rho2)"))?;
    let job = MeanfieldJob {
        which: a.which,
        n: n.ok_or_else(|| anyhow!("n is required (--n or [meanfield] n)"))?,
        d: d.ok_or_else(|| anyhow!("d is required (--d or [meanfield] d)"))?,
        rho1: pick(a.rho1, "rho1")?.unwrap_or(1.0 - rho2),
        rho2,
        t_end: pick(a.t_end, "t_end")?,
        dt: pick(a.dt, "dt")?.unwrap_or(DEFAULT_DT),
        sample: pick(a.sample, "sample")?,
        z0: pick(a.z0, "z0")?,
        grid_step: grid_step.unwrap_or(1),
    };
    let check = meanfield::run_meanfield(&job, &mut sink(a.out.as_deref())?)?;
    if a.check && check.failures > 0 {
        eprintln!("check failed: {} of {} rows", check.failures, check.rows);
        return Ok(false);
    }
    Ok(true)
}

fn cmd_overlay(a: OverlayArgs) -> Result<bool> {
    if !(0.0..=1.0).contains(&a.min_fraction) {
        bail!("--min-fraction must lie in [0, 1]");
    }
    let sim = overlay::Series::load(&a.sim)?;
    let bound = overlay::Series::load(&a.bound)?;
    let report = overlay::compare(&sim, &bound);
    if let Some(p) = &a.out {
        overlay::write_points(p, &report)?;
    }
    let mut w = output::csv_writer(io::stdout().lock());
    w.write_record(["points", "satisfied", "fraction", "max_violation"])?;
    w.write_record([
        report.points.len().to_string(),
        report.satisfied.to_string(),
        fmt_g(report.fraction()),
        fmt_g(report.max_violation),
    ])?;
    w.flush()?;
    Ok(!a.check || report.fraction() >= a.min_fraction)
}

fn cmd_export(a: ExportArgs) -> Result<bool> {
    let spec = a.topology.with_agents(a.n, a.er_p)?;
    let g = spec.build(&mut rng_from_seed(child_seed(a.seed, 0)))?;
    let mut out = sink(a.out.as_deref())?;
    g.write_edge_list(&mut out)?;
    out.flush()?;
    if let Some(p) = a.out.as_deref().map(Path::display) {
        eprintln!("{} vertices, {} edges -> {p}", g.n(), g.edge_count());
    }
    Ok(true)
}
