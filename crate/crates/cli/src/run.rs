use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use popvote_core::{replicate, ReplicaSummary, Series, SeriesStats, Stats};

use crate::config::{fractions_label, Cell, ExperimentSpec};
use crate::output::{cell, create_csv, fmt_g, opt_cell};

pub const RUN_HEADER: [&str; 7] = [
    "seed",
    "interactions",
    "runtime",
    "messages",
    "phase1_end_runtime",
    "phase2_runtime",
    "converged",
];

pub const SUMMARY_HEADER: [&str; 20] = [
    "cell",
    "protocol",
    "topology",
    "n",
    "fractions",
    "replicas",
    "converged",
    "truncated",
    "runtime_mean",
    "runtime_std",
    "messages_mean",
    "messages_std",
    "phase1_runtime_mean",
    "phase1_runtime_std",
    "phase2_runtime_mean",
    "phase2_runtime_std",
    "phase1_messages_mean",
    "phase1_messages_std",
    "phase2_messages_mean",
    "phase2_messages_std",
];

/// Totals across the sweep, used by `--check`.
#[derive(Debug, Default)]
pub struct RunReport {
    pub cells: usize,
    pub runs: usize,
    pub unconverged: usize,
}

pub fn run_experiment(spec: &ExperimentSpec, out: &Path, table: &mut dyn Write) -> Result<RunReport> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let cells = spec.cells()?;
    let mut summary = create_csv(&out.join("summary.csv"))?;
    summary.write_record(SUMMARY_HEADER)?;
    writeln!(
        table,
        "{:<36} {:>8} {:>12} {:>12} {:>14} {:>9}",
        "cell", "replicas", "runtime", "runtime_sd", "messages", "converged"
    )?;

    let mut report = RunReport::default();
    for c in &cells {
        let result = replicate(&c.config, spec.replicas).with_context(|| format!("cell {}", c.name))?;
        write_cell(out, c, &result)?;
        if spec.trajectory {
            write_series(
                &out.join(format!("{}.singletons.csv", c.name)),
                &result.series(Series::MinoritySingletons),
            )?;
            write_series(
                &out.join(format!("{}.memories.csv", c.name)),
                &result.series(Series::WrongMemories),
            )?;
            write_series(
                &out.join(format!("{}.phase2.csv", c.name)),
                &result.series(Series::Phase2WrongMemories),
            )?;
        }
        let converged = result.runs.iter().filter(|r| r.metrics.converged()).count();
        summary.write_record(summary_row(c, &result, converged))?;
        writeln!(
            table,
            "{:<36} {:>8} {:>12} {:>12} {:>14} {:>9}",
            c.name,
            spec.replicas,
            fmt_g(round_for_table(result.runtime.mean)),
            fmt_g(round_for_table(result.runtime.std)),
            fmt_g(round_for_table(result.messages.mean)),
            format!("{converged}/{}", spec.replicas),
        )?;
        report.cells += 1;
        report.runs += result.runs.len();
        report.unconverged += result.runs.len() - converged;
    }
    summary.flush()?;
    Ok(report)
}

fn round_for_table(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn write_cell(out: &Path, c: &Cell, result: &ReplicaSummary) -> Result<()> {
    let mut w = create_csv(&out.join(format!("{}.csv", c.name)))?;
    w.write_record(RUN_HEADER)?;
    for r in &result.runs {
        let m = &r.metrics;
        w.write_record([
            r.seed.to_string(),
            m.interactions.to_string(),
            cell(m.runtime),
            m.messages.to_string(),
            opt_cell(m.phase1_runtime()),
            opt_cell(m.phase2_runtime()),
            m.converged().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn summary_row(c: &Cell, r: &ReplicaSummary, converged: usize) -> Vec<String> {
    let mut row = vec![
        c.name.clone(),
        c.protocol.name().to_string(),
        c.topology.name().to_string(),
        c.n.to_string(),
        fractions_label(&c.fractions),
        r.runs.len().to_string(),
        converged.to_string(),
        r.truncated.to_string(),
    ];
    for s in [
        &r.runtime,
        &r.messages,
        &r.phase1_runtime,
        &r.phase2_runtime,
        &r.phase1_messages,
        &r.phase2_messages,
    ] {
        row.extend(mean_std(s));
    }
    row
}

fn mean_std(s: &Stats) -> [String; 2] {
    [cell(s.mean), cell(s.std)]
}

/// `time,mean,sem` series file.
pub fn write_series(path: &Path, s: &SeriesStats) -> Result<()> {
    let mut w = create_csv(path)?;
    w.write_record(["time", "mean", "sem"])?;
    for i in 0..s.time.len() {
        w.write_record([cell(s.time[i]), cell(s.mean[i]), cell(s.sem[i])])?;
    }
    w.flush()?;
    Ok(())
}
