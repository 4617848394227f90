use std::io::Write;

use anyhow::{bail, Result};
use popvote_core::meanfield::{self as mf, MeanFieldParams, Trajectory};
use popvote_core::GroupCensus;

use crate::output::{cell, csv_writer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Which {
    Phase1,
    Phase2,
    Bounds,
    Drift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanfieldJob {
    pub which: Which,
    pub n: usize,
    pub d: usize,
    pub rho1: f64,
    pub rho2: f64,
    /// Defaults to the matching completion-time bound.
    pub t_end: Option<f64>,
    pub dt: f64,
    /// Output spacing in time units; defaults to every integration step.
    pub sample: Option<f64>,
    /// Initial wrong-memory count for phase 2; defaults to `n·ρ1`.
    pub z0: Option<f64>,
    pub grid_step: usize,
}

impl MeanfieldJob {
    pub fn params(&self) -> Result<MeanFieldParams> {
        Ok(MeanFieldParams::new(
            self.n as f64,
            self.d as f64,
            self.rho1,
            self.rho2,
        )?)
    }
}

/// Outcome of the optional self-check.
#[derive(Debug, Default)]
pub struct CurveCheck {
    pub rows: usize,
    pub failures: usize,
}

pub fn run_meanfield(job: &MeanfieldJob, out: &mut dyn Write) -> Result<CurveCheck> {
    let p = job.params()?;
    let mut w = csv_writer(out);
    let mut check = CurveCheck::default();
    match job.which {
        Which::Phase1 | Which::Phase2 => {
            let traj = if job.which == Which::Phase1 {
                let t_end = match job.t_end {
                    Some(t) => t,
                    None => mf::t_c1_bound(&p)?,
                };
                mf::phase1_ode(&p, t_end, job.dt)?
            } else {
                let t_end = match job.t_end {
                    Some(t) => t,
                    None => mf::t_c2_bound(&p)?,
                };
                mf::phase2_ode(&p, job.z0.unwrap_or_else(|| p.x0()), t_end, job.dt)?
            };
            w.write_record(["time", "value"])?;
            let points = sampled(&traj, job.sample)?;
            for (i, &(t, v)) in points.iter().enumerate() {
                w.write_record([cell(t), cell(v)])?;
                // both curves are non-increasing and non-negative
                check.rows += 1;
                if v < 0.0 || (i > 0 && v > points[i - 1].1) {
                    check.failures += 1;
                }
            }
        }
        Which::Bounds => {
            w.write_record(["n", "d", "rho1", "rho2", "t_c1", "t_c2"])?;
            w.write_record([
                job.n.to_string(),
                job.d.to_string(),
                cell(job.rho1),
                cell(job.rho2),
                cell(mf::t_c1_bound(&p)?),
                cell(mf::t_c2_bound(&p)?),
            ])?;
            check.rows = 1;
        }
        Which::Drift => {
            if job.grid_step == 0 {
                bail!("grid_step must be at least 1");
            }
            w.write_record(["m1", "m2", "v2", "drift"])?;
            for m1 in (0..=job.n).step_by(job.grid_step) {
                for m2 in (0..=job.n - m1).step_by(job.grid_step) {
                    let census = GroupCensus {
                        v1: 0,
                        v2: job.n - m1 - m2,
                        m1,
                        m2,
                    };
                    let drift = mf::expected_m1_drift(&census, job.n, job.d)?;
                    w.write_record([m1.to_string(), m2.to_string(), census.v2.to_string(), cell(drift)])?;
                    if m2 > m1 && m1 > 0 {
                        check.rows += 1;
                        check.failures += usize::from(!(drift < 0.0));
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(check)
}

/// Every `sample` time units (must be a whole number of steps), always keeping the endpoint.
fn sampled(traj: &Trajectory, sample: Option<f64>) -> Result<Vec<(f64, f64)>> {
    let Some(s) = sample else {
        return Ok(traj.points.clone());
    };
    let stride = (s / traj.dt).round();
    if !(stride >= 1.0) || ((stride * traj.dt - s).abs() > 1e-9 * s.max(1.0)) {
        bail!("sample spacing {s} is not a positive multiple of dt = {}", traj.dt);
    }
    let stride = stride as usize;
    let mut out: Vec<(f64, f64)> = traj.points.iter().copied().step_by(stride).collect();
    let last = *traj.points.last().expect("non-empty trajectory");
    if out.last() != Some(&last) {
        out.push(last);
    }
    Ok(out)
}
