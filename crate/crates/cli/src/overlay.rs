//! Pointwise comparison of a simulated series against a mean-field bound.
//!
//! A point satisfies the bound when `mean − 2·sem ≤ bound(t)`, with the bound
//! linearly interpolated at the simulated time. Either file may carry a `value`
//! column or `mean` (plus optional `sem`) columns next to `time`.

use std::io::Read;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use popvote_core::meanfield::Trajectory;

use crate::output::{cell, create_csv};

/// Relative slack absorbing floating-point noise in exact ties.
const TIE_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MIN_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub time: Vec<f64>,
    pub value: Vec<f64>,
    pub sem: Vec<f64>,
}

impl Series {
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        Self::from_reader(file).with_context(|| format!("in {}", path.display()))
    }

    pub fn from_reader(input: impl Read) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let time = col("time").ok_or_else(|| anyhow!("schema mismatch: no `time` column"))?;
        let value = col("value")
            .or_else(|| col("mean"))
            .ok_or_else(|| anyhow!("schema mismatch: need a `value` or `mean` column"))?;
        let sem = col("sem");

        let mut s = Series {
            time: Vec::new(),
            value: Vec::new(),
            sem: Vec::new(),
        };
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let num = |c: usize| -> Result<f64> {
                let field = rec.get(c).unwrap_or("").trim();
                field
                    .parse::<f64>()
                    .map_err(|_| anyhow!("row {}: `{field}` is not a number", i + 2))
            };
            s.time.push(num(time)?);
            s.value.push(num(value)?);
            s.sem.push(match sem {
                Some(c) => num(c)?,
                None => 0.0,
            });
        }
        if s.time.is_empty() {
            bail!("no data rows");
        }
        if s.time.windows(2).any(|w| !(w[0] < w[1])) {
            bail!("`time` must be strictly increasing");
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayPoint {
    pub time: f64,
    pub mean: f64,
    pub sem: f64,
    pub bound: f64,
    /// Positive part of `mean − 2·sem − bound`.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayReport {
    pub points: Vec<OverlayPoint>,
    pub satisfied: usize,
    pub max_violation: f64,
}

impl OverlayReport {
    pub fn fraction(&self) -> f64 {
        self.satisfied as f64 / self.points.len() as f64
    }
}

pub fn compare(sim: &Series, bound: &Series) -> OverlayReport {
    let curve = Trajectory {
        dt: f64::NAN,
        points: bound.time.iter().copied().zip(bound.value.iter().copied()).collect(),
    };
    let mut points = Vec::with_capacity(sim.time.len());
    let (mut satisfied, mut max_violation) = (0, 0.0f64);
    for i in 0..sim.time.len() {
        let b = curve.value_at(sim.time[i]);
        let excess = sim.value[i] - 2.0 * sim.sem[i] - b;
        let ok = excess <= TIE_TOLERANCE * b.abs().max(1.0);
        let violation = if ok { 0.0 } else { excess };
        satisfied += usize::from(ok);
        max_violation = max_violation.max(violation);
        points.push(OverlayPoint {
            time: sim.time[i],
            mean: sim.value[i],
            sem: sim.sem[i],
            bound: b,
            violation,
        });
    }
    OverlayReport {
        points,
        satisfied,
        max_violation,
    }
}

pub fn write_points(path: &Path, report: &OverlayReport) -> Result<()> {
    let mut w = create_csv(path)?;
    w.write_record(["time", "mean", "sem", "bound", "violation"])?;
    for p in &report.points {
        w.write_record([
            cell(p.time),
            cell(p.mean),
            cell(p.sem),
            cell(p.bound),
            cell(p.violation),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(text: &str) -> Series {
        Series::from_reader(text.as_bytes()).unwrap()
    }

    #[test]
    fn identical_curves_never_violate() {
        let s = series("time,value\n0,30\n1,12.5\n2,3\n");
        let r = compare(&s, &s);
        assert_eq!(r.satisfied, 3);
        assert_eq!(r.max_violation, 0.0);
    }

    #[test]
    fn interpolates_and_uses_two_sem() {
        let bound = series("time,value\n0,10\n2,0\n");
        let sim = series("time,mean,sem\n0,10,0\n1,6,0.5\n2,1,0.4\n");
        let r = compare(&sim, &bound);
        assert_eq!(r.points[1].bound, 5.0);
        assert_eq!(r.satisfied, 2);
        assert!((r.max_violation - 0.2).abs() < 1e-12);
        assert!((r.fraction() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn schema_errors() {
        let err = |t: &str| format!("{:#}", Series::from_reader(t.as_bytes()).unwrap_err());
        assert!(err("t,value\n0,1\n").contains("time"));
        assert!(err("time,x\n0,1\n").contains("`value` or `mean`"));
        assert!(err("time,value\n").contains("no data"));
        assert!(err("time,value\n0,a\n").contains("row 2"));
        assert!(err("time,value\n1,1\n0,1\n").contains("increasing"));
    }
}
