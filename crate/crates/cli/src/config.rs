//! Plain-text experiment configuration: `[section]` headers followed by
//! `key = value` lines. `#` starts a comment.
//!
//! ```text
//! [experiment]
//! seed = 7
//! replicas = 100
//! out = results/margin
//! trajectory = false
//!
//! [sweep]
//! protocols = pairwise, bdmv
//! topologies = mesh
//! n = 100
//! rho2 = 0.51:0.89:0.02
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use popvote_core::rng::child_seed;
use popvote_core::{InitialVotes, Protocol, RunConfig, TopologyKind};

use crate::output::fmt_g;

/// Default step of an `a:b` range.
pub const DEFAULT_RANGE_STEP: f64 = 0.02;

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "experiment",
        &["seed", "replicas", "out", "max_interactions", "trajectory"],
    ),
    ("sweep", &["protocols", "topologies", "n", "rho2", "fractions", "er_p"]),
    (
        "meanfield",
        &["n", "d", "rho1", "rho2", "t_end", "dt", "sample", "z0", "grid_step"],
    ),
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed key-value file, validated against the known sections and keys.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        text.parse().with_context(|| format!("in {}", path.display()))
    }

    /// Parses `section.key` if present, reporting the offending field on failure.
    pub fn get<T>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.get_with(section, key, |s| s.parse::<T>().map_err(|e| anyhow!("{e}")))
    }

    pub fn get_with<T>(&self, section: &str, key: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
        match self.sections.get(section).and_then(|s| s.get(key)) {
            None => Ok(None),
            Some(e) => parse(&e.value)
                .map(Some)
                .map_err(|err| anyhow!("[{section}] {key} (line {}): {err:#}", e.line)),
        }
    }
}

impl FromStr for ConfigFile {
    type Err = anyhow::Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = ConfigFile::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
                let name = name.trim().to_ascii_lowercase();
                if !SECTIONS.iter().any(|(s, _)| *s == name) {
                    bail!("line {line}: unknown section [{name}]");
                }
                cfg.sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| anyhow!("line {line}: expected `key = value` or `[section]`"))?;
            let key = key.trim().to_ascii_lowercase();
            let section = current
                .as_deref()
                .ok_or_else(|| anyhow!("line {line}: `{key}` appears before any [section]"))?;
            let known = SECTIONS
                .iter()
                .find(|(s, _)| *s == section)
                .map_or(&[][..], |(_, k)| *k);
            if !known.contains(&key.as_str()) {
                bail!("line {line}: unknown key `{key}` in [{section}]");
            }
            let entry = Entry {
                value: value.trim().to_string(),
                line,
            };
            if let Some(prev) = cfg.sections.get_mut(section).unwrap().insert(key.clone(), entry) {
                bail!("line {line}: `{key}` already set on line {}", prev.line);
            }
        }
        Ok(cfg)
    }
}

/// Comma-separated list.
pub fn parse_list<T>(s: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    let items: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().map_err(|e| anyhow!("`{x}`: {e}")))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        bail!("empty list");
    }
    Ok(items)
}

/// A list of floats, or an inclusive range `start:end[:step]`.
pub fn parse_float_axis(s: &str) -> Result<Vec<f64>> {
    if !s.contains(':') {
        return parse_list(s);
    }
    let parts: Vec<f64> = s
        .split(':')
        .map(|x| x.trim().parse::<f64>().map_err(|e| anyhow!("`{}`: {e}", x.trim())))
        .collect::<Result<_>>()?;
    let (start, end, step) = match parts[..] {
        [a, b] => (a, b, DEFAULT_RANGE_STEP),
        [a, b, c] => (a, b, c),
        _ => bail!("range must be start:end or start:end:step"),
    };
    if !(step > 0.0) || !(end >= start) || !step.is_finite() || !end.is_finite() {
        bail!("range needs start <= end and a positive step");
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    // round through the printed form so 0.51 + 3·0.02 is 0.57, not 0.5700000000000001
    Ok((0..count)
        .map(|i| fmt_g(start + i as f64 * step).parse().expect("formatted float"))
        .collect())
}

/// Vote fraction vectors separated by `;`, each a comma list, e.g. `0.2,0.3,0.5; 0.1,0.2,0.7`.
pub fn parse_fractions(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(parse_list::<f64>)
        .collect()
}

pub fn parse_bool(s: &str) -> Result<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => bail!("expected true or false, got `{other}`"),
    }
}

/// A sweep over protocols, topologies, sizes and initial vote splits.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub seed: u64,
    pub replicas: usize,
    pub out: Option<PathBuf>,
    pub protocols: Vec<Protocol>,
    pub topologies: Vec<TopologyKind>,
    pub sizes: Vec<usize>,
    /// One fraction vector per sweep value; binary sweeps hold `[1 − ρ2, ρ2]`.
    pub votes: Vec<Vec<f64>>,
    pub er_p: Option<f64>,
    pub max_interactions: Option<u64>,
    pub trajectory: bool,
}

/// One sweep cell: a run template plus naming.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub name: String,
    pub protocol: Protocol,
    pub topology: TopologyKind,
    pub n: usize,
    pub fractions: Vec<f64>,
    pub config: RunConfig,
}

impl ExperimentSpec {
    pub fn from_config(cfg: &ConfigFile) -> Result<Self> {
        let require = |key: &str| anyhow!("[sweep] {key}: missing");
        let rho2: Option<Vec<f64>> = cfg.get_with("sweep", "rho2", parse_float_axis)?;
        let fractions = cfg.get_with("sweep", "fractions", parse_fractions)?;
        let votes = match (rho2, fractions) {
            (Some(_), Some(_)) => bail!("[sweep] rho2 and fractions are mutually exclusive"),
            (Some(r), None) => r.into_iter().map(|r2| vec![1.0 - r2, r2]).collect(),
            (None, Some(f)) => f,
            (None, None) => return Err(require("rho2 (or fractions)")),
        };
        let spec = ExperimentSpec {
            seed: cfg.get("experiment", "seed")?.unwrap_or(0),
            replicas: cfg.get("experiment", "replicas")?.unwrap_or(1),
            out: cfg.get::<PathBuf>("experiment", "out")?,
            protocols: cfg
                .get_with("sweep", "protocols", parse_list)?
                .ok_or_else(|| require("protocols"))?,
            topologies: cfg
                .get_with("sweep", "topologies", parse_list)?
                .ok_or_else(|| require("topologies"))?,
            sizes: cfg.get_with("sweep", "n", parse_list)?.ok_or_else(|| require("n"))?,
            votes,
            er_p: cfg.get("sweep", "er_p")?,
            max_interactions: cfg.get("experiment", "max_interactions")?,
            trajectory: cfg.get_with("experiment", "trajectory", parse_bool)?.unwrap_or(false),
        };
        spec.cells()?;
        Ok(spec)
    }

    /// Expands the sweep. Cells sharing (n, topology, votes) share a seed, so
    /// protocols are compared on the same graphs and vote placements.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        if self.replicas == 0 {
            bail!("[experiment] replicas: must be at least 1");
        }
        if let Some(p) = self.er_p {
            if !(p > 0.0 && p <= 1.0) {
                bail!("[sweep] er_p: must lie in (0, 1], got {p}");
            }
        }
        let mut cells = Vec::new();
        let mut group = 0u64;
        for &n in &self.sizes {
            for &kind in &self.topologies {
                for fractions in &self.votes {
                    let seed = child_seed(self.seed, group);
                    group += 1;
                    let topology = kind.with_agents(n, self.er_p).map_err(|e| anyhow!("[sweep] n: {e}"))?;
                    for &protocol in &self.protocols {
                        let config = RunConfig {
                            protocol,
                            topology,
                            k: fractions.len(),
                            votes: InitialVotes::Fractions(fractions.clone()),
                            seed,
                            max_interactions: self.max_interactions,
                            record_trajectory: self.trajectory,
                        };
                        config
                            .validate()
                            .map_err(|e| anyhow!("[sweep] {}: {e}", vote_key(fractions)))?;
                        config
                            .vote_counts()
                            .map_err(|e| anyhow!("[sweep] {}: {e}", vote_key(fractions)))?;
                        cells.push(Cell {
                            name: cell_name(protocol, kind, n, fractions),
                            protocol,
                            topology: kind,
                            n,
                            fractions: fractions.clone(),
                            config,
                        });
                    }
                }
            }
        }
        Ok(cells)
    }
}

fn vote_key(fractions: &[f64]) -> &'static str {
    if fractions.len() == 2 {
        "rho2"
    } else {
        "fractions"
    }
}

fn cell_name(protocol: Protocol, topology: TopologyKind, n: usize, fractions: &[f64]) -> String {
    let votes = if fractions.len() == 2 {
        format!("rho{}", fmt_g(fractions[1]))
    } else {
        let parts: Vec<String> = fractions.iter().map(|f| fmt_g(*f)).collect();
        format!("f{}", parts.join("_"))
    };
    format!("{}-{}-n{n}-{votes}", protocol.name(), topology.name())
}

/// `;`-joined fractions for the summary table.
pub fn fractions_label(fractions: &[f64]) -> String {
    fractions.iter().map(|f| fmt_g(*f)).collect::<Vec<_>>().join(";")
}
