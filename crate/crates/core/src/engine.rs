//! Discrete-event driver for the voting protocols.
//!
//! Rate-one Poisson clocks are realised as a uniformly random initiator per
//! interaction with simulated time advancing by exactly `1/n`. The run ends when
//! the configuration is stable and every memory holds the true majority, which is
//! absorbing for all four protocols, or at the interaction cap.
//!
//! Randomness per run: the run seed expands via [`child_seed`] into stream 0
//! (topology), stream 1 (vote placement) and stream 2 (dynamics). Each
//! interaction draws one initiator index, then one neighbour index (pairwise) or
//! `d` shuffle draws (broadcast).

use std::collections::HashMap;

use crate::choice::{AgentState, Choice, ChoiceSet, Configuration, MAX_CHOICES};
use crate::error::{Error, Result};
use crate::monitor::{census, is_stable, GroupCensus};
use crate::protocol::{broadcast_step, dmvr_pairwise_step, Protocol};
use crate::rng::{child_seed, draw_index, rng_from_seed, shuffle, SimRng};
use crate::stats::Stats;
use crate::topology::{Topology, TopologySpec};

/// Initial votes: either one choice per agent, or fractions ρ_k rounded to counts.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialVotes {
    Explicit(Vec<Choice>),
    Fractions(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub topology: TopologySpec,
    /// Number of choices K.
    pub k: usize,
    pub votes: InitialVotes,
    pub seed: u64,
    /// Defaults to `10^4 · n · K`.
    pub max_interactions: Option<u64>,
    /// Sample the group trajectories once per time unit.
    pub record_trajectory: bool,
}

impl RunConfig {
    /// Binary vote with `ρ2` the fraction voting `c2`.
    pub fn binary(protocol: Protocol, topology: TopologySpec, rho2: f64, seed: u64) -> Self {
        RunConfig {
            protocol,
            topology,
            k: 2,
            votes: InitialVotes::Fractions(vec![1.0 - rho2, rho2]),
            seed,
            max_interactions: None,
            record_trajectory: false,
        }
    }

    pub fn with_trajectory(mut self) -> Self {
        self.record_trajectory = true;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn agent_count(&self) -> usize {
        self.topology.agent_count()
    }

    pub fn interaction_cap(&self) -> u64 {
        self.max_interactions
            .unwrap_or(10_000 * self.agent_count() as u64 * self.k as u64)
    }

    /// Number of agents initially voting each choice.
    pub fn vote_counts(&self) -> Result<Vec<usize>> {
        let n = self.agent_count();
        if self.k == 0 || self.k > MAX_CHOICES {
            return Err(Error::invalid(
                "K",
                format!("must be in 1..={MAX_CHOICES}, got {}", self.k),
            ));
        }
        let counts = match &self.votes {
            InitialVotes::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::invalid("votes", format!("{} votes for {n} agents", v.len())));
                }
                let mut counts = vec![0; self.k];
                for c in v {
                    if c.index() >= self.k {
                        return Err(Error::invalid("votes", format!("{c} exceeds K = {}", self.k)));
                    }
                    counts[c.index()] += 1;
                }
                counts
            }
            InitialVotes::Fractions(rho) => fractions_to_counts(rho, self.k, n)?,
        };
        majority_of(&counts)?;
        Ok(counts)
    }

    pub fn majority(&self) -> Result<Choice> {
        majority_of(&self.vote_counts()?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agent_count() < 2 {
            return Err(Error::invalid("n", "at least two agents are required"));
        }
        self.vote_counts().map(|_| ())
    }
}

/// Largest-remainder rounding of `n · ρ_k`.
fn fractions_to_counts(rho: &[f64], k: usize, n: usize) -> Result<Vec<usize>> {
    if rho.len() != k {
        return Err(Error::invalid(
            "fractions",
            format!("{} fractions for K = {k}", rho.len()),
        ));
    }
    if rho.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::invalid("fractions", "each fraction must lie in [0, 1]"));
    }
    let sum: f64 = rho.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("fractions", format!("sum to {sum}, not 1")));
    }
    let exact: Vec<f64> = rho.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| (x + 1e-9).floor() as usize).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    Ok(counts)
}

fn majority_of(counts: &[usize]) -> Result<Choice> {
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut winners = counts.iter().enumerate().filter(|(_, &c)| c == max);
    match (winners.next(), winners.next()) {
        (Some((i, _)), None) if max > 0 => Ok(Choice::from_index(i)),
        _ => Err(Error::invalid(
            "votes",
            format!("no unique majority in counts {counts:?}"),
        )),
    }
}

/// One sample of the group counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryPoint {
    pub interactions: u64,
    /// Agents whose value set is a singleton of a non-majority choice.
    pub minority_singletons: usize,
    /// Agents whose memory differs from the majority.
    pub wrong_memories: usize,
    /// Present only for K = 2.
    pub census: Option<GroupCensus>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub n: usize,
    pub interactions: u64,
    /// `interactions / n`.
    pub runtime: f64,
    pub messages: u64,
    /// First interaction index after which the configuration is stable with no
    /// minority singleton.
    pub phase1_end: Option<u64>,
    pub messages_at_phase1_end: Option<u64>,
    /// Interaction index at which the run converged.
    pub converged_at: Option<u64>,
    pub truncated: bool,
    /// Samples every `n` interactions from the start (when recorded).
    pub trajectory: Vec<TrajectoryPoint>,
    /// Samples every `n` interactions from the end of phase 1 (when recorded).
    pub phase2_trajectory: Vec<TrajectoryPoint>,
    /// State counts when the run stopped.
    pub final_point: TrajectoryPoint,
}

impl RunMetrics {
    pub fn converged(&self) -> bool {
        self.converged_at.is_some()
    }

    pub fn phase1_runtime(&self) -> Option<f64> {
        self.phase1_end.map(|i| i as f64 / self.n as f64)
    }

    pub fn phase2_runtime(&self) -> Option<f64> {
        match (self.phase1_end, self.converged_at) {
            (Some(p), Some(c)) => Some((c - p) as f64 / self.n as f64),
            _ => None,
        }
    }

    pub fn phase2_messages(&self) -> Option<u64> {
        match (self.messages_at_phase1_end, self.converged_at) {
            (Some(m), Some(_)) => Some(self.messages - m),
            _ => None,
        }
    }
}

/// What a single [`Simulation::step`] did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interaction {
    pub initiator: usize,
    /// Number of agents whose state was updated (2 for pairwise, `d + 1` for broadcast).
    pub participants: usize,
    pub messages: u64,
    pub values_changed: bool,
}

/// A single run in progress.
#[derive(Debug, Clone)]
pub struct Simulation {
    protocol: Protocol,
    topology: Topology,
    config: Configuration,
    majority: Choice,
    rng: SimRng,
    interactions: u64,
    messages: u64,
    phase1_end: Option<u64>,
    messages_at_phase1_end: Option<u64>,
    wrong_memories: usize,
    minority_singletons: usize,
    /// Multiplicity of each distinct value set; maintained until phase 1 ends.
    set_counts: HashMap<ChoiceSet, usize>,
    participants: Vec<usize>,
    scratch: Vec<AgentState>,
}

impl Simulation {
    pub fn new(run: &RunConfig) -> Result<Self> {
        run.validate()?;
        let counts = run.vote_counts()?;
        let majority = majority_of(&counts)?;
        let topology = run.topology.build(&mut rng_from_seed(child_seed(run.seed, 0)))?;
        let votes = match &run.votes {
            InitialVotes::Explicit(v) => v.clone(),
            InitialVotes::Fractions(_) => {
                let mut v: Vec<Choice> = counts
                    .iter()
                    .enumerate()
                    .flat_map(|(i, &c)| std::iter::repeat_n(Choice::from_index(i), c))
                    .collect();
                shuffle(&mut v, &mut rng_from_seed(child_seed(run.seed, 1)));
                v
            }
        };
        let config = Configuration::from_votes(run.k, &votes)?;
        Self::from_parts(
            run.protocol,
            topology,
            config,
            majority,
            rng_from_seed(child_seed(run.seed, 2)),
        )
    }

    /// Starts from an arbitrary configuration with `majority` as the reference answer.
    pub fn from_parts(
        protocol: Protocol,
        topology: Topology,
        config: Configuration,
        majority: Choice,
        rng: SimRng,
    ) -> Result<Self> {
        if topology.n() != config.len() {
            return Err(Error::invalid(
                "configuration",
                format!("{} agents on a {}-vertex topology", config.len(), topology.n()),
            ));
        }
        if majority.index() >= config.k() {
            return Err(Error::invalid(
                "majority",
                format!("{majority} exceeds K = {}", config.k()),
            ));
        }
        let mut set_counts = HashMap::new();
        for v in config.values() {
            *set_counts.entry(v).or_insert(0) += 1;
        }
        let mut sim = Simulation {
            protocol,
            topology,
            majority,
            rng,
            interactions: 0,
            messages: 0,
            phase1_end: None,
            messages_at_phase1_end: None,
            wrong_memories: 0,
            minority_singletons: 0,
            set_counts,
            participants: Vec::new(),
            scratch: Vec::new(),
            config,
        };
        for i in 0..sim.config.len() {
            let (s, w) = sim.contribution(sim.config.agents()[i]);
            sim.minority_singletons += s;
            sim.wrong_memories += w;
        }
        sim.check_phase1();
        Ok(sim)
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn configuration(&self) -> &Configuration {
        &self.config
    }

    pub fn majority(&self) -> Choice {
        self.majority
    }

    pub fn interactions(&self) -> u64 {
        self.interactions
    }

    pub fn messages(&self) -> u64 {
        self.messages
    }

    pub fn phase1_end(&self) -> Option<u64> {
        self.phase1_end
    }

    pub fn wrong_memories(&self) -> usize {
        self.wrong_memories
    }

    pub fn minority_singletons(&self) -> usize {
        self.minority_singletons
    }

    /// Stable, and every memory holds the majority.
    pub fn is_converged(&self) -> bool {
        self.phase1_end.is_some() && self.wrong_memories == 0
    }

    pub fn sample(&self) -> TrajectoryPoint {
        TrajectoryPoint {
            interactions: self.interactions,
            minority_singletons: self.minority_singletons,
            wrong_memories: self.wrong_memories,
            census: census(&self.config).ok(),
        }
    }

    fn contribution(&self, a: AgentState) -> (usize, usize) {
        let minority_singleton = matches!(a.value.as_singleton(), Some(c) if c != self.majority);
        (minority_singleton as usize, (a.memory != self.majority) as usize)
    }

    fn check_phase1(&mut self) {
        if self.phase1_end.is_none() && self.minority_singletons == 0 && is_stable(self.set_counts.keys().copied()) {
            self.phase1_end = Some(self.interactions);
            self.messages_at_phase1_end = Some(self.messages);
            self.set_counts = HashMap::new();
        }
    }

    fn replace(&mut self, i: usize, next: AgentState) {
        let prev = self.config.agents()[i];
        if prev == next {
            return;
        }
        let (s0, w0) = self.contribution(prev);
        let (s1, w1) = self.contribution(next);
        self.minority_singletons = self.minority_singletons - s0 + s1;
        self.wrong_memories = self.wrong_memories - w0 + w1;
        if self.phase1_end.is_none() && prev.value != next.value {
            let slot = self.set_counts.get_mut(&prev.value).expect("tracked value set");
            *slot -= 1;
            if *slot == 0 {
                self.set_counts.remove(&prev.value);
            }
            *self.set_counts.entry(next.value).or_insert(0) += 1;
        }
        self.config.agents_mut()[i] = next;
    }

    /// Performs one interaction.
    pub fn step(&mut self) -> Interaction {
        let n = self.config.len();
        let initiator = draw_index(&mut self.rng, n);
        let degree = self.topology.degree(initiator);

        let (participants, messages, values_changed) = if self.protocol.is_broadcast() {
            self.participants.clear();
            self.participants.push(initiator);
            self.participants.extend_from_slice(self.topology.neighbors(initiator));
            self.scratch.clear();
            self.scratch
                .extend(self.participants.iter().map(|&j| self.config.agents()[j]));
            let changed = broadcast_step(self.protocol, &mut self.scratch, &mut self.rng);
            for idx in 0..self.participants.len() {
                let (j, s) = (self.participants[idx], self.scratch[idx]);
                self.replace(j, s);
            }
            (degree + 1, degree as u64 + 2, changed)
        } else if degree == 0 {
            (1, 0, false)
        } else {
            let j = self.topology.neighbors(initiator)[draw_index(&mut self.rng, degree)];
            let (a, b) = (self.config.agents()[initiator], self.config.agents()[j]);
            let (na, nb) = dmvr_pairwise_step(a, b);
            let changed = na.value != a.value || nb.value != b.value;
            self.replace(initiator, na);
            self.replace(j, nb);
            (2, 2, changed)
        };

        self.interactions += 1;
        self.messages += messages;
        if values_changed {
            self.check_phase1();
        }
        Interaction {
            initiator,
            participants,
            messages,
            values_changed,
        }
    }
}

/// Metrics plus the final configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub metrics: RunMetrics,
    pub final_config: Configuration,
}

/// Runs one simulation until convergence or the interaction cap.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let mut sim = Simulation::new(config)?;
    let cap = config.interaction_cap();
    let n = sim.configuration().len() as u64;
    let record = config.record_trajectory;
    let mut trajectory = Vec::new();
    let mut phase2 = Vec::new();
    if record {
        trajectory.push(sim.sample());
        if sim.phase1_end().is_some() {
            phase2.push(sim.sample());
        }
    }
    while !sim.is_converged() && sim.interactions() < cap {
        let had_phase1 = sim.phase1_end().is_some();
        sim.step();
        if record {
            if sim.interactions() % n == 0 {
                trajectory.push(sim.sample());
            }
            if let Some(p) = sim.phase1_end() {
                if !had_phase1 || (sim.interactions() - p) % n == 0 {
                    phase2.push(sim.sample());
                }
            }
        }
    }
    let converged_at = sim.is_converged().then(|| sim.interactions());
    let final_point = sim.sample();
    let metrics = RunMetrics {
        n: n as usize,
        interactions: sim.interactions(),
        runtime: sim.interactions() as f64 / n as f64,
        messages: sim.messages(),
        phase1_end: sim.phase1_end,
        messages_at_phase1_end: sim.messages_at_phase1_end,
        converged_at,
        truncated: converged_at.is_none(),
        trajectory,
        phase2_trajectory: phase2,
        final_point,
    };
    Ok(RunOutcome {
        metrics,
        final_config: sim.config,
    })
}

/// How independent replicas are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    /// Uses the rayon pool; identical to `Sequential` without the `parallel` feature.
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaRun {
    pub seed: u64,
    pub metrics: RunMetrics,
}

/// Aggregate of independent replicas, in replica order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaSummary {
    pub runs: Vec<ReplicaRun>,
    pub runtime: Stats,
    pub messages: Stats,
    /// Over runs that reached the end of phase 1.
    pub phase1_runtime: Stats,
    /// Over converged runs.
    pub phase2_runtime: Stats,
    pub phase1_messages: Stats,
    pub phase2_messages: Stats,
    pub truncated: usize,
}

impl ReplicaSummary {
    pub fn from_runs(runs: Vec<ReplicaRun>) -> Self {
        let collect =
            |f: &dyn Fn(&RunMetrics) -> Option<f64>| Stats::from_samples(runs.iter().filter_map(|r| f(&r.metrics)));
        ReplicaSummary {
            runtime: collect(&|m| Some(m.runtime)),
            messages: collect(&|m| Some(m.messages as f64)),
            phase1_runtime: collect(&|m| m.phase1_runtime()),
            phase2_runtime: collect(&|m| m.phase2_runtime()),
            phase1_messages: collect(&|m| m.messages_at_phase1_end.map(|x| x as f64)),
            phase2_messages: collect(&|m| m.phase2_messages().map(|x| x as f64)),
            truncated: runs.iter().filter(|r| r.metrics.truncated).count(),
            runs,
        }
    }

    /// Per-time-unit mean of a sampled series across replicas. Runs that stopped
    /// earlier contribute their final state, which is absorbing once converged.
    pub fn series(&self, series: Series) -> SeriesStats {
        let traces: Vec<(&[TrajectoryPoint], &TrajectoryPoint)> = self
            .runs
            .iter()
            .map(|r| {
                let t = match series {
                    Series::Phase2WrongMemories => r.metrics.phase2_trajectory.as_slice(),
                    _ => r.metrics.trajectory.as_slice(),
                };
                (t, &r.metrics.final_point)
            })
            .filter(|(t, _)| !t.is_empty())
            .collect();
        let len = traces.iter().map(|(t, _)| t.len()).max().unwrap_or(0);
        let mut out = SeriesStats::default();
        for step in 0..len {
            let stats = Stats::from_samples(traces.iter().map(|(t, last)| {
                let p = t.get(step).unwrap_or(last);
                match series {
                    Series::MinoritySingletons => p.minority_singletons as f64,
                    Series::WrongMemories | Series::Phase2WrongMemories => p.wrong_memories as f64,
                }
            }));
            out.time.push(step as f64);
            out.mean.push(stats.mean);
            out.sem.push(stats.sem());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    /// Minority singleton value sets, from the start of the run.
    MinoritySingletons,
    /// Wrong memories, from the start of the run.
    WrongMemories,
    /// Wrong memories, from the end of phase 1.
    Phase2WrongMemories,
}

/// Mean and standard error of a series at integer time units.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesStats {
    pub time: Vec<f64>,
    pub mean: Vec<f64>,
    pub sem: Vec<f64>,
}

/// Seed of replica `r`: the `r`-th SplitMix64 output of the base seed.
pub fn replica_seed(base: u64, replica: usize) -> u64 {
    child_seed(base, replica as u64)
}

pub fn replicate(config: &RunConfig, replicas: usize) -> Result<ReplicaSummary> {
    replicate_with(config, replicas, ExecMode::default())
}

pub fn replicate_with(config: &RunConfig, replicas: usize, mode: ExecMode) -> Result<ReplicaSummary> {
    if replicas == 0 {
        return Err(Error::invalid("replicas", "must be at least 1"));
    }
    config.validate()?;
    let one = |r: usize| -> Result<ReplicaRun> {
        let seed = replica_seed(config.seed, r);
        let outcome = run(&config.clone().with_seed(seed))?;
        Ok(ReplicaRun {
            seed,
            metrics: outcome.metrics,
        })
    };
    let runs: Result<Vec<ReplicaRun>> = match mode {
        ExecMode::Sequential => (0..replicas).map(one).collect(),
        ExecMode::Parallel => par_map(replicas, one),
    };
    Ok(ReplicaSummary::from_runs(runs?))
}

#[cfg(feature = "parallel")]
fn par_map<T: Send>(count: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Send>(count: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..count).map(f).collect()
}
