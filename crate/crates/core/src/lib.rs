//! Multi-choice majority voting in pairwise and broadcasting population protocols.
//!
//! * [`protocol`]: the union/intersection pairwise rule, broadcast consolidation
//!   and the two accelerated memory rules.
//! * [`monitor`]: chain stability, the Lyapunov function `nK² − Σ|v_i|²` and the
//!   binary group census.
//! * [`topology`]: torus mesh, grid, complete and connected Erdős–Rényi graphs.
//! * [`engine`]: the random-initiator scheduler, run metrics and replicated runs
//!   (parallel across replicas with the default `parallel` feature).
//! * [`meanfield`]: the phase-1/phase-2 ODE bounds, closed forms and the exact
//!   phase-2 drift of the accelerated memory rule.

// `!(x > 0.0)` style guards are how NaN gets rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod choice;
pub mod engine;
pub mod error;
pub mod meanfield;
pub mod monitor;
pub mod protocol;
pub mod rng;
pub mod stats;
pub mod topology;

pub use choice::{AgentState, Choice, ChoiceSet, Configuration, MAX_CHOICES};
pub use engine::{
    replicate, replicate_with, run, ExecMode, InitialVotes, ReplicaSummary, RunConfig, RunMetrics, RunOutcome, Series,
    SeriesStats, Simulation,
};
pub use error::{Error, Result};
pub use monitor::{census, is_stable, lyapunov_v, GroupCensus};
pub use protocol::Protocol;
pub use stats::Stats;
pub use topology::{Topology, TopologyKind, TopologySpec};
