//! Transition rules of the four voting protocols.
//!
//! All rules are pure functions of their inputs plus an explicit RNG stream. The
//! broadcast rules consume exactly `d` draws for `d + 1` participants (one
//! Fisher–Yates shuffle of the assignment order); the pairwise rule draws nothing.

use std::fmt;
use std::str::FromStr;

use rand_core::RngCore;

use crate::choice::{AgentState, Choice, ChoiceSet, MAX_CHOICES};
use crate::error::{Error, Result};
use crate::rng::shuffle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    /// Union/intersection voting over random pairs.
    Pairwise,
    /// Broadcast consolidation with the singleton memory rule.
    Bdmv,
    /// Broadcast consolidation; memories follow the strict value plurality when one exists.
    Acc1,
    /// As `Acc1`, falling back to the strict memory plurality on a value tie.
    Acc2,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [Protocol::Pairwise, Protocol::Bdmv, Protocol::Acc1, Protocol::Acc2];

    pub fn is_broadcast(self) -> bool {
        !matches!(self, Protocol::Pairwise)
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Pairwise => "pairwise",
            Protocol::Bdmv => "bdmv",
            Protocol::Acc1 => "acc1",
            Protocol::Acc2 => "acc2",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pairwise" | "pairwise-dmvr" | "dmvr" => Ok(Protocol::Pairwise),
            "bdmv" | "b-dmv" => Ok(Protocol::Bdmv),
            "acc1" => Ok(Protocol::Acc1),
            "acc2" => Ok(Protocol::Acc2),
            other => Err(Error::invalid("protocol", format!("unknown protocol '{other}'"))),
        }
    }
}

/// One pairwise interaction between initiator `a` and responder `b`.
///
/// The side with the smaller value set takes the union, the initiator on a tie;
/// the other takes the intersection. A resulting singleton is copied into memory.
pub fn dmvr_pairwise_step(a: AgentState, b: AgentState) -> (AgentState, AgentState) {
    let union = a.value.union(b.value);
    let inter = a.value.intersection(b.value);
    let (va, vb) = if a.value.len() <= b.value.len() {
        (union, inter)
    } else {
        (inter, union)
    };
    (bdmv_memory_rule(va, a), bdmv_memory_rule(vb, b))
}

/// Consolidates `d + 1` value sets into a chain of `d + 1` sets.
///
/// Output set `u` holds every choice whose membership count exceeds `u`, so the
/// result is sorted by descending cardinality and each set contains the next.
pub fn consolidate_values(sets: &[ChoiceSet]) -> Result<Vec<ChoiceSet>> {
    if sets.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = vec![ChoiceSet::EMPTY; sets.len()];
    consolidate_into(sets, &mut out);
    Ok(out)
}

fn consolidate_into(sets: &[ChoiceSet], out: &mut [ChoiceSet]) {
    let mut counts = [0u32; MAX_CHOICES];
    let mut present = ChoiceSet::EMPTY;
    for s in sets {
        present = present.union(*s);
        for c in s.iter() {
            counts[c.index()] += 1;
        }
    }
    for slot in out.iter_mut() {
        let mut temp = ChoiceSet::EMPTY;
        for c in present.iter() {
            if counts[c.index()] > 0 {
                counts[c.index()] -= 1;
                temp.insert(c);
            }
        }
        *slot = temp;
    }
}

/// Assigns the produced sets to participants by a uniform random bijection.
///
/// The participant list is Fisher–Yates shuffled (`len - 1` draws) and output `u`
/// goes to the `u`-th shuffled participant.
pub fn assign_randomly<R: RngCore + ?Sized>(
    outputs: &[ChoiceSet],
    participants: &[usize],
    rng: &mut R,
) -> Result<Vec<(usize, ChoiceSet)>> {
    if outputs.len() != participants.len() {
        return Err(Error::SizeMismatch {
            outputs: outputs.len(),
            participants: participants.len(),
        });
    }
    let mut order = participants.to_vec();
    shuffle(&mut order, rng);
    Ok(order.into_iter().zip(outputs.iter().copied()).collect())
}

/// Installs `newset` as the value; memory follows it only when it is a singleton.
pub fn bdmv_memory_rule(newset: ChoiceSet, old: AgentState) -> AgentState {
    AgentState {
        value: newset,
        memory: newset.as_singleton().unwrap_or(old.memory),
    }
}

/// The unique choice occurring in strictly more of `sets` than any other choice.
pub fn cmax_of_values(sets: &[ChoiceSet]) -> Option<Choice> {
    let mut counts = [0u32; MAX_CHOICES];
    for s in sets {
        for c in s.iter() {
            counts[c.index()] += 1;
        }
    }
    strict_plurality(&counts)
}

/// The unique most frequent memory among the participants, if any.
pub fn memory_plurality(states: &[AgentState]) -> Option<Choice> {
    let mut counts = [0u32; MAX_CHOICES];
    for s in states {
        counts[s.memory.index()] += 1;
    }
    strict_plurality(&counts)
}

fn strict_plurality(counts: &[u32]) -> Option<Choice> {
    let mut best = 0u32;
    let mut arg = None;
    let mut tied = false;
    for (i, &n) in counts.iter().enumerate() {
        if n > best {
            best = n;
            arg = Some(i);
            tied = false;
        } else if n == best && n > 0 {
            tied = true;
        }
    }
    if tied {
        None
    } else {
        arg.map(Choice::from_index)
    }
}

pub fn bdmv_broadcast_step<R: RngCore + ?Sized>(states: &[AgentState], rng: &mut R) -> Vec<AgentState> {
    let mut out = states.to_vec();
    broadcast_step(Protocol::Bdmv, &mut out, rng);
    out
}

pub fn acc1_broadcast_step<R: RngCore + ?Sized>(states: &[AgentState], rng: &mut R) -> Vec<AgentState> {
    let mut out = states.to_vec();
    broadcast_step(Protocol::Acc1, &mut out, rng);
    out
}

pub fn acc2_broadcast_step<R: RngCore + ?Sized>(states: &[AgentState], rng: &mut R) -> Vec<AgentState> {
    let mut out = states.to_vec();
    broadcast_step(Protocol::Acc2, &mut out, rng);
    out
}

/// Applies one broadcasting interaction in place. `states[0]` is the initiator,
/// the rest its neighbours; an empty slice is a no-op.
///
/// Consumes `states.len() - 1` draws. Returns whether any value set changed.
///
/// # Panics
///
/// If called with [`Protocol::Pairwise`].
pub fn broadcast_step<R: RngCore + ?Sized>(protocol: Protocol, states: &mut [AgentState], rng: &mut R) -> bool {
    assert!(protocol.is_broadcast(), "pairwise is not a broadcast rule");
    let m = states.len();
    if m == 0 {
        return false;
    }

    let before: Vec<ChoiceSet> = states.iter().map(|s| s.value).collect();
    let mut produced = vec![ChoiceSet::EMPTY; m];
    consolidate_into(&before, &mut produced);

    let forced = match protocol {
        Protocol::Acc1 => cmax_of_values(&before),
        Protocol::Acc2 => cmax_of_values(&before).or_else(|| memory_plurality(states)),
        _ => None,
    };

    let mut order: Vec<usize> = (0..m).collect();
    shuffle(&mut order, rng);
    for (u, &slot) in order.iter().enumerate() {
        let next = bdmv_memory_rule(produced[u], states[slot]);
        states[slot] = match forced {
            Some(c) => AgentState::new(next.value, c),
            None => next,
        };
    }

    states.iter().zip(&before).any(|(s, b)| s.value != *b)
}
