//! Choices, value sets and agent states.
//!
//! A [`ChoiceSet`] is a bitmask over at most [`MAX_CHOICES`] choices. Choices are
//! zero-indexed internally and displayed one-indexed (`c1`, `c2`, ...).

use std::fmt;

use crate::error::{Error, Result};

/// Upper bound on K so that a value set fits in one machine word.
pub const MAX_CHOICES: usize = 64;

/// A single choice index in `0..K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Choice(u8);

impl Choice {
    pub fn new(index: usize) -> Result<Self> {
        if index >= MAX_CHOICES {
            return Err(Error::invalid(
                "choice",
                format!("index {index} exceeds the {MAX_CHOICES}-choice limit"),
            ));
        }
        Ok(Choice(index as u8))
    }

    /// Panics if `index >= MAX_CHOICES`.
    pub const fn from_index(index: usize) -> Self {
        assert!(index < MAX_CHOICES);
        Choice(index as u8)
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0 as usize + 1)
    }
}

/// Subset of the K choices carried by an agent (its value set).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ChoiceSet(u64);

impl ChoiceSet {
    pub const EMPTY: ChoiceSet = ChoiceSet(0);

    pub const fn from_bits(bits: u64) -> Self {
        ChoiceSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub const fn singleton(c: Choice) -> Self {
        ChoiceSet(1 << c.0)
    }

    /// The set `{c1, .., cK}`.
    pub fn full(k: usize) -> Self {
        assert!(k <= MAX_CHOICES);
        if k == MAX_CHOICES {
            ChoiceSet(u64::MAX)
        } else {
            ChoiceSet((1u64 << k) - 1)
        }
    }

    pub fn contains(self, c: Choice) -> bool {
        self.0 & (1 << c.0) != 0
    }

    pub fn insert(&mut self, c: Choice) {
        self.0 |= 1 << c.0;
    }

    pub fn union(self, other: Self) -> Self {
        ChoiceSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        ChoiceSet(self.0 & other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// The sole element if this is a singleton.
    pub fn as_singleton(self) -> Option<Choice> {
        (self.0.count_ones() == 1).then(|| Choice(self.0.trailing_zeros() as u8))
    }

    /// Largest choice index present plus one, i.e. the smallest K this set fits in.
    pub fn min_k(self) -> usize {
        (64 - self.0.leading_zeros()) as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Choice> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros();
            bits &= bits - 1;
            Some(Choice(i as u8))
        })
    }
}

impl FromIterator<Choice> for ChoiceSet {
    fn from_iter<T: IntoIterator<Item = Choice>>(iter: T) -> Self {
        let mut s = ChoiceSet::EMPTY;
        for c in iter {
            s.insert(c);
        }
        s
    }
}

impl fmt::Debug for ChoiceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for ChoiceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One agent's protocol state: a value set plus a single-choice memory.
///
/// Every memory write in the protocols is a singleton, so memory is stored as a
/// choice index rather than a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentState {
    pub value: ChoiceSet,
    pub memory: Choice,
}

impl AgentState {
    /// Initial state for an agent voting `vote`: value `{vote}`, memory `vote`.
    pub fn initial(vote: Choice) -> Self {
        AgentState {
            value: ChoiceSet::singleton(vote),
            memory: vote,
        }
    }

    pub fn new(value: ChoiceSet, memory: Choice) -> Self {
        AgentState { value, memory }
    }
}

/// The configuration vector: the states of all `n` agents plus the number of choices K.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    k: usize,
    agents: Vec<AgentState>,
}

impl Configuration {
    pub fn new(k: usize, agents: Vec<AgentState>) -> Result<Self> {
        if k == 0 || k > MAX_CHOICES {
            return Err(Error::invalid("K", format!("must be in 1..={MAX_CHOICES}, got {k}")));
        }
        let limit = ChoiceSet::full(k);
        for (i, a) in agents.iter().enumerate() {
            if !a.value.is_subset(limit) || a.memory.index() >= k {
                return Err(Error::invalid(
                    "agents",
                    format!("agent {i} refers to a choice outside 1..={k}"),
                ));
            }
        }
        Ok(Configuration { k, agents })
    }

    pub fn from_votes(k: usize, votes: &[Choice]) -> Result<Self> {
        Self::new(k, votes.iter().map(|&v| AgentState::initial(v)).collect())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub(crate) fn agents_mut(&mut self) -> &mut [AgentState] {
        &mut self.agents
    }

    pub fn values(&self) -> impl Iterator<Item = ChoiceSet> + '_ {
        self.agents.iter().map(|a| a.value)
    }

    /// `count_k = |{i : c_k ∈ v_i}|` for every choice.
    pub fn choice_counts(&self) -> Vec<usize> {
        choice_counts(self.values(), self.k)
    }
}

/// Per-choice membership counts over a collection of value sets.
pub fn choice_counts(sets: impl IntoIterator<Item = ChoiceSet>, k: usize) -> Vec<usize> {
    let mut counts = vec![0usize; k];
    for s in sets {
        for c in s.iter() {
            counts[c.index()] += 1;
        }
    }
    counts
}
