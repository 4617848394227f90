//! Configuration-level predicates: chain stability, the Lyapunov function and the
//! binary group census.

use crate::choice::{Choice, ChoiceSet, Configuration};
use crate::error::{Error, Result};

/// True iff the value sets form a chain under inclusion: whenever
/// `|v_i| <= |v_j|`, `v_i ⊆ v_j`.
pub fn is_stable(values: impl IntoIterator<Item = ChoiceSet>) -> bool {
    let mut distinct: Vec<ChoiceSet> = values.into_iter().collect();
    distinct.sort_unstable_by_key(|s| (s.len(), s.bits()));
    distinct.dedup();
    distinct
        .windows(2)
        .all(|w| w[0].is_subset(w[1]) && w[0].len() < w[1].len())
}

/// `V(C) = n K^2 - Σ |v_i|^2`.
pub fn lyapunov_v(values: impl IntoIterator<Item = ChoiceSet>, k: usize) -> u64 {
    let k2 = (k * k) as u64;
    values.into_iter().map(|v| k2 - (v.len() * v.len()) as u64).sum()
}

/// Sizes of the four binary groups `V1, V2, M1, M2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct GroupCensus {
    /// Agents holding `{c1}`.
    pub v1: usize,
    /// Agents holding `{c2}`.
    pub v2: usize,
    /// Non-singleton value set, memory `c1`.
    pub m1: usize,
    /// Non-singleton value set, memory `c2`.
    pub m2: usize,
}

impl GroupCensus {
    pub fn total(&self) -> usize {
        self.v1 + self.v2 + self.m1 + self.m2
    }
}

/// Group census of a binary (K = 2) configuration.
pub fn census(config: &Configuration) -> Result<GroupCensus> {
    if config.k() != 2 {
        return Err(Error::CensusNeedsBinary(config.k()));
    }
    let mut g = GroupCensus::default();
    for a in config.agents() {
        match a.value.as_singleton().map(Choice::index) {
            Some(0) => g.v1 += 1,
            Some(_) => g.v2 += 1,
            None if a.memory.index() == 0 => g.m1 += 1,
            None => g.m2 += 1,
        }
    }
    Ok(g)
}

impl Configuration {
    pub fn is_stable(&self) -> bool {
        is_stable(self.values())
    }

    pub fn lyapunov(&self) -> u64 {
        lyapunov_v(self.values(), self.k())
    }

    pub fn census(&self) -> Result<GroupCensus> {
        census(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::AgentState;

    const C1: Choice = Choice::from_index(0);
    const C2: Choice = Choice::from_index(1);
    const C3: Choice = Choice::from_index(2);

    fn set(cs: &[Choice]) -> ChoiceSet {
        cs.iter().copied().collect()
    }

    #[test]
    fn stability_examples() {
        assert!(is_stable([set(&[]), set(&[C1]), set(&[C1, C2])]));
        assert!(!is_stable([set(&[C1]), set(&[C2])]));
        assert!(is_stable(vec![set(&[C1]); 3]));
        assert!(is_stable([]));
        assert!(!is_stable([set(&[C1, C2]), set(&[C3])]));
        assert!(!is_stable([set(&[C1]), set(&[C2, C3])]));
    }

    #[test]
    fn lyapunov_examples() {
        assert_eq!(lyapunov_v([set(&[C1]), set(&[C2]), set(&[C1, C2])], 2), 6);
        assert_eq!(lyapunov_v(vec![set(&[C1, C2]); 17], 2), 0);
        assert_eq!(lyapunov_v([set(&[])], 3), 9);
    }

    #[test]
    fn census_examples() {
        let cfg = Configuration::new(
            2,
            vec![
                AgentState::new(set(&[C1]), C1),
                AgentState::new(set(&[C2]), C2),
                AgentState::new(set(&[C1, C2]), C1),
                AgentState::new(set(&[]), C2),
            ],
        )
        .unwrap();
        assert_eq!(
            census(&cfg).unwrap(),
            GroupCensus {
                v1: 1,
                v2: 1,
                m1: 1,
                m2: 1
            }
        );

        let cfg = Configuration::from_votes(2, &[C2; 6]).unwrap();
        assert_eq!(
            cfg.census().unwrap(),
            GroupCensus {
                v1: 0,
                v2: 6,
                m1: 0,
                m2: 0
            }
        );

        let cfg = Configuration::new(2, vec![AgentState::new(set(&[C1, C2]), C1); 5]).unwrap();
        let g = cfg.census().unwrap();
        assert_eq!(
            g,
            GroupCensus {
                v1: 0,
                v2: 0,
                m1: 5,
                m2: 0
            }
        );
        assert_eq!(g.total(), 5);

        let cfg = Configuration::from_votes(3, &[C1]).unwrap();
        assert_eq!(census(&cfg), Err(Error::CensusNeedsBinary(3)));
    }
}
