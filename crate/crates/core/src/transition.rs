//! STRIPS state semantics: applicability, successor states and the goal test.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grounding::{FactId, GroundTask, OpId};

const WORD: usize = 64;

/// A set of facts over a fixed-size fact table, stored as a bit set.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "StateRepr", into = "StateRepr")]
pub struct State {
    len: usize,
    words: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    num_facts: usize,
    facts: Vec<FactId>,
}

impl From<StateRepr> for State {
    fn from(r: StateRepr) -> Self {
        State::from_facts(r.num_facts, r.facts.into_iter().filter(|&f| f < r.num_facts))
    }
}

impl From<State> for StateRepr {
    fn from(s: State) -> Self {
        StateRepr {
            num_facts: s.len,
            facts: s.iter().collect(),
        }
    }
}

impl State {
    pub fn empty(num_facts: usize) -> Self {
        Self {
            len: num_facts,
            words: vec![0; num_facts.div_ceil(WORD)],
        }
    }

    /// Panics if a fact index is outside the table.
    pub fn from_facts(num_facts: usize, facts: impl IntoIterator<Item = FactId>) -> Self {
        let mut s = Self::empty(num_facts);
        for f in facts {
            s.insert(f);
        }
        s
    }

    /// Size of the fact table this state ranges over.
    pub fn num_facts(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn contains(&self, fact: FactId) -> bool {
        fact < self.len && self.words[fact / WORD] & (1 << (fact % WORD)) != 0
    }

    #[inline]
    pub fn insert(&mut self, fact: FactId) {
        assert!(fact < self.len, "fact {fact} outside table of {}", self.len);
        self.words[fact / WORD] |= 1 << (fact % WORD);
    }

    #[inline]
    pub fn remove(&mut self, fact: FactId) {
        if fact < self.len {
            self.words[fact / WORD] &= !(1 << (fact % WORD));
        }
    }

    pub fn contains_all(&self, facts: &[FactId]) -> bool {
        facts.iter().all(|&f| self.contains(f))
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Fact indices in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = FactId> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(i * WORD + bit)
            })
        })
    }

    /// `(self \ del) ∪ add`.
    pub fn successor(&self, add: &[FactId], del: &[FactId]) -> State {
        let mut next = self.clone();
        for &f in del {
            next.remove(f);
        }
        for &f in add {
            next.insert(f);
        }
        next
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("operator {op} is not applicable: precondition fact {missing} is false")]
    Inapplicable { op: OpId, missing: FactId },
    #[error("operator id {0} is out of range")]
    UnknownOperator(OpId),
}

pub fn is_applicable(task: &GroundTask, state: &State, op: OpId) -> bool {
    state.contains_all(&task.operators[op].pre)
}

/// Strict application: errors if `op` is not applicable in `state`.
pub fn apply(task: &GroundTask, state: &State, op: OpId) -> Result<State, TransitionError> {
    let o = task
        .operators
        .get(op)
        .ok_or(TransitionError::UnknownOperator(op))?;
    if let Some(&missing) = o.pre.iter().find(|&&f| !state.contains(f)) {
        return Err(TransitionError::Inapplicable { op, missing });
    }
    Ok(state.successor(&o.add, &o.del))
}

/// Applies the effects regardless of preconditions. Only the validator's
/// diagnostic path should need this.
pub fn apply_unchecked(task: &GroundTask, state: &State, op: OpId) -> State {
    let o = &task.operators[op];
    state.successor(&o.add, &o.del)
}

pub fn is_goal(task: &GroundTask, state: &State) -> bool {
    state.contains_all(&task.goal)
}

/// Operators applicable in `state`, in id order.
pub fn applicable_operators(task: &GroundTask, state: &State) -> Vec<OpId> {
    task.operators
        .iter()
        .filter(|o| state.contains_all(&o.pre))
        .map(|o| o.id)
        .collect()
}
