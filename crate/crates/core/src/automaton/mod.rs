//! Frequency automata and the probability distributions derived from them.
//!
//! An [`Fdfa`] stores integer counts per state. Probabilities are never
//! stored; [`Fdfa::distribution_of`] normalizes a state's counts on demand.

mod distribution;
pub mod dump;

use std::collections::BTreeMap;

use num_rational::Ratio;
use thiserror::Error;

use crate::event::Symbol;

pub use distribution::{argmax_symbol, Distribution};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("state {0} has total frequency 0")]
    EmptyState(StateId),
    #[error("no state is reached by the given word")]
    Undefined,
    #[error("distribution is empty")]
    EmptyDistribution,
}

/// Dense index into an automaton's state arena. State 0 is the initial state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u32);

impl StateId {
    pub const ROOT: StateId = StateId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for StateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Sparse counts over the extended alphabet. Zero entries are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct FrequencyVector {
    counts: Vec<(Symbol, u64)>,
    total: u64,
}

impl FrequencyVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, sym: Symbol) -> u64 {
        match self.position(sym) {
            Ok(i) => self.counts[i].1,
            Err(_) => 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn add(&mut self, sym: Symbol, by: u64) {
        if by == 0 {
            return;
        }
        match self.position(sym) {
            Ok(i) => self.counts[i].1 += by,
            Err(i) => self.counts.insert(i, (sym, by)),
        }
        self.total += by;
    }

    pub fn increment(&mut self, sym: Symbol) {
        self.add(sym, 1);
    }

    /// Decrements the count of `sym`.
    ///
    /// Counts never go below zero: a decrement of an absent symbol is a
    /// protocol violation, asserted in debug builds and ignored otherwise.
    pub fn decrement(&mut self, sym: Symbol) {
        match self.position(sym) {
            Ok(i) => {
                self.counts[i].1 -= 1;
                self.total -= 1;
                if self.counts[i].1 == 0 {
                    self.counts.remove(i);
                }
            }
            Err(_) => debug_assert!(false, "decrement of zero count for {sym}"),
        }
    }

    /// Adds every count of `other` into `self`.
    pub fn merge(&mut self, other: &FrequencyVector) {
        for &(s, c) in &other.counts {
            self.add(s, c);
        }
    }

    /// Nonzero `(symbol, count)` pairs ordered by symbol index.
    pub fn iter(&self) -> impl Iterator<Item = (Symbol, u64)> + '_ {
        self.counts.iter().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    fn position(&self, sym: Symbol) -> Result<usize, usize> {
        self.counts.binary_search_by_key(&sym, |&(s, _)| s)
    }
}

impl FromIterator<(Symbol, u64)> for FrequencyVector {
    fn from_iter<I: IntoIterator<Item = (Symbol, u64)>>(iter: I) -> Self {
        let mut f = FrequencyVector::new();
        for (s, c) in iter {
            f.add(s, c);
        }
        f
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct State {
    pub freq: FrequencyVector,
    /// Learner annotation: access string for trees and n-grams, sorted
    /// activity set for bags, representative access string after merging.
    pub access: Vec<Symbol>,
    edges: Vec<(Symbol, StateId)>,
}

impl State {
    fn new(access: Vec<Symbol>) -> Self {
        State {
            freq: FrequencyVector::new(),
            access,
            edges: Vec::new(),
        }
    }

    /// Outgoing transitions ordered by symbol.
    pub fn edges(&self) -> &[(Symbol, StateId)] {
        &self.edges
    }
}

/// Frequency deterministic finite automaton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fdfa {
    states: Vec<State>,
}

impl Default for Fdfa {
    fn default() -> Self {
        Self::new()
    }
}

impl Fdfa {
    /// A fresh automaton holding only the root, with access string ε.
    pub fn new() -> Self {
        Fdfa {
            states: vec![State::new(Vec::new())],
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn add_state(&mut self, access: Vec<Symbol>) -> StateId {
        let id = StateId(self.states.len() as u32);
        self.states.push(State::new(access));
        id
    }

    pub fn state(&self, s: StateId) -> &State {
        &self.states[s.index()]
    }

    pub fn states(&self) -> impl Iterator<Item = (StateId, &State)> {
        self.states
            .iter()
            .enumerate()
            .map(|(i, s)| (StateId(i as u32), s))
    }

    pub fn freq(&self, s: StateId) -> &FrequencyVector {
        &self.states[s.index()].freq
    }

    pub fn freq_mut(&mut self, s: StateId) -> &mut FrequencyVector {
        &mut self.states[s.index()].freq
    }

    pub fn access(&self, s: StateId) -> &[Symbol] {
        &self.states[s.index()].access
    }

    pub fn next(&self, s: StateId, sym: Symbol) -> Option<StateId> {
        let edges = &self.states[s.index()].edges;
        edges
            .binary_search_by_key(&sym, |&(a, _)| a)
            .ok()
            .map(|i| edges[i].1)
    }

    /// Sets `δ(from, sym) = to`, replacing any previous target.
    pub fn set_edge(&mut self, from: StateId, sym: Symbol, to: StateId) {
        let edges = &mut self.states[from.index()].edges;
        match edges.binary_search_by_key(&sym, |&(a, _)| a) {
            Ok(i) => edges[i].1 = to,
            Err(i) => edges.insert(i, (sym, to)),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.states.iter().map(|s| s.edges.len()).sum()
    }

    /// Extended transition function: follows `word` from `s`, `None` as soon
    /// as a step is undefined.
    pub fn extended_delta(&self, s: StateId, word: &[Symbol]) -> Option<StateId> {
        word.iter().try_fold(s, |cur, &a| self.next(cur, a))
    }

    /// Normalized counts of state `s`.
    pub fn distribution_of(&self, s: StateId) -> Result<Distribution, AutomatonError> {
        let f = self.freq(s);
        if f.total() == 0 {
            return Err(AutomatonError::EmptyState(s));
        }
        Ok(Distribution::from_counts(f.iter(), f.total()))
    }

    /// Exact probabilities of state `s` as reduced fractions.
    pub fn rational_distribution_of(
        &self,
        s: StateId,
    ) -> Result<Vec<(Symbol, Ratio<u64>)>, AutomatonError> {
        let f = self.freq(s);
        if f.total() == 0 {
            return Err(AutomatonError::EmptyState(s));
        }
        Ok(f.iter().map(|(a, c)| (a, Ratio::new(c, f.total()))).collect())
    }

    /// Prediction for `word`: the distribution at the state reached from the root.
    pub fn predict(&self, word: &[Symbol]) -> Result<Distribution, AutomatonError> {
        let s = self
            .extended_delta(StateId::ROOT, word)
            .ok_or(AutomatonError::Undefined)?;
        self.distribution_of(s)
    }

    /// Sum of every count in every state.
    pub fn total_mass(&self) -> u64 {
        self.states.iter().map(|s| s.freq.total()).sum()
    }

    pub fn total_stop(&self) -> u64 {
        self.states.iter().map(|s| s.freq.get(Symbol::STOP)).sum()
    }

    /// Finds the state carrying the given access annotation.
    pub fn find_by_access(&self, access: &[Symbol]) -> Option<StateId> {
        self.states
            .iter()
            .position(|s| s.access == access)
            .map(|i| StateId(i as u32))
    }

    /// Id-independent view keyed by access annotation: counts and edges
    /// (edges name their target's access). Only meaningful when access
    /// annotations are unique, as they are for trees, n-grams and bags.
    pub fn canonical(&self) -> CanonicalFdfa {
        self.states
            .iter()
            .map(|st| {
                let freq = st.freq.iter().collect();
                let edges = st
                    .edges
                    .iter()
                    .map(|&(a, t)| (a, self.states[t.index()].access.clone()))
                    .collect();
                (st.access.clone(), (freq, edges))
            })
            .collect()
    }
}

/// Access annotation → (counts, edges to target access annotations).
pub type CanonicalFdfa =
    BTreeMap<Vec<Symbol>, (Vec<(Symbol, u64)>, Vec<(Symbol, Vec<Symbol>)>)>;
