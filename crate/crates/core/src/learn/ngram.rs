use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::automaton::{Distribution, Fdfa, StateId};
use crate::event::{EventLog, Symbol};

/// An n-gram identifies states with the last `n - 1` activities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NGramConfig {
    pub n: usize,
}

impl NGramConfig {
    pub fn new(n: usize) -> Result<Self, LearnError> {
        if n == 0 {
            return Err(LearnError::ZeroWindow);
        }
        Ok(NGramConfig { n })
    }

    /// Length of the access strings (the history kept per state).
    pub fn history(&self) -> usize {
        self.n - 1
    }
}

/// Access string of the state reached from `access` on `sym`.
pub(crate) fn shifted(access: &[Symbol], sym: Symbol, history: usize) -> Vec<Symbol> {
    let mut key = Vec::with_capacity(history.min(access.len() + 1));
    let total = access.len() + 1;
    let skip = total.saturating_sub(history);
    key.extend(access.iter().copied().chain(std::iter::once(sym)).skip(skip));
    key
}

/// Maps access strings to states of an n-gram automaton and creates states
/// and transitions on demand.
///
/// Besides traversed transitions, a short state `w` (shorter than the
/// history) is always linked to an existing state `w·a` on `a`, even before
/// that transition is used. Such transitions carry count 0.
#[derive(Clone, Debug)]
pub(crate) struct NGramIndex {
    history: usize,
    states: HashMap<Vec<Symbol>, StateId>,
}

impl NGramIndex {
    pub fn new(history: usize) -> Self {
        let mut states = HashMap::new();
        states.insert(Vec::new(), StateId::ROOT);
        NGramIndex { history, states }
    }

    /// Rebuilds the index of an existing n-gram automaton.
    pub fn from_fdfa(fdfa: &Fdfa, history: usize) -> Self {
        NGramIndex {
            history,
            states: fdfa.states().map(|(id, s)| (s.access.clone(), id)).collect(),
        }
    }

    /// Successor of `s` on `sym`, creating the state and transition if needed.
    pub fn step(&mut self, fdfa: &mut Fdfa, s: StateId, sym: Symbol) -> StateId {
        if let Some(t) = fdfa.next(s, sym) {
            return t;
        }
        let key = shifted(fdfa.access(s), sym, self.history);
        let t = self.get_or_create(fdfa, key);
        fdfa.set_edge(s, sym, t);
        t
    }

    fn get_or_create(&mut self, fdfa: &mut Fdfa, key: Vec<Symbol>) -> StateId {
        if let Some(&t) = self.states.get(&key) {
            return t;
        }
        let t = fdfa.add_state(key.clone());
        let len = key.len();
        if let Some((&last, parent)) = key.split_last() {
            if let Some(&p) = self.states.get(parent) {
                fdfa.set_edge(p, last, t);
            }
        }
        if len < self.history {
            let children: Vec<(Symbol, StateId)> = self
                .states
                .iter()
                .filter(|(k, _)| k.len() == len + 1 && k.starts_with(&key))
                .map(|(k, &id)| (k[len], id))
                .collect();
            for (a, c) in children {
                fdfa.set_edge(t, a, c);
            }
        }
        self.states.insert(key, t);
        t
    }
}

/// Builds the n-gram automaton of `log` directly, without a prefix tree.
pub fn build_ngram(log: &EventLog, cfg: NGramConfig) -> Fdfa {
    let mut fdfa = Fdfa::new();
    let mut index = NGramIndex::new(cfg.history());
    for (trace, m) in log.iter() {
        let mut s = StateId::ROOT;
        for &a in trace {
            fdfa.freq_mut(s).add(a, m);
            s = index.step(&mut fdfa, s, a);
        }
        fdfa.freq_mut(s).add(Symbol::STOP, m);
    }
    fdfa
}

/// Quotient of a prefix tree under equality of the last `n - 1` activities.
pub fn fold_fpt_to_ngram(fpt: &Fdfa, cfg: NGramConfig) -> Fdfa {
    let history = cfg.history();
    let class_key = |access: &[Symbol]| access[access.len().saturating_sub(history)..].to_vec();

    let mut out = Fdfa::new();
    let mut classes: HashMap<Vec<Symbol>, StateId> = HashMap::new();
    classes.insert(Vec::new(), StateId::ROOT);
    let mut class_of = Vec::with_capacity(fpt.len());
    for (_, st) in fpt.states() {
        let key = class_key(&st.access);
        let id = *classes
            .entry(key.clone())
            .or_insert_with(|| out.add_state(key));
        class_of.push(id);
        out.freq_mut(id).merge(&st.freq);
    }
    for (s, st) in fpt.states() {
        for &(a, t) in st.edges() {
            out.set_edge(class_of[s.index()], a, class_of[t.index()]);
        }
    }
    // structural links between short states and their one-longer extensions
    let mut links = Vec::new();
    for (key, &child) in &classes {
        if let Some((&last, parent)) = key.split_last() {
            if parent.len() < history {
                if let Some(&p) = classes.get(parent) {
                    links.push((p, last, child));
                }
            }
        }
    }
    for (p, a, c) in links {
        out.set_edge(p, a, c);
    }
    out
}

/// Backoff parsing: tries `w` and then ever shorter suffixes of it, always
/// from the initial state, until a reached state yields a distribution.
///
/// `answer` decides whether a reached state can answer; states with zero
/// total frequency never can. `None` means every suffix failed.
pub(crate) fn backoff_with<F>(fdfa: &Fdfa, w: &[Symbol], mut answer: F) -> Option<Distribution>
where
    F: FnMut(StateId) -> Option<Distribution>,
{
    (0..=w.len()).find_map(|start| {
        fdfa.extended_delta(StateId::ROOT, &w[start..])
            .and_then(&mut answer)
    })
}

/// Distribution for `w` with backoff to shorter suffixes. `None` signals
/// abstention (even the empty suffix reaches a state with no data).
pub fn predict_with_backoff(fdfa: &Fdfa, w: &[Symbol]) -> Option<Distribution> {
    backoff_with(fdfa, w, |s| fdfa.distribution_of(s).ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::build_fpt;

    fn sym(i: u32) -> Symbol {
        Symbol::from_index(i)
    }

    #[test]
    fn shifted_keeps_history() {
        let (a, b, c) = (sym(2), sym(3), sym(4));
        assert_eq!(shifted(&[a, b], c, 2), vec![b, c]);
        assert_eq!(shifted(&[a], c, 2), vec![a, c]);
        assert_eq!(shifted(&[a, b], c, 0), Vec::<Symbol>::new());
    }

    #[test]
    fn unigram_is_single_histogram() {
        let mut log = EventLog::new();
        log.add(vec![sym(2), sym(3)], 2).unwrap();
        log.add(vec![sym(2)], 1).unwrap();
        let f = build_ngram(&log, NGramConfig::new(1).unwrap());
        assert_eq!(f.len(), 1);
        assert_eq!(
            f.freq(StateId::ROOT).iter().collect::<Vec<_>>(),
            vec![(Symbol::STOP, 3), (sym(2), 3), (sym(3), 2)]
        );
    }

    #[test]
    fn zero_window_rejected() {
        assert_eq!(NGramConfig::new(0), Err(LearnError::ZeroWindow));
    }

    #[test]
    fn huge_window_is_the_prefix_tree() {
        let mut log = EventLog::new();
        log.add(vec![sym(2), sym(3), sym(2)], 2).unwrap();
        log.add(vec![sym(3), sym(3)], 1).unwrap();
        let fpt = build_fpt(&log);
        let folded = fold_fpt_to_ngram(&fpt, NGramConfig::new(10).unwrap());
        assert_eq!(folded.canonical(), fpt.canonical());
    }

    #[test]
    fn backoff_abstains_on_empty_root() {
        let f = Fdfa::new();
        assert!(predict_with_backoff(&f, &[sym(2)]).is_none());
    }
}
