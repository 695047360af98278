//! Streaming learning and inference over interleaved cases.
//!
//! Every model, including ensembles and externally supplied ones, is driven
//! through the [`Predictor`] contract: one `update` per event and side-effect
//! free `query`s for a case's next activity.
//!
//! Online automata keep `f(s)(stop)` equal to the number of cases currently
//! sitting in `s`. A step from `s` to `s'` on `a` moves one unit of stop mass
//! from `s` to `s'` and counts `a` at `s`, so replaying any interleaving of a
//! complete log yields the counts of the batch-built automaton.

use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use crate::automaton::{Distribution, Fdfa, StateId};
use crate::event::{CaseId, Event, Symbol};
use crate::learn::bag::BagIndex;
use crate::learn::ngram::{backoff_with, NGramIndex};
use crate::learn::NGramConfig;

/// Interface shared by every next-activity model.
pub trait Predictor: Send {
    fn name(&self) -> &str;

    /// Processes exactly one event.
    fn update(&mut self, event: &Event);

    /// Distribution over the next symbol of `case`, `None` to abstain.
    fn query(&self, case: &CaseId) -> Option<Distribution>;

    /// Total frequency mass at the case's current state, for models that
    /// have one.
    fn visits(&self, _case: &CaseId) -> Option<u64> {
        None
    }

    /// Number of automaton states, for automaton models.
    fn state_count(&self) -> Option<usize> {
        None
    }

    /// Drops per-case bookkeeping once a case is known to be complete.
    fn end_case(&mut self, _case: &CaseId) {}
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn update(&mut self, event: &Event) {
        (**self).update(event)
    }
    fn query(&self, case: &CaseId) -> Option<Distribution> {
        (**self).query(case)
    }
    fn visits(&self, case: &CaseId) -> Option<u64> {
        (**self).visits(case)
    }
    fn state_count(&self) -> Option<usize> {
        (**self).state_count()
    }
    fn end_case(&mut self, case: &CaseId) {
        (**self).end_case(case)
    }
}

/// Convenience: query and take the most probable symbol.
pub fn predicted_symbol<P: Predictor + ?Sized>(p: &P, case: &CaseId) -> Option<Symbol> {
    p.query(case).and_then(|d| d.argmax())
}

/// Per-predictor counters and latency samples collected during evaluation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PredictorStats {
    pub updates: u64,
    pub queries: u64,
    /// Query + update wall time per scored event, in milliseconds.
    pub latency_samples: Vec<f64>,
}

impl PredictorStats {
    pub fn record(&mut self, latency: Duration) {
        self.latency_samples.push(latency.as_secs_f64() * 1e3);
    }

    pub fn mean_latency_ms(&self) -> Option<f64> {
        if self.latency_samples.is_empty() {
            return None;
        }
        Some(self.latency_samples.iter().sum::<f64>() / self.latency_samples.len() as f64)
    }

    pub fn median_latency_ms(&self) -> Option<f64> {
        if self.latency_samples.is_empty() {
            return None;
        }
        let mut v = self.latency_samples.clone();
        v.sort_by(f64::total_cmp);
        let mid = v.len() / 2;
        Some(if v.len() % 2 == 0 {
            (v[mid - 1] + v[mid]) / 2.0
        } else {
            v[mid]
        })
    }
}

/// Current state per active case. Unmapped cases sit at the root.
///
/// With a capacity set, the least recently touched case is evicted once the
/// tracker is full; its stop mass stays where it was.
#[derive(Clone, Debug, Default)]
pub struct CaseTracker {
    current: HashMap<CaseId, (StateId, u64)>,
    recency: BTreeMap<u64, CaseId>,
    tick: u64,
    capacity: Option<usize>,
}

impl CaseTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity_limit(capacity: usize) -> Self {
        CaseTracker {
            capacity: Some(capacity.max(1)),
            ..Self::default()
        }
    }

    pub fn get(&self, case: &CaseId) -> Option<StateId> {
        self.current.get(case).map(|&(s, _)| s)
    }

    pub fn state_of(&self, case: &CaseId) -> StateId {
        self.get(case).unwrap_or(StateId::ROOT)
    }

    pub fn contains(&self, case: &CaseId) -> bool {
        self.current.contains_key(case)
    }

    pub fn set(&mut self, case: CaseId, state: StateId) {
        self.tick += 1;
        let tick = self.tick;
        if let Some((_, old)) = self.current.insert(case.clone(), (state, tick)) {
            self.recency.remove(&old);
        }
        self.recency.insert(tick, case);
        if let Some(cap) = self.capacity {
            while self.current.len() > cap {
                let (_, evicted) = self.recency.pop_first().expect("recency tracks every case");
                self.current.remove(&evicted);
            }
        }
    }

    pub fn remove(&mut self, case: &CaseId) -> Option<StateId> {
        let (s, t) = self.current.remove(case)?;
        self.recency.remove(&t);
        Some(s)
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }
}

/// How an online automaton maps the current state and an activity to the
/// successor state.
#[derive(Clone, Debug)]
enum Structure {
    Tree,
    NGram(NGramIndex),
    Bag(BagIndex),
}

/// Learner kinds supported in streaming mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OnlineKind {
    Fpt,
    Bag,
    NGram(NGramConfig),
}

/// Incrementally learned prefix tree, bag or n-gram.
#[derive(Clone, Debug)]
pub struct OnlineAutomaton {
    name: String,
    fdfa: Fdfa,
    tracker: CaseTracker,
    structure: Structure,
    activities_only: bool,
}

impl OnlineAutomaton {
    pub fn new(name: impl Into<String>, kind: OnlineKind) -> Self {
        let structure = match kind {
            OnlineKind::Fpt => Structure::Tree,
            OnlineKind::Bag => Structure::Bag(BagIndex::default()),
            OnlineKind::NGram(cfg) => Structure::NGram(NGramIndex::new(cfg.history())),
        };
        OnlineAutomaton {
            name: name.into(),
            fdfa: Fdfa::new(),
            tracker: CaseTracker::new(),
            structure,
            activities_only: false,
        }
    }

    pub fn fpt(name: impl Into<String>) -> Self {
        Self::new(name, OnlineKind::Fpt)
    }

    pub fn bag(name: impl Into<String>) -> Self {
        Self::new(name, OnlineKind::Bag)
    }

    pub fn ngram(name: impl Into<String>, cfg: NGramConfig) -> Self {
        Self::new(name, OnlineKind::NGram(cfg))
    }

    /// Continues learning from an existing n-gram automaton, e.g. one built
    /// in batch mode.
    pub fn ngram_from(name: impl Into<String>, fdfa: Fdfa, cfg: NGramConfig) -> Self {
        let index = NGramIndex::from_fdfa(&fdfa, cfg.history());
        OnlineAutomaton {
            name: name.into(),
            fdfa,
            tracker: CaseTracker::new(),
            structure: Structure::NGram(index),
            activities_only: false,
        }
    }

    /// Queries exclude the stop and init symbols (renormalizing the rest).
    /// Used when the stream carries no stop events, so stop can never be
    /// the right answer.
    pub fn activities_only(mut self, yes: bool) -> Self {
        self.activities_only = yes;
        self
    }

    pub fn with_case_limit(mut self, capacity: usize) -> Self {
        self.tracker = CaseTracker::with_capacity_limit(capacity);
        self
    }

    pub fn fdfa(&self) -> &Fdfa {
        &self.fdfa
    }

    pub fn into_fdfa(self) -> Fdfa {
        self.fdfa
    }

    pub fn tracker(&self) -> &CaseTracker {
        &self.tracker
    }

    /// Places a case at `state` without touching any counts, as if it had
    /// been tracked all along.
    pub fn place_case(&mut self, case: CaseId, state: StateId) {
        self.tracker.set(case, state);
    }

    fn answer_at(&self, s: StateId) -> Option<Distribution> {
        let d = self.fdfa.distribution_of(s).ok()?;
        if self.activities_only {
            d.activities_only()
        } else {
            Some(d)
        }
    }
}

impl Predictor for OnlineAutomaton {
    fn name(&self) -> &str {
        &self.name
    }

    fn update(&mut self, event: &Event) {
        let s = match self.tracker.get(&event.case) {
            Some(s) => s,
            None => {
                self.fdfa.freq_mut(StateId::ROOT).increment(Symbol::STOP);
                StateId::ROOT
            }
        };
        let a = event.activity;
        let f = self.fdfa.freq_mut(s);
        f.decrement(Symbol::STOP);
        f.increment(a);
        let next = match &mut self.structure {
            Structure::Tree => match self.fdfa.next(s, a) {
                Some(t) => t,
                None => {
                    let mut access = self.fdfa.access(s).to_vec();
                    access.push(a);
                    let t = self.fdfa.add_state(access);
                    self.fdfa.set_edge(s, a, t);
                    t
                }
            },
            Structure::NGram(index) => index.step(&mut self.fdfa, s, a),
            Structure::Bag(index) => index.step(&mut self.fdfa, s, a),
        };
        self.fdfa.freq_mut(next).increment(Symbol::STOP);
        self.tracker.set(event.case.clone(), next);
    }

    fn query(&self, case: &CaseId) -> Option<Distribution> {
        let s = self.tracker.state_of(case);
        match &self.structure {
            Structure::NGram(_) => {
                if let Some(d) = self.answer_at(s) {
                    return Some(d);
                }
                let access = self.fdfa.access(s);
                backoff_with(&self.fdfa, &access[1.min(access.len())..], |t| {
                    self.answer_at(t)
                })
            }
            _ => self.answer_at(s),
        }
    }

    fn visits(&self, case: &CaseId) -> Option<u64> {
        Some(self.fdfa.freq(self.tracker.state_of(case)).total())
    }

    fn state_count(&self) -> Option<usize> {
        Some(self.fdfa.len())
    }
}

/// How a frozen automaton answers when a case leaves the known structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parsing {
    /// Abstain once the prefix cannot be parsed or hits an empty state.
    Exact,
    /// Retry with shorter suffixes of the prefix from the initial state.
    Backoff,
}

#[derive(Clone, Debug, Default)]
struct Cursor {
    state: Option<StateId>,
    history: Vec<Symbol>,
}

/// Inference-only predictor over a trained automaton: `update` only advances
/// the case's current state, the counts never change.
#[derive(Clone, Debug)]
pub struct FrozenAutomaton {
    name: String,
    fdfa: Fdfa,
    parsing: Parsing,
    cases: HashMap<CaseId, Cursor>,
}

impl FrozenAutomaton {
    pub fn new(name: impl Into<String>, fdfa: Fdfa, parsing: Parsing) -> Self {
        FrozenAutomaton {
            name: name.into(),
            fdfa,
            parsing,
            cases: HashMap::new(),
        }
    }

    pub fn fdfa(&self) -> &Fdfa {
        &self.fdfa
    }
}

impl Predictor for FrozenAutomaton {
    fn name(&self) -> &str {
        &self.name
    }

    fn update(&mut self, event: &Event) {
        let cur = self.cases.entry(event.case.clone()).or_insert_with(|| Cursor {
            state: Some(StateId::ROOT),
            history: Vec::new(),
        });
        cur.state = cur.state.and_then(|s| self.fdfa.next(s, event.activity));
        if self.parsing == Parsing::Backoff {
            cur.history.push(event.activity);
        }
    }

    fn query(&self, case: &CaseId) -> Option<Distribution> {
        let (state, history) = match self.cases.get(case) {
            Some(c) => (c.state, c.history.as_slice()),
            None => (Some(StateId::ROOT), &[][..]),
        };
        if let Some(d) = state.and_then(|s| self.fdfa.distribution_of(s).ok()) {
            return Some(d);
        }
        match self.parsing {
            Parsing::Exact => None,
            Parsing::Backoff => {
                let skip = usize::from(state.is_some());
                backoff_with(&self.fdfa, &history[skip.min(history.len())..], |s| {
                    self.fdfa.distribution_of(s).ok()
                })
            }
        }
    }

    fn visits(&self, case: &CaseId) -> Option<u64> {
        let state = match self.cases.get(case) {
            Some(c) => c.state,
            None => Some(StateId::ROOT),
        };
        Some(state.map_or(0, |s| self.fdfa.freq(s).total()))
    }

    fn state_count(&self) -> Option<usize> {
        Some(self.fdfa.len())
    }

    fn end_case(&mut self, case: &CaseId) {
        self.cases.remove(case);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(i: u32) -> Symbol {
        Symbol::from_index(i)
    }

    fn case(id: &str) -> CaseId {
        CaseId::new(id).unwrap()
    }

    #[test]
    fn first_event_on_fresh_automaton() {
        let mut m = OnlineAutomaton::ngram("3-gram", NGramConfig::new(3).unwrap());
        m.update(&Event::new(case("c"), sym(2)));
        let f = m.fdfa();
        assert_eq!(f.freq(StateId::ROOT).get(Symbol::STOP), 0);
        assert_eq!(f.freq(StateId::ROOT).get(sym(2)), 1);
        let sa = f.next(StateId::ROOT, sym(2)).unwrap();
        assert_eq!(f.freq(sa).get(Symbol::STOP), 1);
        assert_eq!(f.access(sa), &[sym(2)]);
    }

    #[test]
    fn fpt_two_cases_ab() {
        let mut m = OnlineAutomaton::fpt("fpt");
        for c in ["1", "2"] {
            m.update(&Event::new(case(c), sym(2)));
        }
        for c in ["1", "2"] {
            m.update(&Event::new(case(c), sym(3)));
        }
        let f = m.fdfa();
        let sa = f.find_by_access(&[sym(2)]).unwrap();
        let sab = f.find_by_access(&[sym(2), sym(3)]).unwrap();
        assert_eq!(f.freq(sa).get(Symbol::STOP), 0);
        assert_eq!(f.freq(sab).get(Symbol::STOP), 2);
        assert_eq!(f.total_stop(), 2);
    }

    #[test]
    fn bag_mirrors_tree_on_sets() {
        let mut m = OnlineAutomaton::bag("bag");
        m.update(&Event::new(case("1"), sym(2)));
        m.update(&Event::new(case("2"), sym(3)));
        m.update(&Event::new(case("1"), sym(3)));
        m.update(&Event::new(case("2"), sym(2)));
        let f = m.fdfa();
        let both = f.find_by_access(&[sym(2), sym(3)]).unwrap();
        assert_eq!(f.freq(both).get(Symbol::STOP), 2);
        assert_eq!(f.len(), 4);
    }

    #[test]
    fn unknown_case_is_at_root() {
        let mut m = OnlineAutomaton::fpt("fpt");
        assert!(m.query(&case("x")).is_none());
        m.update(&Event::new(case("1"), sym(2)));
        let d = m.query(&case("nobody")).unwrap();
        assert_eq!(d.prob(sym(2)), 1.0);
    }

    #[test]
    fn fpt_abstains_on_fresh_leaf_when_masking() {
        let mut m = OnlineAutomaton::fpt("fpt").activities_only(true);
        m.update(&Event::new(case("1"), sym(2)));
        // the leaf holds only the stop mass of case 1
        assert!(m.query(&case("1")).is_none());
    }

    #[test]
    fn masked_ngram_backs_off() {
        let cfg = NGramConfig::new(3).unwrap();
        let mut m = OnlineAutomaton::ngram("3-gram", cfg).activities_only(true);
        // case 1: a b a ; case 2: c a -> state "ca" only has stop mass
        for (c, s) in [("1", 2), ("1", 3), ("1", 2), ("2", 4), ("2", 2)] {
            m.update(&Event::new(case(c), sym(s)));
        }
        let d = m.query(&case("2")).unwrap();
        // backs off to state "a", which saw b once
        assert_eq!(d.argmax(), Some(sym(3)));
    }

    #[test]
    fn tracker_evicts_least_recent() {
        let mut t = CaseTracker::with_capacity_limit(2);
        t.set(case("a"), StateId(1));
        t.set(case("b"), StateId(2));
        t.set(case("a"), StateId(3));
        t.set(case("c"), StateId(4));
        assert!(t.contains(&case("a")));
        assert!(!t.contains(&case("b")));
        assert_eq!(t.len(), 2);
        assert_eq!(t.state_of(&case("b")), StateId::ROOT);
    }

    #[test]
    fn frozen_exact_abstains_off_structure() {
        let mut fdfa = Fdfa::new();
        let s = fdfa.add_state(vec![sym(2)]);
        fdfa.set_edge(StateId::ROOT, sym(2), s);
        fdfa.freq_mut(StateId::ROOT).add(sym(2), 1);
        fdfa.freq_mut(s).add(Symbol::STOP, 1);
        let mut m = FrozenAutomaton::new("fpt", fdfa, Parsing::Exact);
        let c = case("1");
        assert_eq!(predicted_symbol(&m, &c), Some(sym(2)));
        m.update(&Event::new(c.clone(), sym(2)));
        assert_eq!(predicted_symbol(&m, &c), Some(Symbol::STOP));
        assert_eq!(m.visits(&c), Some(1));
        m.update(&Event::new(c.clone(), sym(3)));
        assert!(m.query(&c).is_none());
        assert_eq!(m.visits(&c), Some(0));
    }

    #[test]
    fn latency_stats() {
        let mut s = PredictorStats::default();
        assert_eq!(s.mean_latency_ms(), None);
        s.record(Duration::from_micros(100));
        s.record(Duration::from_micros(300));
        assert!((s.mean_latency_ms().unwrap() - 0.2).abs() < 1e-12);
        assert!((s.median_latency_ms().unwrap() - 0.2).abs() < 1e-12);
    }
}
