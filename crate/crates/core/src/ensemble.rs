//! Voting ensembles over [`Predictor`]s.
//!
//! An [`Ensemble`] is itself a [`Predictor`], so ensembles nest.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::automaton::Distribution;
use crate::event::{CaseId, Event, Symbol};
use crate::streaming::Predictor;

/// Default minimum visit count for the fallback primary.
pub const DEFAULT_MIN_VISITS: u64 = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnsembleError {
    #[error("an ensemble needs at least two members, got {0}")]
    TooFewMembers(usize),
}

/// How adaptive voting tracks each member's accuracy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AccuracyRule {
    /// correct / scored since the member was first scored.
    RunningMean,
    /// Exponentially weighted hit rate with the given decay per event.
    Decay(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Voting {
    Soft,
    Hard,
    Adaptive(AccuracyRule),
    /// Answer from the first member when its current state has at least
    /// `min_visits` total frequency, else from the second.
    Fallback { min_visits: u64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Score {
    correct: u64,
    scored: u64,
    value: f64,
}

impl Score {
    fn record(&mut self, hit: bool, rule: AccuracyRule) {
        let h = if hit { 1.0 } else { 0.0 };
        self.value = match rule {
            AccuracyRule::RunningMean => (self.correct + u64::from(hit)) as f64 / (self.scored + 1) as f64,
            AccuracyRule::Decay(_) if self.scored == 0 => h,
            AccuracyRule::Decay(d) => d * self.value + (1.0 - d) * h,
        };
        self.correct += u64::from(hit);
        self.scored += 1;
    }
}

pub struct Ensemble {
    name: String,
    members: Vec<Box<dyn Predictor>>,
    voting: Voting,
    scores: Vec<Score>,
}

impl std::fmt::Debug for Ensemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ensemble")
            .field("name", &self.name)
            .field("members", &self.members.iter().map(|m| m.name()).collect::<Vec<_>>())
            .field("voting", &self.voting)
            .finish()
    }
}

impl Ensemble {
    pub fn new(
        name: impl Into<String>,
        voting: Voting,
        members: Vec<Box<dyn Predictor>>,
    ) -> Result<Self, EnsembleError> {
        if members.len() < 2 {
            return Err(EnsembleError::TooFewMembers(members.len()));
        }
        let scores = vec![Score::default(); members.len()];
        Ok(Ensemble {
            name: name.into(),
            members,
            voting,
            scores,
        })
    }

    pub fn soft(name: impl Into<String>, members: Vec<Box<dyn Predictor>>) -> Result<Self, EnsembleError> {
        Self::new(name, Voting::Soft, members)
    }

    pub fn hard(name: impl Into<String>, members: Vec<Box<dyn Predictor>>) -> Result<Self, EnsembleError> {
        Self::new(name, Voting::Hard, members)
    }

    pub fn adaptive(name: impl Into<String>, members: Vec<Box<dyn Predictor>>) -> Result<Self, EnsembleError> {
        Self::new(name, Voting::Adaptive(AccuracyRule::RunningMean), members)
    }

    pub fn fallback(
        name: impl Into<String>,
        primary: Box<dyn Predictor>,
        secondary: Box<dyn Predictor>,
        min_visits: u64,
    ) -> Self {
        Self::new(name, Voting::Fallback { min_visits }, vec![primary, secondary])
            .expect("two members")
    }

    pub fn voting(&self) -> Voting {
        self.voting
    }

    pub fn members(&self) -> &[Box<dyn Predictor>] {
        &self.members
    }

    /// Current adaptive accuracy per member, `None` until first scored.
    pub fn accuracies(&self) -> Vec<Option<f64>> {
        self.scores
            .iter()
            .map(|s| (s.scored > 0).then_some(s.value))
            .collect()
    }

    pub fn soft_vote(&self, case: &CaseId) -> Option<Distribution> {
        let answers: Vec<Distribution> = self.members.iter().filter_map(|m| m.query(case)).collect();
        Distribution::mean(&answers)
    }

    pub fn hard_vote(&self, case: &CaseId) -> Option<Distribution> {
        let mut votes: BTreeMap<Symbol, usize> = BTreeMap::new();
        for m in &self.members {
            if let Some(s) = m.query(case).and_then(|d| d.argmax()) {
                *votes.entry(s).or_default() += 1;
            }
        }
        let mut best: Option<(Symbol, usize)> = None;
        for (s, n) in votes {
            if best.is_none_or(|(_, bn)| n > bn) {
                best = Some((s, n));
            }
        }
        best.map(|(s, _)| Distribution::dirac(s))
    }

    /// Member indices from most to least accurate; ties keep list order.
    /// Unscored members come last.
    fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.members.len()).collect();
        idx.sort_by(|&a, &b| {
            let (sa, sb) = (&self.scores[a], &self.scores[b]);
            (sb.scored > 0)
                .cmp(&(sa.scored > 0))
                .then(sb.value.total_cmp(&sa.value))
                .then(a.cmp(&b))
        });
        idx
    }

    /// The answer of the currently most accurate member, which may abstain.
    pub fn adaptive_vote(&self, case: &CaseId) -> Option<Distribution> {
        self.members[self.ranking()[0]].query(case)
    }

    pub fn fallback_query(&self, case: &CaseId, min_visits: u64) -> Option<Distribution> {
        let primary = &self.members[0];
        if primary.visits(case).unwrap_or(0) >= min_visits {
            if let Some(d) = primary.query(case) {
                return Some(d);
            }
        }
        self.members[1].query(case)
    }
}

impl Predictor for Ensemble {
    fn name(&self) -> &str {
        &self.name
    }

    fn update(&mut self, event: &Event) {
        if let Voting::Adaptive(rule) = self.voting {
            // init markers are not predictions anyone is scored on
            if event.activity.is_activity() {
                for (m, score) in self.members.iter().zip(self.scores.iter_mut()) {
                    let guess = m.query(&event.case).and_then(|d| d.argmax());
                    score.record(guess == Some(event.activity), rule);
                }
            }
        }
        for m in &mut self.members {
            m.update(event);
        }
    }

    fn query(&self, case: &CaseId) -> Option<Distribution> {
        match self.voting {
            Voting::Soft => self.soft_vote(case),
            Voting::Hard => self.hard_vote(case),
            Voting::Adaptive(_) => self.adaptive_vote(case),
            Voting::Fallback { min_visits } => self.fallback_query(case, min_visits),
        }
    }

    fn end_case(&mut self, case: &CaseId) {
        for m in &mut self.members {
            m.end_case(case);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn sym(i: u32) -> Symbol {
        Symbol::from_index(i)
    }

    fn case(id: &str) -> CaseId {
        CaseId::new(id).unwrap()
    }

    /// Answers with a fixed distribution per case; counts updates.
    struct Scripted {
        name: String,
        answers: HashMap<CaseId, Distribution>,
        visits: u64,
        updates: usize,
    }

    impl Scripted {
        fn new(name: &str) -> Self {
            Scripted {
                name: name.into(),
                answers: HashMap::new(),
                visits: 0,
                updates: 0,
            }
        }

        fn answer(mut self, c: &str, d: Distribution) -> Self {
            self.answers.insert(case(c), d);
            self
        }
    }

    impl Predictor for Scripted {
        fn name(&self) -> &str {
            &self.name
        }
        fn update(&mut self, _event: &Event) {
            self.updates += 1;
        }
        fn query(&self, c: &CaseId) -> Option<Distribution> {
            self.answers.get(c).cloned()
        }
        fn visits(&self, _c: &CaseId) -> Option<u64> {
            Some(self.visits)
        }
    }

    fn weights(w: &[(u32, f64)]) -> Distribution {
        Distribution::from_weights(w.iter().map(|&(s, p)| (Symbol::from_index(s), p))).unwrap()
    }

    #[test]
    fn needs_two_members() {
        let one: Vec<Box<dyn Predictor>> = vec![Box::new(Scripted::new("a"))];
        assert_eq!(
            Ensemble::soft("s", one).unwrap_err(),
            EnsembleError::TooFewMembers(1)
        );
    }

    #[test]
    fn soft_vote_averages() {
        let e = Ensemble::soft(
            "soft",
            vec![
                Box::new(Scripted::new("x").answer("c", weights(&[(2, 0.6), (0, 0.4)]))),
                Box::new(Scripted::new("y").answer("c", weights(&[(2, 0.2), (3, 0.8)]))),
            ],
        )
        .unwrap();
        let d = e.query(&case("c")).unwrap();
        assert!((d.prob(sym(2)) - 0.4).abs() < 1e-12);
        assert!((d.prob(sym(3)) - 0.4).abs() < 1e-12);
        assert!((d.prob(Symbol::STOP) - 0.2).abs() < 1e-12);
        assert!(e.query(&case("other")).is_none());
    }

    #[test]
    fn soft_vote_skips_abstainers() {
        let d = weights(&[(2, 0.3), (3, 0.7)]);
        let e = Ensemble::soft(
            "soft",
            vec![
                Box::new(Scripted::new("x")),
                Box::new(Scripted::new("y").answer("c", d.clone())),
            ],
        )
        .unwrap();
        assert_eq!(e.query(&case("c")), Some(d));
    }

    #[test]
    fn hard_vote_plurality_and_ties() {
        let a = weights(&[(2, 1.0)]);
        let b = weights(&[(3, 1.0)]);
        let stop = weights(&[(0, 0.9), (2, 0.1)]);
        let mk = |ds: Vec<Distribution>| {
            Ensemble::hard(
                "hard",
                ds.into_iter()
                    .enumerate()
                    .map(|(i, d)| Box::new(Scripted::new(&i.to_string()).answer("c", d)) as Box<dyn Predictor>)
                    .collect(),
            )
            .unwrap()
        };
        let c = case("c");
        assert_eq!(mk(vec![a.clone(), a.clone(), b.clone()]).query(&c), Some(Distribution::dirac(sym(2))));
        assert_eq!(mk(vec![b.clone(), a.clone()]).query(&c), Some(Distribution::dirac(sym(2))));
        assert_eq!(
            mk(vec![stop.clone(), stop, a, b]).query(&c),
            Some(Distribution::dirac(Symbol::STOP))
        );
    }

    #[test]
    fn adaptive_running_mean() {
        // member 0 always predicts a, member 1 always predicts b
        let mut e = Ensemble::adaptive(
            "adaptive",
            vec![
                Box::new(Scripted::new("A").answer("c", weights(&[(2, 1.0)]))),
                Box::new(Scripted::new("B").answer("c", weights(&[(3, 1.0)]))),
            ],
        )
        .unwrap();
        assert_eq!(e.accuracies(), vec![None, None]);
        // before any scoring the first member answers
        assert_eq!(e.query(&case("c")).unwrap().argmax(), Some(sym(2)));
        for s in [2, 3, 2, 2] {
            e.update(&Event::new(case("c"), sym(s)));
        }
        // a b a a -> A 3/4, B 1/4
        assert_eq!(e.accuracies(), vec![Some(0.75), Some(0.25)]);
        e.update(&Event::new(case("c"), sym(3)));
        assert_eq!(e.accuracies(), vec![Some(0.6), Some(0.4)]);
        // init events are not scored
        e.update(&Event::new(case("c"), Symbol::INIT));
        assert_eq!(e.accuracies(), vec![Some(0.6), Some(0.4)]);
        assert_eq!(e.query(&case("c")).unwrap().argmax(), Some(sym(2)));
    }

    #[test]
    fn adaptive_tie_and_abstain() {
        let mut e = Ensemble::adaptive(
            "adaptive",
            vec![
                Box::new(Scripted::new("A").answer("d", weights(&[(2, 1.0)]))),
                Box::new(Scripted::new("B").answer("c", weights(&[(3, 1.0)])).answer("d", weights(&[(3, 1.0)]))),
            ],
        )
        .unwrap();
        // case "x": both abstain -> both wrong, equal scores
        e.update(&Event::new(case("x"), sym(2)));
        assert_eq!(e.accuracies(), vec![Some(0.0), Some(0.0)]);
        assert_eq!(e.query(&case("d")).unwrap().argmax(), Some(sym(2)));
        // the best member abstains on "c", and so does the ensemble
        assert_eq!(e.query(&case("c")), None);
    }

    #[test]
    fn adaptive_decay_stays_in_unit_interval() {
        let mut s = Score::default();
        for i in 0..1000 {
            s.record(i % 3 == 0, AccuracyRule::Decay(0.995));
            assert!((0.0..=1.0).contains(&s.value));
        }
    }

    #[test]
    fn fallback_threshold() {
        let mk = |visits| {
            let mut p = Scripted::new("fpt").answer("c", weights(&[(2, 1.0)]));
            p.visits = visits;
            Ensemble::fallback(
                "fallback",
                Box::new(p),
                Box::new(Scripted::new("ngram").answer("c", weights(&[(3, 1.0)]))),
                10,
            )
        };
        let c = case("c");
        assert_eq!(mk(9).query(&c).unwrap().argmax(), Some(sym(3)));
        assert_eq!(mk(10).query(&c).unwrap().argmax(), Some(sym(2)));
        assert_eq!(mk(30).query(&c).unwrap().argmax(), Some(sym(2)));
        // primary abstains
        assert_eq!(mk(30).query(&case("z")), None);
    }

    #[test]
    fn updates_are_forwarded() {
        let mut e = Ensemble::soft(
            "soft",
            vec![Box::new(Scripted::new("x")), Box::new(Scripted::new("y"))],
        )
        .unwrap();
        e.update(&Event::new(case("c"), sym(2)));
        e.update(&Event::new(case("c"), sym(2)));
        assert_eq!(e.members().len(), 2);
        assert_eq!(e.name(), "soft");
    }
}
