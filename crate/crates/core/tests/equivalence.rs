//! Streaming replay and direct construction agree with the batch oracles.

mod common;

use proptest::prelude::*;
use streampredict::event::{log_from_stream, EventLog, Symbol};
use streampredict::learn::{build_bag, build_fpt, build_ngram, fold_fpt_to_ngram, predict_with_backoff, NGramConfig};
use streampredict::streaming::{OnlineAutomaton, Predictor};

fn cases_strategy(max_sigma: u32, max_cases: usize) -> impl Strategy<Value = Vec<Vec<Symbol>>> {
    (1..=max_sigma).prop_flat_map(move |sigma| {
        prop::collection::vec(
            prop::collection::vec((0..sigma).prop_map(|i| Symbol::from_index(Symbol::FIRST_ACTIVITY + i)), 1..=8),
            0..=max_cases,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn streaming_replay_equals_batch(
        cases in cases_strategy(4, 30),
        picks in prop::collection::vec(any::<usize>(), 1..64),
        n in 1usize..=5,
    ) {
        let events = common::interleave_by(&cases, &picks);
        let log = log_from_stream(&events);
        prop_assert_eq!(log.case_count() as usize, cases.len());
        let cfg = NGramConfig::new(n).unwrap();
        let mut fpt = OnlineAutomaton::fpt("FPT");
        let mut bag = OnlineAutomaton::bag("bag");
        let mut ng = OnlineAutomaton::ngram("ngram", cfg);
        for e in &events {
            fpt.update(e);
            bag.update(e);
            ng.update(e);
        }
        prop_assert_eq!(fpt.fdfa().canonical(), build_fpt(&log).canonical());
        prop_assert_eq!(bag.fdfa().canonical(), build_bag(&log).canonical());
        prop_assert_eq!(ng.fdfa().canonical(), build_ngram(&log, cfg).canonical());
    }

    #[test]
    fn direct_ngram_equals_folded_prefix_tree(cases in cases_strategy(4, 50), n in 1usize..=5) {
        let log: EventLog = cases.into_iter().collect();
        let cfg = NGramConfig::new(n).unwrap();
        prop_assert_eq!(build_ngram(&log, cfg).canonical(), fold_fpt_to_ngram(&build_fpt(&log), cfg).canonical());
    }

    #[test]
    fn stop_mass_counts_cases(cases in cases_strategy(4, 30), n in 1usize..=5) {
        let log: EventLog = cases.into_iter().collect();
        let k = log.case_count();
        prop_assert_eq!(build_fpt(&log).total_stop(), k);
        prop_assert_eq!(build_bag(&log).total_stop(), k);
        prop_assert_eq!(build_ngram(&log, NGramConfig::new(n).unwrap()).total_stop(), k);
    }

    #[test]
    fn prefix_tree_edges_count_subtree_entries(cases in cases_strategy(3, 20)) {
        let log: EventLog = cases.into_iter().collect();
        let f = build_fpt(&log);
        // f(s)(a) equals the number of cases passing through δ(s, a)
        let mut through = vec![0u64; f.len()];
        for (trace, m) in log.iter() {
            let mut s = streampredict::automaton::StateId::ROOT;
            for &a in trace {
                s = f.next(s, a).unwrap();
                through[s.index()] += m;
            }
        }
        for (s, st) in f.states() {
            for &(a, t) in st.edges() {
                prop_assert_eq!(f.freq(s).get(a), through[t.index()]);
            }
        }
    }

    #[test]
    fn backoff_never_yields_an_empty_distribution(
        cases in cases_strategy(4, 20),
        word in prop::collection::vec((0u32..5).prop_map(|i| Symbol::from_index(Symbol::FIRST_ACTIVITY + i)), 0..10),
        n in 1usize..=5,
    ) {
        let log: EventLog = cases.into_iter().collect();
        let f = build_ngram(&log, NGramConfig::new(n).unwrap());
        match predict_with_backoff(&f, &word) {
            Some(d) => prop_assert!((d.sum() - 1.0).abs() < 1e-9),
            None => prop_assert!(log.is_empty()),
        }
    }
}
