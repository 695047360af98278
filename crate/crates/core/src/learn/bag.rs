use std::collections::HashMap;

use crate::automaton::{Fdfa, StateId};
use crate::event::{EventLog, Symbol};

/// Maps activity sets (sorted, deduplicated) to bag states.
#[derive(Clone, Debug)]
pub(crate) struct BagIndex {
    states: HashMap<Vec<Symbol>, StateId>,
}

impl Default for BagIndex {
    fn default() -> Self {
        let mut states = HashMap::new();
        states.insert(Vec::new(), StateId::ROOT);
        BagIndex { states }
    }
}

impl BagIndex {
    pub fn step(&mut self, fdfa: &mut Fdfa, s: StateId, sym: Symbol) -> StateId {
        if let Some(t) = fdfa.next(s, sym) {
            return t;
        }
        let mut key = fdfa.access(s).to_vec();
        if let Err(i) = key.binary_search(&sym) {
            key.insert(i, sym);
        }
        let t = match self.states.get(&key) {
            Some(&t) => t,
            None => {
                let t = fdfa.add_state(key.clone());
                self.states.insert(key, t);
                t
            }
        };
        fdfa.set_edge(s, sym, t);
        t
    }
}

/// Bag automaton: a state is the set of activities seen so far in a case.
pub fn build_bag(log: &EventLog) -> Fdfa {
    let mut fdfa = Fdfa::new();
    let mut index = BagIndex::default();
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
