use crate::automaton::{Fdfa, StateId};
use crate::event::{EventLog, Symbol};

/// Frequency prefix tree: one state per seen prefix.
///
/// `f(s)(a)` counts the traces with prefix `access(s)·a`, `f(s)(stop)` the
/// traces equal to `access(s)`.
pub fn build_fpt(log: &EventLog) -> Fdfa {
    let mut fdfa = Fdfa::new();
    for (trace, m) in log.iter() {
        let mut s = StateId::ROOT;
        for (i, &a) in trace.iter().enumerate() {
            fdfa.freq_mut(s).add(a, m);
            s = match fdfa.next(s, a) {
                Some(t) => t,
                None => {
                    let t = fdfa.add_state(trace[..=i].to_vec());
                    fdfa.set_edge(s, a, t);
                    t
                }
            };
        }
        fdfa.freq_mut(s).add(Symbol::STOP, m);
    }
    fdfa
}
