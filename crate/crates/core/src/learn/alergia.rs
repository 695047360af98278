//! Alergia state merging over a frequency prefix tree.
//!
//! Red-blue merging: red states are final, blue states are the non-red
//! successors of red states and still roots of untouched subtrees. The
//! shortlex-smallest blue state is merged into the first compatible red
//! state, or promoted to red when none is compatible.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::automaton::{Fdfa, FrequencyVector, StateId};
use crate::event::Symbol;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlergiaConfig {
    pub alpha: f64,
}

impl AlergiaConfig {
    pub fn new(alpha: f64) -> Result<Self, LearnError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(LearnError::BadSignificance(alpha));
        }
        Ok(AlergiaConfig { alpha })
    }
}

fn hoeffding_bound(n1: u64, n2: u64, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / 2.0).sqrt() * (1.0 / (n1 as f64).sqrt() + 1.0 / (n2 as f64).sqrt())
}

fn compatible_counts(f1: &FrequencyVector, f2: &FrequencyVector, alpha: f64) -> bool {
    let (n1, n2) = (f1.total(), f2.total());
    let bound = hoeffding_bound(n1, n2, alpha);
    let (n1, n2) = (n1 as f64, n2 as f64);
    let mut a = f1.iter().peekable();
    let mut b = f2.iter().peekable();
    loop {
        let (c1, c2) = match (a.peek().copied(), b.peek().copied()) {
            (None, None) => return true,
            (Some((s1, c1)), Some((s2, c2))) => match s1.cmp(&s2) {
                Ordering::Equal => {
                    a.next();
                    b.next();
                    (c1, c2)
                }
                Ordering::Less => {
                    a.next();
                    (c1, 0)
                }
                Ordering::Greater => {
                    b.next();
                    (0, c2)
                }
            },
            (Some((_, c1)), None) => {
                a.next();
                (c1, 0)
            }
            (None, Some((_, c2))) => {
                b.next();
                (0, c2)
            }
        };
        if (c1 as f64 / n1 - c2 as f64 / n2).abs() >= bound {
            return false;
        }
    }
}

/// Hoeffding compatibility test between two states' counts: for every
/// symbol the observed relative frequencies differ by less than
/// `sqrt(ln(2/alpha)/2) * (1/sqrt(n1) + 1/sqrt(n2))`.
pub fn hoeffding_compatible(
    f1: &FrequencyVector,
    f2: &FrequencyVector,
    alpha: f64,
) -> Result<bool, LearnError> {
    if f1.total() == 0 || f2.total() == 0 {
        return Err(LearnError::EmptyFrequencies);
    }
    Ok(compatible_counts(f1, f2, alpha))
}

struct Work {
    freq: Vec<FrequencyVector>,
    edges: Vec<BTreeMap<Symbol, usize>>,
    access: Vec<Vec<Symbol>>,
}

impl Work {
    fn from_fdfa(fpt: &Fdfa) -> Self {
        let mut w = Work {
            freq: Vec::with_capacity(fpt.len()),
            edges: Vec::with_capacity(fpt.len()),
            access: Vec::with_capacity(fpt.len()),
        };
        for (_, st) in fpt.states() {
            w.freq.push(st.freq.clone());
            w.edges
                .push(st.edges().iter().map(|&(a, t)| (a, t.index())).collect());
            w.access.push(st.access.clone());
        }
        w
    }

    /// `red` and the tree rooted at `blue` agree on every pair of states
    /// reached by the same word. Zero-total states are not tested.
    fn compatible(&self, red: usize, blue: usize, alpha: f64) -> bool {
        let mut stack = vec![(red, blue)];
        while let Some((r, b)) = stack.pop() {
            let (fr, fb) = (&self.freq[r], &self.freq[b]);
            if fr.total() > 0 && fb.total() > 0 && !compatible_counts(fr, fb, alpha) {
                return false;
            }
            for (a, &tb) in &self.edges[b] {
                if let Some(&tr) = self.edges[r].get(a) {
                    stack.push((tr, tb));
                }
            }
        }
        true
    }

    /// Folds the subtree at `blue` into `red`, merging successors that
    /// would otherwise make the automaton nondeterministic.
    fn fold(&mut self, red: usize, blue: usize) {
        let mut stack = vec![(red, blue)];
        while let Some((r, b)) = stack.pop() {
            let fb = std::mem::take(&mut self.freq[b]);
            self.freq[r].merge(&fb);
            let eb = std::mem::take(&mut self.edges[b]);
            for (a, tb) in eb {
                match self.edges[r].get(&a) {
                    Some(&tr) => stack.push((tr, tb)),
                    None => {
                        self.edges[r].insert(a, tb);
                    }
                }
            }
        }
    }

    fn into_fdfa(self) -> Fdfa {
        let mut out = Fdfa::new();
        let mut map: Vec<Option<StateId>> = vec![None; self.freq.len()];
        map[0] = Some(StateId::ROOT);
        let mut queue = std::collections::VecDeque::from([0usize]);
        let mut order = vec![0usize];
        while let Some(s) = queue.pop_front() {
            for &t in self.edges[s].values() {
                if map[t].is_none() {
                    map[t] = Some(out.add_state(self.access[t].clone()));
                    order.push(t);
                    queue.push_back(t);
                }
            }
        }
        out.freq_mut(StateId::ROOT).merge(&self.freq[0]);
        for &s in &order {
            let id = map[s].unwrap();
            if s != 0 {
                out.freq_mut(id).merge(&self.freq[s]);
            }
            for (&a, &t) in &self.edges[s] {
                out.set_edge(id, a, map[t].unwrap());
            }
        }
        out
    }
}

fn shortlex(a: &[Symbol], b: &[Symbol]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

/// Runs Alergia on a tree-shaped automaton (as built by
/// [`build_fpt`](super::build_fpt)) and returns the merged automaton.
pub fn alergia(fpt: &Fdfa, cfg: AlergiaConfig) -> Fdfa {
    let mut w = Work::from_fdfa(fpt);
    let mut red = vec![0usize];
    let mut is_red = vec![false; w.freq.len()];
    is_red[0] = true;
    loop {
        // blue states keep a unique (red) parent
        let mut blue: Option<(usize, usize, Symbol)> = None;
        for &r in &red {
            for (&a, &t) in &w.edges[r] {
                if is_red[t] {
                    continue;
                }
                let better = match blue {
                    None => true,
                    Some((b, _, _)) => shortlex(&w.access[t], &w.access[b]).is_lt(),
                };
                if better {
                    blue = Some((t, r, a));
                }
            }
        }
        let Some((b, parent, via)) = blue else { break };
        match red.iter().copied().find(|&r| w.compatible(r, b, cfg.alpha)) {
            Some(r) => {
                w.edges[parent].insert(via, r);
                w.fold(r, b);
            }
            None => {
                red.push(b);
                is_red[b] = true;
            }
        }
    }
    w.into_fdfa()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::EventLog;
    use crate::learn::build_fpt;

    fn sym(i: u32) -> Symbol {
        Symbol::from_index(i)
    }

    fn fv(pairs: &[(u32, u64)]) -> FrequencyVector {
        pairs.iter().map(|&(s, c)| (sym(s), c)).collect()
    }

    #[test]
    fn bound_value() {
        // sqrt(ln 4 / 2) * (0.1 + 0.1)
        let b = hoeffding_bound(100, 100, 0.5);
        assert!((b - 0.166_511).abs() < 1e-5, "{b}");
    }

    #[test]
    fn compatible_within_bound() {
        let f1 = fv(&[(2, 50), (3, 50)]);
        let f2 = fv(&[(2, 60), (3, 40)]);
        assert_eq!(hoeffding_compatible(&f1, &f2, 0.5), Ok(true));
        assert_eq!(hoeffding_compatible(&f1, &f1, 1.0), Ok(true));
        assert_eq!(hoeffding_compatible(&f1, &f1, 1e-12), Ok(true));
    }

    #[test]
    fn disjoint_support_incompatible() {
        let f1 = fv(&[(2, 100)]);
        let f2 = fv(&[(3, 100)]);
        assert_eq!(hoeffding_compatible(&f1, &f2, 0.5), Ok(false));
        assert_eq!(
            hoeffding_compatible(&f1, &FrequencyVector::new(), 0.5),
            Err(LearnError::EmptyFrequencies)
        );
    }

    #[test]
    fn significance_is_validated() {
        assert!(AlergiaConfig::new(0.0).is_err());
        assert!(AlergiaConfig::new(1.5).is_err());
        assert!(AlergiaConfig::new(f64::NAN).is_err());
        assert!(AlergiaConfig::new(1.0).is_ok());
    }

    fn symmetric_log() -> EventLog {
        let (a, b, c) = (sym(2), sym(3), sym(4));
        let mut log = EventLog::new();
        log.add(vec![a, c], 50).unwrap();
        log.add(vec![b, c], 50).unwrap();
        log
    }

    #[test]
    fn symmetric_subtrees_merge() {
        let fpt = build_fpt(&symmetric_log());
        assert_eq!(fpt.len(), 5);
        let merged = alergia(&fpt, AlergiaConfig::new(0.5).unwrap());
        // the two two-state subtrees under a and b become one
        assert_eq!(merged.len(), 3);
        assert_eq!(merged.total_mass(), fpt.total_mass());
        let sa = merged.next(StateId::ROOT, sym(2)).unwrap();
        assert_eq!(merged.next(StateId::ROOT, sym(3)), Some(sa));
    }

    #[test]
    fn tiny_alpha_collapses_everything() {
        let fpt = build_fpt(&symmetric_log());
        let merged = alergia(&fpt, AlergiaConfig::new(1e-300).unwrap());
        assert_eq!(merged.len(), 1);
        assert_eq!(merged.total_mass(), fpt.total_mass());
        assert_eq!(merged.total_stop(), 100);
    }
}
