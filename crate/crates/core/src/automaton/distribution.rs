use crate::event::Symbol;

use super::AutomatonError;

/// Probability vector over the extended alphabet.
///
/// Entries are kept sorted by symbol index and only positive probabilities
/// are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    probs: Vec<(Symbol, f64)>,
}

impl Distribution {
    pub(crate) fn from_counts(counts: impl Iterator<Item = (Symbol, u64)>, total: u64) -> Self {
        let total = total as f64;
        Distribution {
            probs: counts
                .filter(|&(_, c)| c > 0)
                .map(|(s, c)| (s, c as f64 / total))
                .collect(),
        }
    }

    /// Builds a distribution from arbitrary nonnegative weights, normalizing
    /// them. Returns `None` when the weights sum to zero.
    pub fn from_weights(weights: impl IntoIterator<Item = (Symbol, f64)>) -> Option<Self> {
        let mut probs: Vec<(Symbol, f64)> = Vec::new();
        for (s, w) in weights {
            if w > 0.0 {
                match probs.binary_search_by_key(&s, |&(a, _)| a) {
                    Ok(i) => probs[i].1 += w,
                    Err(i) => probs.insert(i, (s, w)),
                }
            }
        }
        let total: f64 = probs.iter().map(|&(_, p)| p).sum();
        if total <= 0.0 {
            return None;
        }
        for p in &mut probs {
            p.1 /= total;
        }
        Some(Distribution { probs })
    }

    /// All mass on `sym`.
    pub fn dirac(sym: Symbol) -> Self {
        Distribution {
            probs: vec![(sym, 1.0)],
        }
    }

    pub fn prob(&self, sym: Symbol) -> f64 {
        self.probs
            .binary_search_by_key(&sym, |&(a, _)| a)
            .map(|i| self.probs[i].1)
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Symbol, f64)> + '_ {
        self.probs.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().map(|&(_, p)| p).sum()
    }

    /// Most probable symbol; ties go to the smallest symbol index.
    pub fn argmax(&self) -> Option<Symbol> {
        let mut best: Option<(Symbol, f64)> = None;
        for &(s, p) in &self.probs {
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((s, p));
            }
        }
        best.map(|(s, _)| s)
    }

    /// Drops the stop and init symbols and renormalizes.
    pub fn activities_only(&self) -> Option<Distribution> {
        Distribution::from_weights(self.probs.iter().copied().filter(|(s, _)| s.is_activity()))
    }

    /// Unweighted mean of the given distributions. `None` for an empty input.
    pub fn mean<'a>(dists: impl IntoIterator<Item = &'a Distribution>) -> Option<Distribution> {
        let mut acc: Vec<(Symbol, f64)> = Vec::new();
        let mut k = 0usize;
        for d in dists {
            k += 1;
            for &(s, p) in &d.probs {
                match acc.binary_search_by_key(&s, |&(a, _)| a) {
                    Ok(i) => acc[i].1 += p,
                    Err(i) => acc.insert(i, (s, p)),
                }
            }
        }
        if k == 0 {
            return None;
        }
        let k = k as f64;
        Some(Distribution {
            probs: acc.into_iter().map(|(s, p)| (s, p / k)).collect(),
        })
    }
}

/// Symbol of maximal probability, ties broken by smallest extended index
/// (stop, then init, then activities in interning order).
pub fn argmax_symbol(d: &Distribution) -> Result<Symbol, AutomatonError> {
    d.argmax().ok_or(AutomatonError::EmptyDistribution)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(i: u32) -> Symbol {
        Symbol::from_index(i)
    }

    #[test]
    fn argmax_prefers_stop_in_aa_state() {
        let d = Distribution::from_counts(
            [(Symbol::STOP, 7), (sym(2), 5), (sym(3), 1)].into_iter(),
            13,
        );
        assert_eq!(argmax_symbol(&d), Ok(Symbol::STOP));
    }

    #[test]
    fn argmax_ties_by_index() {
        let d = Distribution::from_weights([(sym(3), 0.5), (sym(2), 0.5)]).unwrap();
        assert_eq!(argmax_symbol(&d), Ok(sym(2)));
        assert_eq!(argmax_symbol(&Distribution::dirac(sym(3))), Ok(sym(3)));
    }

    #[test]
    fn argmax_of_empty_is_error() {
        let d = Distribution { probs: vec![] };
        assert_eq!(argmax_symbol(&d), Err(AutomatonError::EmptyDistribution));
        assert!(Distribution::from_weights([(sym(2), 0.0)]).is_none());
    }

    #[test]
    fn mean_of_two() {
        let a = Distribution::from_weights([(sym(2), 0.6), (Symbol::STOP, 0.4)]).unwrap();
        let b = Distribution::from_weights([(sym(2), 0.2), (sym(3), 0.8)]).unwrap();
        let m = Distribution::mean([&a, &b]).unwrap();
        assert!((m.prob(sym(2)) - 0.4).abs() < 1e-12);
        assert!((m.prob(sym(3)) - 0.4).abs() < 1e-12);
        assert!((m.prob(Symbol::STOP) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn reserved_symbols_can_be_masked() {
        let d = Distribution::from_weights([(Symbol::STOP, 0.5), (sym(2), 0.25), (sym(3), 0.25)])
            .unwrap();
        let m = d.activities_only().unwrap();
        assert_eq!(m.prob(sym(2)), 0.5);
        assert!(Distribution::dirac(Symbol::STOP).activities_only().is_none());
    }
}
