//! Fixtures shared by the integration tests: the two-activity example log
//! and generators for random logs and interleavings.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use streampredict::event::{Alphabet, CaseId, Event, EventLog, Symbol};

pub struct Example {
    pub alphabet: Alphabet,
    pub a: Symbol,
    pub b: Symbol,
    pub log: EventLog,
}

impl Example {
    /// Symbols of a word written with the letters `a` and `b`.
    pub fn w(&self, word: &str) -> Vec<Symbol> {
        word.chars()
            .map(|c| match c {
                'a' => self.a,
                'b' => self.b,
                other => panic!("letter {other} not in the example alphabet"),
            })
            .collect()
    }
}

/// L = {a^5, aa^3, aaa^3, aab^1, aaaa^1, b^9, ba^1, bb^5, bba^1, bbb^1}, 30 cases.
pub fn example() -> Example {
    let alphabet = Alphabet::new();
    let a = alphabet.intern("a").unwrap();
    let b = alphabet.intern("b").unwrap();
    let mut ex = Example {
        alphabet,
        a,
        b,
        log: EventLog::new(),
    };
    for (word, m) in [
        ("a", 5),
        ("aa", 3),
        ("aaa", 3),
        ("aab", 1),
        ("aaaa", 1),
        ("b", 9),
        ("ba", 1),
        ("bb", 5),
        ("bba", 1),
        ("bbb", 1),
    ] {
        let t = ex.w(word);
        ex.log.add(t, m).unwrap();
    }
    ex
}

/// A random list of cases over `sigma` activities (indices 2..2+sigma).
pub fn random_cases(rng: &mut ChaCha8Rng, sigma: u32, max_cases: usize, max_len: usize) -> Vec<Vec<Symbol>> {
    let n = rng.gen_range(0..=max_cases);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=max_len);
            (0..len)
                .map(|_| Symbol::from_index(Symbol::FIRST_ACTIVITY + rng.gen_range(0..sigma)))
                .collect()
        })
        .collect()
}

/// Interleaves the cases at random while keeping each case's own order.
pub fn interleave(rng: &mut ChaCha8Rng, cases: &[Vec<Symbol>]) -> Vec<Event> {
    let mut cursors: Vec<(usize, usize)> = (0..cases.len()).map(|i| (i, 0)).collect();
    cursors.shuffle(rng);
    let mut out = Vec::new();
    while !cursors.is_empty() {
        let k = rng.gen_range(0..cursors.len());
        let (case, pos) = cursors[k];
        out.push(Event::new(CaseId::from(case as u64), cases[case][pos]));
        if pos + 1 == cases[case].len() {
            cursors.swap_remove(k);
        } else {
            cursors[k].1 += 1;
        }
    }
    out
}

/// Events of `cases` interleaved according to `picks` (each pick selects
/// among the cases that still have events).
pub fn interleave_by(cases: &[Vec<Symbol>], picks: &[usize]) -> Vec<Event> {
    let mut cursors: Vec<(usize, usize)> = (0..cases.len()).map(|i| (i, 0)).collect();
    let mut out = Vec::new();
    let mut p = picks.iter().cycle();
    while !cursors.is_empty() {
        let k = p.next().copied().unwrap_or(0) % cursors.len();
        let (case, pos) = cursors[k];
        out.push(Event::new(CaseId::from(case as u64), cases[case][pos]));
        if pos + 1 == cases[case].len() {
            cursors.remove(k);
        } else {
            cursors[k].1 += 1;
        }
    }
    out
}
