//! Plain-text adjacency dump of an [`Fdfa`].
//!
//! ```text
//! fdfa 1
//! alphabet ["a","b"]
//! state 0 access [] stop 0
//!   "a"(13) -> 1
//!   "b"(17) -> 2
//! state 1 access ["a"] stop 5
//!   "a"(8) -> 3
//!   "b"(0) -> 4
//! ```
//!
//! Names are JSON strings. Activities listed in the `alphabet` line are
//! interned in that order so symbol indices (and with them argmax
//! tie-breaking) survive a round trip. A count with no transition is
//! written with target `_`.

use std::fmt::Write as _;

use serde_json::Deserializer;
use thiserror::Error;

use super::{Fdfa, StateId};
use crate::event::{Alphabet, EventError, Symbol};

const MAGIC: &str = "fdfa 1";

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Symbol { line: usize, source: EventError },
    #[error("invalid automaton: {0}")]
    Invalid(String),
}

fn syntax(line: usize, msg: impl Into<String>) -> DumpError {
    DumpError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn name_of(alphabet: &Alphabet, s: Symbol) -> String {
    alphabet.name(s).unwrap_or_else(|| format!("#{}", s.index()))
}

fn quoted(name: &str) -> String {
    serde_json::to_string(name).expect("strings always serialize")
}

/// Renders `fdfa` with activity names taken from `alphabet`.
pub fn write_dump(fdfa: &Fdfa, alphabet: &Alphabet) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let names: Vec<String> = alphabet
        .activities()
        .into_iter()
        .map(|s| name_of(alphabet, s))
        .collect();
    let _ = writeln!(out, "alphabet {}", serde_json::to_string(&names).unwrap());
    for (id, st) in fdfa.states() {
        let access: Vec<String> = st.access.iter().map(|&s| name_of(alphabet, s)).collect();
        let _ = writeln!(
            out,
            "state {} access {} stop {}",
            id,
            serde_json::to_string(&access).unwrap(),
            st.freq.get(Symbol::STOP)
        );
        let mut edges = st.edges().iter().peekable();
        for (sym, count) in st.freq.iter().filter(|&(s, _)| s != Symbol::STOP) {
            while let Some(&&(e, t)) = edges.peek() {
                if e >= sym {
                    break;
                }
                let _ = writeln!(out, "  {}(0) -> {}", quoted(&name_of(alphabet, e)), t);
                edges.next();
            }
            let target = match edges.peek() {
                Some(&&(e, t)) if e == sym => {
                    edges.next();
                    t.to_string()
                }
                _ => "_".to_string(),
            };
            let _ = writeln!(
                out,
                "  {}({}) -> {}",
                quoted(&name_of(alphabet, sym)),
                count,
                target
            );
        }
        for &(e, t) in edges {
            let _ = writeln!(out, "  {}(0) -> {}", quoted(&name_of(alphabet, e)), t);
        }
    }
    out
}

/// Reads the JSON value at the start of `text`, returning it and the rest.
fn json_prefix<'a, T: serde::de::DeserializeOwned>(
    text: &'a str,
    line: usize,
) -> Result<(T, &'a str), DumpError> {
    let mut it = Deserializer::from_str(text).into_iter::<T>();
    match it.next() {
        Some(Ok(v)) => Ok((v, &text[it.byte_offset()..])),
        Some(Err(e)) => Err(syntax(line, e.to_string())),
        None => Err(syntax(line, "expected a JSON value")),
    }
}

fn expect_keyword<'a>(text: &'a str, kw: &str, line: usize) -> Result<&'a str, DumpError> {
    text.trim_start()
        .strip_prefix(kw)
        .ok_or_else(|| syntax(line, format!("expected `{kw}`")))
}

fn parse_u64(text: &str, what: &str, line: usize) -> Result<u64, DumpError> {
    text.trim()
        .parse()
        .map_err(|_| syntax(line, format!("bad {what}: {text:?}")))
}

struct PendingEdge {
    from: StateId,
    sym: Symbol,
    count: u64,
    target: Option<u64>,
    line: usize,
}

/// Parses a dump, validating determinism and target ranges.
pub fn parse_dump(text: &str, alphabet: &Alphabet) -> Result<Fdfa, DumpError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(syntax(1, format!("missing `{MAGIC}` header"))),
    }
    let mut fdfa: Option<Fdfa> = None;
    let mut current: Option<StateId> = None;
    let mut pending: Vec<PendingEdge> = Vec::new();
    let resolve = |name: &str, line: usize| {
        alphabet
            .resolve(name)
            .map_err(|source| DumpError::Symbol { line, source })
    };

    for (ln, raw) in lines {
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        if let Some(rest) = raw.strip_prefix("alphabet ") {
            let (names, tail): (Vec<String>, _) = json_prefix(rest, ln)?;
            if !tail.trim().is_empty() {
                return Err(syntax(ln, "trailing input after alphabet"));
            }
            for n in names {
                resolve(&n, ln)?;
            }
        } else if let Some(rest) = raw.strip_prefix("state ") {
            let rest = rest.trim_start();
            let split = rest
                .find(char::is_whitespace)
                .ok_or_else(|| syntax(ln, "truncated state line"))?;
            let id = parse_u64(&rest[..split], "state id", ln)?;
            let rest = expect_keyword(&rest[split..], "access", ln)?;
            let (access, rest): (Vec<String>, _) = json_prefix(rest, ln)?;
            let rest = expect_keyword(rest, "stop", ln)?;
            let stop = parse_u64(rest, "stop count", ln)?;
            let access = access
                .iter()
                .map(|n| resolve(n, ln))
                .collect::<Result<Vec<_>, _>>()?;
            let expected = fdfa.as_ref().map_or(0, Fdfa::len) as u64;
            if id != expected {
                return Err(syntax(ln, format!("expected state {expected}, found {id}")));
            }
            let sid = match fdfa.as_mut() {
                None => {
                    let mut a = Fdfa::new();
                    a.states[0].access = access;
                    fdfa = Some(a);
                    StateId::ROOT
                }
                Some(a) => a.add_state(access),
            };
            fdfa.as_mut()
                .unwrap()
                .freq_mut(sid)
                .add(Symbol::STOP, stop);
            current = Some(sid);
        } else if raw.starts_with(char::is_whitespace) {
            let from = current.ok_or_else(|| syntax(ln, "transition before any state"))?;
            let (name, rest): (String, _) = json_prefix(raw.trim_start(), ln)?;
            let sym = resolve(&name, ln)?;
            if !sym.is_activity() && sym != Symbol::INIT {
                return Err(syntax(ln, "transitions on the stop symbol are not allowed"));
            }
            let rest = rest
                .strip_prefix('(')
                .ok_or_else(|| syntax(ln, "expected `(`"))?;
            let close = rest.find(')').ok_or_else(|| syntax(ln, "expected `)`"))?;
            let count = parse_u64(&rest[..close], "count", ln)?;
            let rest = expect_keyword(&rest[close + 1..], "->", ln)?.trim();
            let target = if rest == "_" {
                None
            } else {
                Some(parse_u64(rest, "target", ln)?)
            };
            pending.push(PendingEdge {
                from,
                sym,
                count,
                target,
                line: ln,
            });
        } else {
            return Err(syntax(ln, format!("unrecognized line {raw:?}")));
        }
    }

    let mut fdfa = fdfa.ok_or_else(|| DumpError::Invalid("no states".into()))?;
    let n = fdfa.len() as u64;
    for e in pending {
        if fdfa.freq(e.from).get(e.sym) > 0 || fdfa.next(e.from, e.sym).is_some() {
            return Err(DumpError::Invalid(format!(
                "line {}: state {} has two entries for {:?}",
                e.line, e.from, e.sym
            )));
        }
        if let Some(t) = e.target {
            if t >= n {
                return Err(DumpError::Invalid(format!(
                    "line {}: target {t} out of range ({n} states)",
                    e.line
                )));
            }
            fdfa.set_edge(e.from, e.sym, StateId(t as u32));
        }
        fdfa.freq_mut(e.from).add(e.sym, e.count);
    }
    Ok(fdfa)
}

/// Structural summary printed by `inspect`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Summary {
    pub states: usize,
    pub transitions: usize,
    pub zero_count_transitions: usize,
    pub dangling_counts: usize,
    pub total_mass: u64,
    pub stop_mass: u64,
    pub empty_states: usize,
    pub unreachable_states: usize,
}

pub fn summarize(fdfa: &Fdfa) -> Summary {
    let mut reachable = vec![false; fdfa.len()];
    let mut stack = vec![StateId::ROOT];
    reachable[0] = true;
    while let Some(s) = stack.pop() {
        for &(_, t) in fdfa.state(s).edges() {
            if !reachable[t.index()] {
                reachable[t.index()] = true;
                stack.push(t);
            }
        }
    }
    let mut zero = 0;
    let mut dangling = 0;
    for (_, st) in fdfa.states() {
        zero += st
            .edges()
            .iter()
            .filter(|&&(a, _)| st.freq.get(a) == 0)
            .count();
        dangling += st
            .freq
            .iter()
            .filter(|&(a, _)| a != Symbol::STOP && st.edges().iter().all(|&(e, _)| e != a))
            .count();
    }
    Summary {
        states: fdfa.len(),
        transitions: fdfa.edge_count(),
        zero_count_transitions: zero,
        dangling_counts: dangling,
        total_mass: fdfa.total_mass(),
        stop_mass: fdfa.total_stop(),
        empty_states: fdfa.states().filter(|(_, s)| s.freq.is_empty()).count(),
        unreachable_states: reachable.iter().filter(|r| !**r).count(),
    }
}
