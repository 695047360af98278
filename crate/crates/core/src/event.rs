//! Activities, reserved symbols, events and multiset event logs.
//!
//! Every symbol the automata see is a [`Symbol`]: a dense index into an
//! extended alphabet where index 0 is the stop symbol, index 1 is the init
//! symbol and real activities start at index 2 in interning order.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, RwLock};

use thiserror::Error;

/// Surface form used for the stop symbol unless configured otherwise.
pub const DEFAULT_STOP_SENTINEL: &str = "__stop__";
/// Surface form used for the init symbol unless configured otherwise.
pub const DEFAULT_INIT_SENTINEL: &str = "__init__";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EventError {
    #[error("activity {0:?} collides with a reserved sentinel")]
    ReservedSymbol(String),
    #[error("activity names must be nonempty")]
    EmptyActivity,
    #[error("case identifiers must be nonempty")]
    EmptyCase,
    #[error("the empty sequence cannot be added to an event log")]
    EmptySequence,
    #[error("sentinels must be distinct and nonempty")]
    BadSentinels,
}

/// An element of the extended alphabet: stop, init, or an interned activity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(u32);

impl Symbol {
    pub const STOP: Symbol = Symbol(0);
    pub const INIT: Symbol = Symbol(1);

    /// Index of the first real activity.
    pub const FIRST_ACTIVITY: u32 = 2;

    pub fn from_index(index: u32) -> Self {
        Symbol(index)
    }

    pub fn index(self) -> u32 {
        self.0
    }

    pub fn is_activity(self) -> bool {
        self.0 >= Self::FIRST_ACTIVITY
    }

    pub fn is_reserved(self) -> bool {
        !self.is_activity()
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Symbol::STOP => f.write_str("<stop>"),
            Symbol::INIT => f.write_str("<init>"),
            Symbol(i) => write!(f, "#{i}"),
        }
    }
}

#[derive(Debug)]
struct AlphabetInner {
    names: Vec<String>,
    lookup: HashMap<String, Symbol>,
}

/// Growable, thread-safe interner from activity names to [`Symbol`]s.
///
/// The stop and init sentinels occupy indices 0 and 1 and can never be
/// interned as activities.
#[derive(Debug)]
pub struct Alphabet {
    inner: RwLock<AlphabetInner>,
}

impl Default for Alphabet {
    fn default() -> Self {
        Self::with_sentinels(DEFAULT_STOP_SENTINEL, DEFAULT_INIT_SENTINEL)
            .expect("default sentinels are valid")
    }
}

impl Alphabet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_sentinels(stop: &str, init: &str) -> Result<Self, EventError> {
        if stop.is_empty() || init.is_empty() || stop == init {
            return Err(EventError::BadSentinels);
        }
        Ok(Alphabet {
            inner: RwLock::new(AlphabetInner {
                names: vec![stop.to_string(), init.to_string()],
                lookup: HashMap::new(),
            }),
        })
    }

    pub fn stop_sentinel(&self) -> String {
        self.read().names[0].clone()
    }

    pub fn init_sentinel(&self) -> String {
        self.read().names[1].clone()
    }

    /// Returns the symbol for `surface`, extending the alphabet on first sight.
    pub fn intern(&self, surface: &str) -> Result<Symbol, EventError> {
        if let Some(sym) = self.get(surface)? {
            return Ok(sym);
        }
        let mut inner = self.inner.write().expect("alphabet lock poisoned");
        // another writer may have won the race
        if let Some(&sym) = inner.lookup.get(surface) {
            return Ok(sym);
        }
        let sym = Symbol(inner.names.len() as u32);
        inner.names.push(surface.to_string());
        inner.lookup.insert(surface.to_string(), sym);
        Ok(sym)
    }

    /// Looks up an activity without interning it.
    pub fn get(&self, surface: &str) -> Result<Option<Symbol>, EventError> {
        if surface.is_empty() {
            return Err(EventError::EmptyActivity);
        }
        let inner = self.read();
        if surface == inner.names[0] || surface == inner.names[1] {
            return Err(EventError::ReservedSymbol(surface.to_string()));
        }
        Ok(inner.lookup.get(surface).copied())
    }

    /// Resolves a surface form that may also be one of the sentinels.
    pub fn resolve(&self, surface: &str) -> Result<Symbol, EventError> {
        {
            let inner = self.read();
            if surface == inner.names[0] {
                return Ok(Symbol::STOP);
            }
            if surface == inner.names[1] {
                return Ok(Symbol::INIT);
            }
        }
        self.intern(surface)
    }

    pub fn name(&self, sym: Symbol) -> Option<String> {
        self.read().names.get(sym.0 as usize).cloned()
    }

    /// Number of real activities interned so far.
    pub fn activity_count(&self) -> usize {
        self.read().names.len() - Symbol::FIRST_ACTIVITY as usize
    }

    pub fn activities(&self) -> Vec<Symbol> {
        (Symbol::FIRST_ACTIVITY..self.read().names.len() as u32)
            .map(Symbol)
            .collect()
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, AlphabetInner> {
        self.inner.read().expect("alphabet lock poisoned")
    }
}

/// Case identifier. Integer ids are stringified on ingestion.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CaseId(Arc<str>);

impl CaseId {
    pub fn new(id: impl AsRef<str>) -> Result<Self, EventError> {
        let id = id.as_ref();
        if id.is_empty() {
            return Err(EventError::EmptyCase);
        }
        Ok(CaseId(Arc::from(id)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<u64> for CaseId {
    fn from(id: u64) -> Self {
        CaseId(Arc::from(id.to_string()))
    }
}

/// Interns case ids so repeated ids share one allocation.
#[derive(Debug, Default)]
pub struct CaseInterner {
    ids: HashMap<String, CaseId>,
}

impl CaseInterner {
    pub fn intern(&mut self, id: &str) -> Result<CaseId, EventError> {
        if let Some(c) = self.ids.get(id) {
            return Ok(c.clone());
        }
        let c = CaseId::new(id)?;
        self.ids.insert(id.to_string(), c.clone());
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub case: CaseId,
    pub activity: Symbol,
}

impl Event {
    pub fn new(case: CaseId, activity: Symbol) -> Self {
        Event { case, activity }
    }
}

/// A finite multiset of activity sequences, one entry per distinct case trace.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventLog {
    entries: BTreeMap<Vec<Symbol>, u64>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `multiplicity` copies of `trace`. Zero multiplicities are ignored.
    pub fn add(&mut self, trace: Vec<Symbol>, multiplicity: u64) -> Result<(), EventError> {
        if trace.is_empty() {
            return Err(EventError::EmptySequence);
        }
        if multiplicity > 0 {
            *self.entries.entry(trace).or_insert(0) += multiplicity;
        }
        Ok(())
    }

    pub fn multiplicity(&self, trace: &[Symbol]) -> u64 {
        self.entries.get(trace).copied().unwrap_or(0)
    }

    /// Distinct traces with their multiplicities, in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&[Symbol], u64)> {
        self.entries.iter().map(|(t, &m)| (t.as_slice(), m))
    }

    /// Total number of cases (sum of multiplicities).
    pub fn case_count(&self) -> u64 {
        self.entries.values().sum()
    }

    pub fn event_count(&self) -> u64 {
        self.entries.iter().map(|(t, &m)| t.len() as u64 * m).sum()
    }

    pub fn distinct_traces(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One trace per case, expanded by multiplicity, in lexicographic order.
    pub fn cases(&self) -> Vec<Vec<Symbol>> {
        let mut out = Vec::with_capacity(self.case_count() as usize);
        for (t, &m) in &self.entries {
            for _ in 0..m {
                out.push(t.clone());
            }
        }
        out
    }

    pub fn max_trace_len(&self) -> usize {
        self.entries.keys().map(Vec::len).max().unwrap_or(0)
    }
}

impl FromIterator<Vec<Symbol>> for EventLog {
    /// Collects traces as cases of multiplicity one each. Empty traces are skipped.
    fn from_iter<I: IntoIterator<Item = Vec<Symbol>>>(iter: I) -> Self {
        let mut log = EventLog::new();
        for t in iter {
            if !t.is_empty() {
                *log.entries.entry(t).or_insert(0) += 1;
            }
        }
        log
    }
}

/// Projects an interleaved stream onto its cases.
///
/// Events keep their order within a case; order across cases is discarded.
/// Init events are not part of any trace and are skipped.
pub fn log_from_stream<'a, I>(stream: I) -> EventLog
where
    I: IntoIterator<Item = &'a Event>,
{
    let mut order: Vec<CaseId> = Vec::new();
    let mut traces: HashMap<CaseId, Vec<Symbol>> = HashMap::new();
    for e in stream {
        if e.activity == Symbol::INIT {
            continue;
        }
        traces
            .entry(e.case.clone())
            .or_insert_with(|| {
                order.push(e.case.clone());
                Vec::new()
            })
            .push(e.activity);
    }
    order
        .into_iter()
        .filter_map(|c| traces.remove(&c))
        .collect()
}
