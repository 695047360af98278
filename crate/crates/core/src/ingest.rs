//! Loading benchmark event logs from CSV, ordering them into streams and
//! splitting them into train/validation/test logs.

use std::collections::HashSet;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{
    Alphabet, CaseId, CaseInterner, Event, EventError, EventLog, Symbol, DEFAULT_INIT_SENTINEL,
    DEFAULT_STOP_SENTINEL,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {source}")]
    Csv {
        row: u64,
        #[source]
        source: csv::Error,
    },
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("row {row}: empty value in column {column:?}")]
    EmptyField { row: u64, column: String },
    #[error("row {row}: cannot parse timestamp {value:?}")]
    BadTimestamp { row: u64, value: String },
    #[error("row {row}: {source}")]
    Event {
        row: u64,
        #[source]
        source: EventError,
    },
    #[error("case and activity must come from different columns (both {0:?})")]
    SameColumns(String),
    #[error("invalid split: {0}")]
    BadSplit(String),
    #[error(transparent)]
    Sentinels(#[from] EventError),
}

/// How events are put in stream order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventOrder {
    /// Stable sort by the timestamp column; ties keep file order.
    #[default]
    Timestamp,
    FileOrder,
}

fn default_case_column() -> String {
    "case_id".into()
}
fn default_activity_column() -> String {
    "activity".into()
}
fn default_timestamp_column() -> String {
    "timestamp".into()
}
fn default_stop() -> String {
    DEFAULT_STOP_SENTINEL.into()
}
fn default_init() -> String {
    DEFAULT_INIT_SENTINEL.into()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    #[serde(default = "default_case_column")]
    pub case_column: String,
    #[serde(default = "default_activity_column")]
    pub activity_column: String,
    #[serde(default = "default_timestamp_column")]
    pub timestamp_column: String,
    #[serde(default)]
    pub ordering: EventOrder,
    #[serde(default = "default_stop")]
    pub stop_sentinel: String,
    #[serde(default = "default_init")]
    pub init_sentinel: String,
}

impl DatasetConfig {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        DatasetConfig {
            path: path.into(),
            case_column: default_case_column(),
            activity_column: default_activity_column(),
            timestamp_column: default_timestamp_column(),
            ordering: EventOrder::default(),
            stop_sentinel: default_stop(),
            init_sentinel: default_init(),
        }
    }

    pub fn ordering(mut self, ordering: EventOrder) -> Self {
        self.ordering = ordering;
        self
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.case_column == self.activity_column {
            return Err(IngestError::SameColumns(self.case_column.clone()));
        }
        Alphabet::with_sentinels(&self.stop_sentinel, &self.init_sentinel)?;
        Ok(())
    }

    /// A fresh alphabet using this dataset's sentinels.
    pub fn alphabet(&self) -> Result<Alphabet, IngestError> {
        Ok(Alphabet::with_sentinels(&self.stop_sentinel, &self.init_sentinel)?)
    }
}

/// An ordered event stream together with the alphabet it was interned into.
#[derive(Debug)]
pub struct EventStream {
    pub events: Vec<Event>,
    pub alphabet: Arc<Alphabet>,
}

impl EventStream {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn case_count(&self) -> usize {
        self.events.iter().map(|e| &e.case).collect::<HashSet<_>>().len()
    }

    /// Distinct activities occurring in the stream.
    pub fn activity_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.activity.is_activity())
            .map(|e| e.activity)
            .collect::<HashSet<_>>()
            .len()
    }

    /// The log of complete cases.
    pub fn log(&self) -> EventLog {
        crate::event::log_from_stream(&self.events)
    }
}

/// Parses the ISO-8601 shapes found in benchmark exports. Values without an
/// offset are taken as UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f%:z", "%Y-%m-%d %H:%M:%S%.f%z", "%Y-%m-%dT%H:%M:%S%.f%z"] {
        if let Ok(t) = DateTime::parse_from_str(s, fmt) {
            return Some(t.with_timezone(&Utc));
        }
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc())
}

/// Loads the CSV named by `cfg` into an ordered stream.
pub fn load_event_stream(cfg: &DatasetConfig) -> Result<EventStream, IngestError> {
    let file = File::open(&cfg.path).map_err(|source| IngestError::Io {
        path: cfg.path.clone(),
        source,
    })?;
    let alphabet = Arc::new(cfg.alphabet()?);
    let events = read_events(file, cfg, &alphabet)?;
    Ok(EventStream { events, alphabet })
}

/// Like [`load_event_stream`] but reading from any source and interning into
/// an existing alphabet.
pub fn read_events<R: Read>(reader: R, cfg: &DatasetConfig, alphabet: &Alphabet) -> Result<Vec<Event>, IngestError> {
    cfg.validate()?;
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|source| IngestError::Csv { row: 1, source })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Vec::new());
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let case_col = column(&cfg.case_column)?;
    let act_col = column(&cfg.activity_column)?;
    let ts_col = match cfg.ordering {
        EventOrder::Timestamp => Some(column(&cfg.timestamp_column)?),
        EventOrder::FileOrder => None,
    };

    let mut cases = CaseInterner::default();
    let mut rows: Vec<(Option<DateTime<Utc>>, Event)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| IngestError::Csv {
            row: source.position().map_or(0, |p| p.line()),
            source,
        })?;
        let row = rec.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<&str, IngestError> {
            match rec.get(i).map(str::trim) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(IngestError::EmptyField {
                    row,
                    column: name.to_string(),
                }),
            }
        };
        let case = cases
            .intern(field(case_col, &cfg.case_column)?)
            .map_err(|source| IngestError::Event { row, source })?;
        let activity = alphabet
            .intern(field(act_col, &cfg.activity_column)?)
            .map_err(|source| IngestError::Event { row, source })?;
        let ts = match ts_col {
            Some(i) => {
                let raw = field(i, &cfg.timestamp_column)?;
                Some(parse_timestamp(raw).ok_or_else(|| IngestError::BadTimestamp {
                    row,
                    value: raw.to_string(),
                })?)
            }
            None => None,
        };
        rows.push((ts, Event::new(case, activity)));
    }
    if ts_col.is_some() {
        rows.sort_by_key(|(ts, _)| *ts);
    }
    Ok(rows.into_iter().map(|(_, e)| e).collect())
}

/// Inserts an init event before the first event of every case.
pub fn add_start_symbols(events: &[Event]) -> Vec<Event> {
    let mut seen: HashSet<&CaseId> = HashSet::new();
    let mut out = Vec::with_capacity(events.len() + events.len() / 4);
    for e in events {
        if e.activity != Symbol::INIT && seen.insert(&e.case) {
            out.push(Event::new(e.case.clone(), Symbol::INIT));
        }
        out.push(e.clone());
    }
    out
}

/// Fractions of cases for training, validation and test, plus the shuffle seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.70,
            val: 0.15,
            test: 0.15,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(IngestError::BadSplit("fractions must be finite and nonnegative".into()));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(IngestError::BadSplit(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Case counts for `n` cases: floor for train and validation, the rest to test.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let take = |f: f64| ((n as f64 * f + 1e-9).floor() as usize).min(n);
        let train = take(self.train);
        let val = take(self.val).min(n - train);
        (train, val, n - train - val)
    }
}

/// Shuffles `items` with the spec's seed and cuts them into three parts.
pub fn split_items<T>(mut items: Vec<T>, spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>, Vec<T>), IngestError> {
    spec.validate()?;
    let (train, val, _) = spec.counts(items.len());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    items.shuffle(&mut rng);
    let test = items.split_off(train + val);
    let val_part = items.split_off(train);
    Ok((items, val_part, test))
}

/// Case-level train/validation/test split of a log.
pub fn split_log(log: &EventLog, spec: &SplitSpec) -> Result<(EventLog, EventLog, EventLog), IngestError> {
    let (a, b, c) = split_items(log.cases(), spec)?;
    Ok((a.into_iter().collect(), b.into_iter().collect(), c.into_iter().collect()))
}

/// Existence check used by callers that want a dataset error before loading.
pub fn dataset_exists(cfg: &DatasetConfig) -> bool {
    Path::new(&cfg.path).is_file()
}
