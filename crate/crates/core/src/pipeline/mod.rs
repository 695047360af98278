//! A small stream-processing runtime.
//!
//! Computation is expressed as [`Term`]s (sources, functions, sinks and an
//! arrival-order merge) glued together with sequential (`*`) and parallel
//! (`|`) composition. [`run_pipeline`] starts one thread per term and
//! connects them through append-only [`DataStream`](StreamWriter)s.
//!
//! ```
//! use streampredict::pipeline::{run_pipeline, Record, Term, Value};
//!
//! let items = (0..3).map(|i| Record::from([("x".to_string(), Value::Int(i))]));
//! let double = Term::map("double", |r: &Record| {
//!     let x = r["x"].as_int()?;
//!     Some(Record::from([("x".to_string(), Value::Int(2 * x))]))
//! });
//! let handle = run_pipeline(Term::from_iter("numbers", items) * double).unwrap();
//! let out = handle.outputs()[0].clone();
//! handle.join().unwrap();
//! let xs: Vec<i64> = out.map(|d| d.record["x"].as_int().unwrap()).collect();
//! assert_eq!(xs, vec![0, 2, 4]);
//! ```

mod run;
mod stream;
mod term;

pub use run::{run_pipeline, run_pipeline_with, RunHandle};
pub use stream::{StreamConfig, StreamView, StreamWriter, DEFAULT_CAPACITY};
pub use term::{
    compose_parallel, compose_sequential, Arity, Emitter, FunctionTerm, SinkTerm, SourcePoll, SourceTerm, Term,
};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PipelineError {
    #[error("a sink has no output and cannot feed `{0}`")]
    SinkUpstream(String),
    #[error("`{downstream}` expects {expected} input(s) but receives {got}")]
    Arity {
        downstream: String,
        expected: String,
        got: usize,
    },
    #[error("parallel branches `{0}` and `{1}` need different inputs")]
    BranchMismatch(String, String),
    #[error("pipeline root needs {0} upstream input(s); it has no source")]
    NoSource(String),
    #[error("term `{0}` panicked")]
    TermPanicked(String),
    #[error("run was stopped")]
    Stopped,
    #[error("failed to spawn thread for `{0}`")]
    Spawn(String),
}

/// A loosely typed field value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Arc<str>),
}

impl Value {
    pub fn str(s: impl AsRef<str>) -> Self {
        Value::Str(Arc::from(s.as_ref()))
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_float(&self) -> Option<f64> {
        match self {
            Value::Float(f) => Some(*f),
            Value::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::str(s)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

/// Field map carried by a [`DataItem`].
pub type Record = BTreeMap<String, Value>;

/// One immutable element of a stream.
#[derive(Clone, Debug, PartialEq)]
pub struct DataItem {
    /// Position in the stream, starting at 0.
    pub seq: u64,
    /// Wall-clock time the item was appended.
    pub ingest: SystemTime,
    pub record: Record,
}

impl DataItem {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.record.get(key)
    }
}
