//! Next-activity prediction over case-based event logs and event streams.
//!
//! Prediction models are frequency automata (prefix trees, n-grams, bags and
//! Alergia-merged automata) learned either in batch from an
//! [`EventLog`](event::EventLog) or online from an interleaved event stream,
//! optionally combined by [`ensemble`] voting and run inside the
//! [`pipeline`] runtime.

pub mod automaton;
pub mod ensemble;
pub mod event;
pub mod learn;
pub mod streaming;
pub mod pipeline;
pub mod ingest;
pub mod models;
pub mod eval;
