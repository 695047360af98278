//! Batch construction of frequency automata from an [`EventLog`](crate::event::EventLog).

mod alergia;
pub(crate) mod bag;
mod fpt;
pub(crate) mod ngram;

pub use alergia::{alergia, hoeffding_compatible, AlergiaConfig};
pub use bag::build_bag;
pub use fpt::build_fpt;
pub use ngram::{build_ngram, fold_fpt_to_ngram, predict_with_backoff, NGramConfig};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LearnError {
    #[error("n-gram window must be at least 1")]
    ZeroWindow,
    #[error("significance must lie in (0, 1], got {0}")]
    BadSignificance(f64),
    #[error("frequency vector with total 0 cannot be tested")]
    EmptyFrequencies,
}
