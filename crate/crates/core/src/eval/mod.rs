//! Accuracy and latency evaluation in batch and streaming mode, plus the
//! table and curve writers.

mod batch;
mod streaming;

pub use batch::{evaluate_batch, run_batch, AveragedReport, AveragedRow, BatchRun};
pub use streaming::{
    evaluate_streaming, evaluate_streaming_model, evaluate_streaming_pipeline, event_record, record_event,
    AddStartSymbol, EvalTerm, ACTIVITY_KEY, CASE_KEY,
};

use std::fs;
use std::io;
use std::path::Path;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::IngestError;
use crate::models::ModelError;
use crate::pipeline::PipelineError;
use crate::streaming::PredictorStats;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("malformed verdict stream `{stream}`: {msg}")]
    Verdict { stream: String, msg: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// Results of one model over one evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelReport {
    pub model: String,
    pub predictions: u64,
    pub correct: u64,
    /// Automaton size at the end of the run, for automaton models.
    pub states: Option<usize>,
    pub mean_latency_ms: Option<f64>,
    pub median_latency_ms: Option<f64>,
    /// Accuracy over the first `i + 1` predictions, for every `i`.
    pub rolling: Vec<f64>,
}

impl ModelReport {
    /// `correct / predictions`; `None` when nothing was predicted.
    pub fn accuracy(&self) -> Option<f64> {
        (self.predictions > 0).then(|| self.correct as f64 / self.predictions as f64)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub models: Vec<ModelReport>,
}

impl EvalReport {
    pub fn get(&self, model: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == model)
    }

    pub fn to_table(&self) -> Vec<TableRow> {
        self.models
            .iter()
            .map(|m| TableRow {
                model: m.model.clone(),
                accuracy_pct: m.accuracy().map(|a| 100.0 * a),
                states: m.states.map(|s| s as f64),
                mean_latency_ms: m.mean_latency_ms,
            })
            .collect()
    }
}

/// Running tally shared by the evaluators.
#[derive(Debug, Default)]
pub(crate) struct Tally {
    correct: u64,
    predictions: u64,
    rolling: Vec<f64>,
    stats: PredictorStats,
}

impl Tally {
    pub(crate) fn record(&mut self, hit: bool, latency: Duration) {
        self.predictions += 1;
        self.correct += u64::from(hit);
        self.rolling.push(self.correct as f64 / self.predictions as f64);
        self.stats.record(latency);
    }

    pub(crate) fn finish(self, model: String, states: Option<usize>) -> ModelReport {
        ModelReport {
            model,
            predictions: self.predictions,
            correct: self.correct,
            states,
            mean_latency_ms: self.stats.mean_latency_ms(),
            median_latency_ms: self.stats.median_latency_ms(),
            rolling: self.rolling,
        }
    }
}

/// One line of a results table. Missing values print as `N/A`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub model: String,
    pub accuracy_pct: Option<f64>,
    pub states: Option<f64>,
    pub mean_latency_ms: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    /// Tab-separated: model, accuracy_pct, states, mean_latency_ms.
    Table,
    /// Comma-separated: event_index, model, rolling_accuracy.
    Curve,
}

fn na(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "N/A".to_string(), |x| format!("{x:.decimals$}"))
}

pub fn render_table(rows: &[TableRow]) -> String {
    let mut out = String::from("model\taccuracy_pct\tstates\tmean_latency_ms\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.model,
            na(r.accuracy_pct, 2),
            na(r.states, 0),
            na(r.mean_latency_ms, 2)
        ));
    }
    out
}

pub fn render_curve(report: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["event_index", "model", "rolling_accuracy"])
        .expect("in-memory write");
    for m in &report.models {
        for (i, acc) in m.rolling.iter().enumerate() {
            w.write_record([(i + 1).to_string(), m.model.clone(), format!("{acc:.6}")])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Writes `report` to `out` in the requested format.
pub fn emit_report(report: &EvalReport, out: &Path, format: ReportFormat) -> Result<(), EvalError> {
    let text = match format {
        ReportFormat::Table => render_table(&report.to_table()),
        ReportFormat::Curve => render_curve(report),
    };
    write_text(out, &text)
}

pub(crate) fn write_text(out: &Path, text: &str) -> Result<(), EvalError> {
    fs::write(out, text).map_err(|source| EvalError::Io {
        path: out.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> EvalReport {
        EvalReport {
            models: vec![
                ModelReport {
                    model: "3-gram".into(),
                    predictions: 3,
                    correct: 2,
                    states: Some(7),
                    mean_latency_ms: Some(0.0123),
                    median_latency_ms: Some(0.01),
                    rolling: vec![0.0, 0.5, 2.0 / 3.0],
                },
                ModelReport {
                    model: "soft voting".into(),
                    predictions: 0,
                    correct: 0,
                    states: None,
                    mean_latency_ms: None,
                    median_latency_ms: None,
                    rolling: vec![],
                },
            ],
        }
    }

    #[test]
    fn table_format() {
        assert_eq!(
            render_table(&report().to_table()),
            "model\taccuracy_pct\tstates\tmean_latency_ms\n\
             3-gram\t66.67\t7\t0.01\n\
             soft voting\tN/A\tN/A\tN/A\n"
        );
    }

    #[test]
    fn curve_format() {
        assert_eq!(
            render_curve(&report()),
            "event_index,model,rolling_accuracy\n\
             1,3-gram,0.000000\n\
             2,3-gram,0.500000\n\
             3,3-gram,0.666667\n"
        );
    }

    #[test]
    fn empty_report_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tsv");
        emit_report(&EvalReport::default(), &p, ReportFormat::Table).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "model\taccuracy_pct\tstates\tmean_latency_ms\n");
        let c = dir.path().join("c.csv");
        emit_report(&EvalReport::default(), &c, ReportFormat::Curve).unwrap();
        assert_eq!(fs::read_to_string(&c).unwrap(), "event_index,model,rolling_accuracy\n");
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let r = emit_report(&EvalReport::default(), Path::new("/nonexistent/dir/t.tsv"), ReportFormat::Table);
        assert!(matches!(r, Err(EvalError::Io { .. })));
    }
}
