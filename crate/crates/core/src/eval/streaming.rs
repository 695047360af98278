use std::collections::HashSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use log::warn;

use super::{EvalError, EvalReport, ModelReport, Tally};
use crate::event::{Alphabet, CaseId, Event, Symbol};
use crate::pipeline::{run_pipeline, DataItem, Emitter, FunctionTerm, Record, Term, Value};
use crate::streaming::Predictor;

/// Record field holding the case identifier.
pub const CASE_KEY: &str = "case_id";
/// Record field holding the activity name.
pub const ACTIVITY_KEY: &str = "activity";

/// Prequential evaluation of one model: each activity event is first
/// predicted, then learned. Init events are learned but not scored.
pub fn evaluate_streaming_model(model: &mut dyn Predictor, events: &[Event]) -> ModelReport {
    let mut tally = Tally::default();
    for e in events {
        if e.activity == Symbol::INIT {
            model.update(e);
            continue;
        }
        let t0 = Instant::now();
        let guess = model.query(&e.case).and_then(|d| d.argmax());
        model.update(e);
        tally.record(guess == Some(e.activity), t0.elapsed());
    }
    tally.finish(model.name().to_string(), model.state_count())
}

/// Runs every model over the same stream, one after the other.
pub fn evaluate_streaming(models: Vec<Box<dyn Predictor>>, events: &[Event]) -> EvalReport {
    EvalReport {
        models: models
            .into_iter()
            .map(|mut m| evaluate_streaming_model(m.as_mut(), events))
            .collect(),
    }
}

pub fn event_record(e: &Event, alphabet: &Alphabet) -> Record {
    let name = alphabet.name(e.activity).unwrap_or_default();
    Record::from([
        (CASE_KEY.to_string(), Value::str(e.case.as_str())),
        (ACTIVITY_KEY.to_string(), Value::str(name)),
    ])
}

/// Reads an event back from a record; sentinel names map to stop and init.
pub fn record_event(r: &Record, alphabet: &Alphabet) -> Option<Event> {
    let case = r.get(CASE_KEY)?;
    let case = match case {
        Value::Str(s) => CaseId::new(&**s).ok()?,
        Value::Int(i) => CaseId::new(i.to_string()).ok()?,
        _ => return None,
    };
    let activity = alphabet.resolve(r.get(ACTIVITY_KEY)?.as_str()?).ok()?;
    Some(Event::new(case, activity))
}

/// Function term emitting an init record before the first record of every case.
pub struct AddStartSymbol {
    init: String,
    seen: HashSet<String>,
}

impl AddStartSymbol {
    pub fn new(init_sentinel: impl Into<String>) -> Self {
        AddStartSymbol {
            init: init_sentinel.into(),
            seen: HashSet::new(),
        }
    }
}

impl FunctionTerm for AddStartSymbol {
    fn process(&mut self, item: &DataItem, out: &mut Emitter) {
        let case = item.get(CASE_KEY).map(|v| v.to_string());
        let is_init = item.get(ACTIVITY_KEY).and_then(Value::as_str) == Some(self.init.as_str());
        if let Some(case) = case {
            if !is_init && self.seen.insert(case.clone()) {
                out.emit(Record::from([
                    (CASE_KEY.to_string(), Value::str(&case)),
                    (ACTIVITY_KEY.to_string(), Value::str(&self.init)),
                ]));
            }
        }
        out.emit(item.record.clone());
    }
}

/// Function term wrapping a model: one verdict record per scored event and
/// a closing summary record carrying the final state count.
pub struct EvalTerm {
    model: Box<dyn Predictor>,
    alphabet: Arc<Alphabet>,
}

impl EvalTerm {
    pub fn new(model: Box<dyn Predictor>, alphabet: Arc<Alphabet>) -> Self {
        EvalTerm { model, alphabet }
    }
}

impl FunctionTerm for EvalTerm {
    fn process(&mut self, item: &DataItem, out: &mut Emitter) {
        let Some(e) = record_event(&item.record, &self.alphabet) else {
            warn!("{}: skipping malformed item {}", self.model.name(), item.seq);
            return;
        };
        if e.activity == Symbol::INIT {
            self.model.update(&e);
            return;
        }
        let t0 = Instant::now();
        let guess = self.model.query(&e.case).and_then(|d| d.argmax());
        self.model.update(&e);
        let latency = t0.elapsed();
        let predicted = guess
            .and_then(|g| self.alphabet.name(g))
            .map_or(Value::Null, Value::str);
        out.emit(Record::from([
            ("model".to_string(), Value::str(self.model.name())),
            (CASE_KEY.to_string(), Value::str(e.case.as_str())),
            (ACTIVITY_KEY.to_string(), item.record[ACTIVITY_KEY].clone()),
            ("predicted".to_string(), predicted),
            ("correct".to_string(), Value::Bool(guess == Some(e.activity))),
            ("latency_ns".to_string(), Value::Int(latency.as_nanos() as i64)),
        ]));
    }

    fn finish(&mut self, out: &mut Emitter) {
        let states = self.model.state_count().map_or(Value::Null, |s| Value::Int(s as i64));
        out.emit(Record::from([
            ("model".to_string(), Value::str(self.model.name())),
            ("summary".to_string(), Value::Bool(true)),
            ("states".to_string(), states),
        ]));
    }
}

fn verdict_error(stream: &str, msg: &str) -> EvalError {
    EvalError::Verdict {
        stream: stream.to_string(),
        msg: msg.to_string(),
    }
}

/// Streaming evaluation as a pipeline: the event source feeds an
/// init-inserting term, which fans out to one evaluation term per model.
/// Reports are rebuilt from the verdict streams alone.
pub fn evaluate_streaming_pipeline(
    models: Vec<Box<dyn Predictor>>,
    events: &[Event],
    alphabet: Arc<Alphabet>,
) -> Result<EvalReport, EvalError> {
    if models.is_empty() {
        return Ok(EvalReport::default());
    }
    let records: Vec<Record> = events.iter().map(|e| event_record(e, &alphabet)).collect();
    let init = alphabet.init_sentinel();
    let mut branches = models
        .into_iter()
        .map(|m| Term::function(m.name().to_string(), EvalTerm::new(m, Arc::clone(&alphabet))));
    let first = branches.next().expect("nonempty");
    let fan_out = branches.fold(first, |acc, t| acc | t);
    let root = Term::from_iter("events", records)
        * Term::key_filter("key-filter", &[CASE_KEY, ACTIVITY_KEY])
        * Term::function("add-start-symbol", AddStartSymbol::new(init))
        * fan_out;
    let handle = run_pipeline(root)?;
    let outputs = handle.outputs().to_vec();
    handle.join()?;

    let mut report = EvalReport::default();
    for view in outputs {
        let name = view.name().to_string();
        let mut tally = Tally::default();
        let mut states = None;
        let mut model = None;
        let mut closed = false;
        for item in view {
            if model.is_none() {
                model = item.get("model").and_then(Value::as_str).map(str::to_string);
            }
            if item.get("summary").and_then(Value::as_bool) == Some(true) {
                states = item.get("states").and_then(Value::as_int).map(|s| s as usize);
                closed = true;
                continue;
            }
            let hit = item
                .get("correct")
                .and_then(Value::as_bool)
                .ok_or_else(|| verdict_error(&name, "verdict without `correct`"))?;
            let ns = item.get("latency_ns").and_then(Value::as_int).unwrap_or(0);
            tally.record(hit, Duration::from_nanos(ns.max(0) as u64));
        }
        if !closed {
            return Err(verdict_error(&name, "missing summary record"));
        }
        report.models.push(tally.finish(model.unwrap_or(name), states));
    }
    Ok(report)
}
