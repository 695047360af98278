use std::time::Instant;

use log::info;
use serde::Serialize;

use super::{render_table, write_text, EvalError, EvalReport, ModelReport, TableRow, Tally};
use crate::event::{CaseId, Event, EventLog, Symbol};
use crate::ingest::{split_log, SplitSpec};
use crate::models::{build_batch, check_unique_names, ModelSpec};
use crate::streaming::Predictor;

/// Scores `model` on every position of every test case, the final stop
/// included. The model sees each case incrementally, one event at a time.
pub fn evaluate_batch(model: &mut dyn Predictor, test: &EventLog) -> ModelReport {
    let mut tally = Tally::default();
    let mut next_id = 0u64;
    for (trace, m) in test.iter() {
        for _ in 0..m {
            let case = CaseId::new(format!("test-{next_id}")).expect("nonempty");
            next_id += 1;
            for i in 0..=trace.len() {
                let target = trace.get(i).copied().unwrap_or(Symbol::STOP);
                let t0 = Instant::now();
                let guess = model.query(&case).and_then(|d| d.argmax());
                if i < trace.len() {
                    model.update(&Event::new(case.clone(), target));
                }
                tally.record(guess == Some(target), t0.elapsed());
            }
            model.end_case(&case);
        }
    }
    tally.finish(model.name().to_string(), model.state_count())
}

/// One seeded train/test run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchRun {
    pub seed: u64,
    pub train_cases: u64,
    pub test_cases: u64,
    pub report: EvalReport,
}

/// Mean and sample standard deviation of one model over several runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AveragedRow {
    pub model: String,
    pub runs: usize,
    pub mean_accuracy: Option<f64>,
    pub std_accuracy: Option<f64>,
    pub mean_states: Option<f64>,
    pub mean_latency_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AveragedReport {
    pub runs: Vec<BatchRun>,
    pub rows: Vec<AveragedRow>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn sample_std(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    Some((xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

impl AveragedReport {
    pub fn row(&self, model: &str) -> Option<&AveragedRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn to_table(&self) -> Vec<TableRow> {
        self.rows
            .iter()
            .map(|r| TableRow {
                model: r.model.clone(),
                accuracy_pct: r.mean_accuracy.map(|a| 100.0 * a),
                states: r.mean_states,
                mean_latency_ms: r.mean_latency_ms,
            })
            .collect()
    }

    /// Tab-separated per-model mean and spread over the runs.
    pub fn render_summary(&self) -> String {
        let mut out = String::from("model\truns\taccuracy_mean_pct\taccuracy_std_pct\tstates_mean\n");
        let f = |v: Option<f64>, d: usize| v.map_or_else(|| "N/A".into(), |x| format!("{x:.d$}"));
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.model,
                r.runs,
                f(r.mean_accuracy.map(|a| 100.0 * a), 2),
                f(r.std_accuracy.map(|a| 100.0 * a), 2),
                f(r.mean_states, 1)
            ));
        }
        out
    }

    pub fn write_table(&self, out: &std::path::Path) -> Result<(), EvalError> {
        write_text(out, &render_table(&self.to_table()))
    }
}

/// Splits `log` `runs` times (seeds `split.seed`, `split.seed + 1`, ...),
/// trains every model on the training part and scores it on the test part.
/// The validation part is unused by automata.
pub fn run_batch(log: &EventLog, specs: &[ModelSpec], split: &SplitSpec, runs: usize) -> Result<AveragedReport, EvalError> {
    check_unique_names(specs)?;
    for s in specs {
        s.validate()?;
    }
    let mut all_runs = Vec::with_capacity(runs);
    for r in 0..runs {
        let seed = split.seed.wrapping_add(r as u64);
        let (train, _val, test) = split_log(log, &split.with_seed(seed))?;
        let mut report = EvalReport::default();
        for spec in specs {
            let mut model = build_batch(spec, &train)?;
            let m = evaluate_batch(model.as_mut(), &test);
            info!(
                "seed {seed}: {} accuracy {:.4}",
                m.model,
                m.accuracy().unwrap_or(f64::NAN)
            );
            report.models.push(m);
        }
        all_runs.push(BatchRun {
            seed,
            train_cases: train.case_count(),
            test_cases: test.case_count(),
            report,
        });
    }
    let rows = specs
        .iter()
        .map(|spec| {
            let label = spec.label();
            let per_run: Vec<&ModelReport> = all_runs.iter().filter_map(|r| r.report.get(&label)).collect();
            let accs: Vec<f64> = per_run.iter().filter_map(|m| m.accuracy()).collect();
            let states: Vec<f64> = per_run.iter().filter_map(|m| m.states.map(|s| s as f64)).collect();
            let lat: Vec<f64> = per_run.iter().filter_map(|m| m.mean_latency_ms).collect();
            AveragedRow {
                model: label,
                runs: per_run.len(),
                mean_accuracy: mean(&accs),
                std_accuracy: sample_std(&accs),
                mean_states: mean(&states),
                mean_latency_ms: mean(&lat),
            }
        })
        .collect();
    Ok(AveragedReport { runs: all_runs, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{build_ngram, NGramConfig};
    use crate::streaming::{FrozenAutomaton, Parsing};

    fn s(i: u32) -> Symbol {
        Symbol::from_index(i)
    }

    #[test]
    fn stop_position_is_scored() {
        let mut train = EventLog::new();
        train.add(vec![s(2)], 3).unwrap();
        let fdfa = build_ngram(&train, NGramConfig::new(2).unwrap());
        let mut m = FrozenAutomaton::new("2-gram", fdfa, Parsing::Backoff);
        let mut test = EventLog::new();
        test.add(vec![s(2)], 2).unwrap();
        let r = evaluate_batch(&mut m, &test);
        assert_eq!((r.predictions, r.correct), (4, 4));
        assert_eq!(r.rolling.len(), 4);
    }

    #[test]
    fn empty_test_log_has_no_accuracy() {
        let mut m = FrozenAutomaton::new("x", crate::automaton::Fdfa::new(), Parsing::Exact);
        let r = evaluate_batch(&mut m, &EventLog::new());
        assert_eq!(r.predictions, 0);
        assert_eq!(r.accuracy(), None);
    }

    #[test]
    fn averaging_is_seeded() {
        let log: EventLog = (0..40u32)
            .map(|i| vec![s(2 + i % 3), s(2 + (i / 3) % 2), s(4)])
            .collect();
        let specs = [ModelSpec::fpt(), ModelSpec::ngram(2)];
        let a = run_batch(&log, &specs, &SplitSpec::default().with_seed(7), 3).unwrap();
        let b = run_batch(&log, &specs, &SplitSpec::default().with_seed(7), 3).unwrap();
        assert_eq!(a.rows.len(), 2);
        assert_eq!(a.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), [7, 8, 9]);
        assert_eq!(a.runs[0].train_cases, 28);
        let strip = |r: &AveragedReport| r.rows.iter().map(|x| (x.mean_accuracy, x.mean_states)).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        assert!(a.render_summary().starts_with("model\truns\t"));
    }
}
