//! `streampredict` command-line runner.
//!
//! Exit codes: 0 success, 1 output or runtime failure, 2 invalid
//! configuration or automaton dump, 3 unreadable dataset.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::info;

use streampredict::automaton::dump::{parse_dump, summarize, write_dump};
use streampredict::eval::{emit_report, evaluate_streaming_pipeline, run_batch, ReportFormat};
use streampredict::event::Alphabet;
use streampredict::ingest::{load_event_stream, DatasetConfig, EventOrder};
use streampredict::learn::{alergia, build_bag, build_fpt, build_ngram, AlergiaConfig, NGramConfig};
use streampredict::models::{build_streaming, ModelKind, ModelSpec, VotingRecipe};

use config::{Mode, RunConfig};

#[derive(Parser)]
#[command(name = "streampredict", version, about = "Next-activity prediction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the configured models on a dataset.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Split seed (batch mode).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// `key=value` applied to the config before validation, e.g.
        /// `models=ngram5,soft` or `split.seed=3`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print a structural summary of an automaton dump.
    Inspect { dump: PathBuf },
    /// Learn one automaton from a CSV event log and write its dump.
    Dump {
        #[arg(long)]
        dataset: PathBuf,
        /// `fpt`, `bag`, `ngram<N>` or `alergia`.
        #[arg(long)]
        model: String,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value = "case_id")]
        case_column: String,
        #[arg(long, default_value = "activity")]
        activity_column: String,
        #[arg(long, default_value = "timestamp")]
        timestamp_column: String,
        /// Keep file order instead of sorting by timestamp.
        #[arg(long)]
        file_order: bool,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// An error together with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn config(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 2,
            error: error.into(),
        }
    }

    fn dataset(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 3,
            error: error.into(),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(error: E) -> Self {
        Failure {
            code: 1,
            error: error.into(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STREAMPREDICT_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            mode,
            seed,
            out_dir,
            overrides,
        } => cmd_run(&config, mode, seed, out_dir, &overrides),
        Command::Inspect { dump } => cmd_inspect(&dump),
        Command::Dump {
            dataset,
            model,
            alpha,
            case_column,
            activity_column,
            timestamp_column,
            file_order,
            out,
        } => {
            let mut cfg = DatasetConfig::new(dataset);
            cfg.case_column = case_column;
            cfg.activity_column = activity_column;
            cfg.timestamp_column = timestamp_column;
            if file_order {
                cfg = cfg.ordering(EventOrder::FileOrder);
            }
            cmd_dump(&cfg, &model, alpha, out.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_run(
    path: &Path,
    mode: Option<Mode>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    overrides: &[String],
) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(path, overrides).map_err(Failure::config)?;
    if let Some(m) = mode {
        cfg.mode = m;
    }
    if let Some(s) = seed {
        cfg.split.seed = s;
    }
    if let Some(d) = out_dir {
        cfg.outputs.dir = d;
    }
    let specs = cfg.validate().map_err(Failure::config)?;
    // streaming-only and batch-only models are configuration errors
    if cfg.mode == Mode::Streaming {
        for s in &specs {
            build_streaming(s).map_err(Failure::config)?;
        }
    } else if let Some(s) = specs.iter().find(|s| matches!(s.kind, ModelKind::Adaptive { .. })) {
        return Err(Failure::config(anyhow::anyhow!(
            "model `{}` is only available in streaming mode",
            s.label()
        )));
    }

    let stream = load_event_stream(&cfg.dataset)
        .map_err(|e| Failure::dataset(anyhow::Error::new(e).context(format!("dataset {}", cfg.dataset.path.display()))))?;
    info!(
        "{}: {} events, {} cases, {} activities",
        cfg.dataset.path.display(),
        stream.len(),
        stream.case_count(),
        stream.activity_count()
    );
    let out = &cfg.outputs;
    fs::create_dir_all(&out.dir).with_context(|| format!("cannot create {}", out.dir.display()))?;
    let table_path = out.dir.join(&out.table);
    match cfg.mode {
        Mode::Streaming => {
            let models = specs
                .iter()
                .map(build_streaming)
                .collect::<Result<Vec<_>, _>>()
                .map_err(Failure::config)?;
            let report = evaluate_streaming_pipeline(models, &stream.events, stream.alphabet.clone())
                .context("streaming evaluation failed")?;
            emit_report(&report, &table_path, ReportFormat::Table)?;
            emit_report(&report, &out.dir.join(&out.curve), ReportFormat::Curve)?;
        }
        Mode::Batch => {
            let log = stream.log();
            let report = run_batch(&log, &specs, &cfg.split, cfg.runs).map_err(|e| match e {
                streampredict::eval::EvalError::Model(m) => Failure::config(m),
                streampredict::eval::EvalError::Ingest(i) => Failure::config(i),
                other => Failure::from(other),
            })?;
            report.write_table(&table_path)?;
            fs::write(out.dir.join(&out.summary), report.render_summary())
                .with_context(|| format!("cannot write {}", out.summary))?;
        }
    }
    print!("{}", fs::read_to_string(&table_path).context("cannot read back the table")?);
    Ok(())
}

fn cmd_inspect(path: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::config)?;
    let alphabet = Alphabet::new();
    let fdfa = parse_dump(&text, &alphabet)
        .with_context(|| format!("corrupt dump {}", path.display()))
        .map_err(Failure::config)?;
    let s = summarize(&fdfa);
    println!("states\t{}", s.states);
    println!("transitions\t{}", s.transitions);
    println!("zero_count_transitions\t{}", s.zero_count_transitions);
    println!("counts_without_transition\t{}", s.dangling_counts);
    println!("activities\t{}", alphabet.activity_count());
    println!("total_mass\t{}", s.total_mass);
    println!("stop_mass\t{}", s.stop_mass);
    println!("empty_states\t{}", s.empty_states);
    println!("unreachable_states\t{}", s.unreachable_states);
    if s.unreachable_states > 0 {
        return Err(Failure::config(anyhow::anyhow!(
            "{} states are unreachable from the root",
            s.unreachable_states
        )));
    }
    Ok(())
}

fn cmd_dump(cfg: &DatasetConfig, model: &str, alpha: Option<f64>, out: Option<&Path>) -> Result<(), Failure> {
    cfg.validate().map_err(Failure::config)?;
    let mut spec = ModelSpec::from_compact(model, &VotingRecipe::default()).map_err(Failure::config)?;
    if let (ModelKind::Alergia { alpha: a }, Some(x)) = (&mut spec.kind, alpha) {
        *a = x;
    }
    spec.validate().map_err(Failure::config)?;
    let stream = load_event_stream(cfg)
        .map_err(|e| Failure::dataset(anyhow::Error::new(e).context(format!("dataset {}", cfg.path.display()))))?;
    let log = stream.log();
    let fdfa = match spec.kind {
        ModelKind::Fpt => build_fpt(&log),
        ModelKind::Bag => build_bag(&log),
        ModelKind::Ngram { n } => build_ngram(&log, NGramConfig::new(n).expect("validated")),
        ModelKind::Alergia { alpha } => alergia(&build_fpt(&log), AlergiaConfig::new(alpha).expect("validated")),
        _ => {
            return Err(Failure::config(anyhow::anyhow!(
                "`{model}` is an ensemble; only single automata can be dumped"
            )))
        }
    };
    let text = write_dump(&fdfa, &stream.alphabet);
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
