use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::thread::{self, JoinHandle};

use log::debug;

use super::stream::Shared;
use super::term::{Emitter, LeafKind, Node, SourcePoll};
use super::{PipelineError, StreamConfig, StreamView, StreamWriter, Term};

type Job = Box<dyn FnOnce() + Send>;

struct Builder {
    stop: Arc<AtomicBool>,
    config: StreamConfig,
    streams: Vec<Arc<Shared>>,
    seen: HashMap<String, usize>,
    jobs: Vec<(String, Job)>,
}

impl Builder {
    fn writer(&mut self, name: &str) -> StreamWriter {
        let n = self.seen.entry(name.to_string()).or_insert(0);
        *n += 1;
        let unique = if *n == 1 { name.to_string() } else { format!("{name}#{n}") };
        let w = StreamWriter::with_stop(unique, self.config, Arc::clone(&self.stop));
        self.streams.push(w.shared());
        w
    }

    fn job(&mut self, name: &str, f: impl FnOnce() + Send + 'static) {
        self.jobs.push((name.to_string(), Box::new(f)));
    }

    /// Creates the streams and thread bodies for `node`; returns its output streams.
    fn instantiate(&mut self, node: Node, mut inputs: Vec<StreamView>) -> Vec<Arc<Shared>> {
        match node {
            Node::Seq(a, b) => {
                let mid = self.instantiate(*a, inputs);
                let views = mid.into_iter().map(|s| StreamView::register(s, None)).collect();
                self.instantiate(*b, views)
            }
            Node::Par(a, b) => {
                let mut out = self.instantiate(*a, inputs.clone());
                out.extend(self.instantiate(*b, inputs));
                out
            }
            Node::Leaf(leaf) => {
                let name = leaf.name;
                match leaf.kind {
                    LeafKind::Source(mut src) => {
                        let w = self.writer(&name);
                        let shared = w.shared();
                        let stop = Arc::clone(&self.stop);
                        self.job(&name, move || {
                            while !stop.load(Ordering::SeqCst) {
                                match src.poll() {
                                    SourcePoll::Item(r) => {
                                        if w.append(r).is_err() {
                                            break;
                                        }
                                    }
                                    SourcePoll::Idle => continue,
                                    SourcePoll::Done => break,
                                }
                            }
                        });
                        vec![shared]
                    }
                    LeafKind::Function(mut f) => {
                        let mut input = inputs.pop().expect("validated arity");
                        let w = self.writer(&name);
                        let shared = w.shared();
                        self.job(&name, move || {
                            let mut out = Emitter::new(w);
                            while let Some(item) = input.next_item() {
                                f.process(&item, &mut out);
                                if out.is_stopped() {
                                    return;
                                }
                            }
                            f.finish(&mut out);
                        });
                        vec![shared]
                    }
                    LeafKind::Sink(mut s) => {
                        let mut input = inputs.pop().expect("validated arity");
                        self.job(&name, move || {
                            while let Some(item) = input.next_item() {
                                s.consume(&item);
                            }
                            s.finish();
                        });
                        Vec::new()
                    }
                    LeafKind::Merge => {
                        let w = self.writer(&name);
                        let shared = w.shared();
                        let (tx, rx) = mpsc::channel();
                        for (i, mut input) in inputs.into_iter().enumerate() {
                            let tx = tx.clone();
                            self.job(&format!("{name}/in{i}"), move || {
                                while let Some(item) = input.next_item() {
                                    if tx.send(item).is_err() {
                                        break;
                                    }
                                }
                            });
                        }
                        drop(tx);
                        self.job(&name, move || {
                            for item in rx {
                                if w.append(item.record.clone()).is_err() {
                                    break;
                                }
                            }
                        });
                        vec![shared]
                    }
                }
            }
        }
    }
}

/// Handle on a running pipeline.
pub struct RunHandle {
    threads: Vec<(String, JoinHandle<()>)>,
    streams: Vec<Arc<Shared>>,
    outputs: Vec<StreamView>,
    stop: Arc<AtomicBool>,
}

impl RunHandle {
    /// Observer views on the root term's output streams.
    pub fn outputs(&self) -> &[StreamView] {
        &self.outputs
    }

    /// Names of every stream in the run, in creation order.
    pub fn stream_names(&self) -> Vec<String> {
        self.streams.iter().map(|s| s.name().to_string()).collect()
    }

    /// An observer view on the output stream of the term called `name`.
    pub fn stream(&self, name: &str) -> Option<StreamView> {
        self.streams
            .iter()
            .find(|s| s.name() == name)
            .map(|s| StreamView::observer(Arc::clone(s)))
    }

    /// Asks every term to finish; blocked reads and writes return promptly.
    pub fn stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
        for s in &self.streams {
            s.wake();
        }
    }

    pub fn is_stopped(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }

    pub fn is_finished(&self) -> bool {
        self.threads.iter().all(|(_, h)| h.is_finished())
    }

    /// Waits for every term thread. Reports the first term that panicked.
    pub fn join(self) -> Result<(), PipelineError> {
        let mut first_err = None;
        for (name, h) in self.threads {
            if h.join().is_err() && first_err.is_none() {
                first_err = Some(PipelineError::TermPanicked(name));
            }
        }
        first_err.map_or(Ok(()), Err)
    }
}

/// Validates `root` and starts one thread per term with default stream settings.
pub fn run_pipeline(root: Term) -> Result<RunHandle, PipelineError> {
    run_pipeline_with(root, StreamConfig::default())
}

pub fn run_pipeline_with(root: Term, config: StreamConfig) -> Result<RunHandle, PipelineError> {
    root.validate()?;
    match root.inputs() {
        super::Arity::Exactly(0) => {}
        other => return Err(PipelineError::NoSource(other.to_string())),
    }
    let stop = Arc::new(AtomicBool::new(false));
    let mut b = Builder {
        stop: Arc::clone(&stop),
        config,
        streams: Vec::new(),
        seen: HashMap::new(),
        jobs: Vec::new(),
    };
    let outs = b.instantiate(root.node, Vec::new());
    let outputs = outs.into_iter().map(StreamView::observer).collect();
    let mut threads = Vec::with_capacity(b.jobs.len());
    for (name, job) in b.jobs {
        debug!("starting term {name}");
        let h = thread::Builder::new()
            .name(name.clone())
            .spawn(job)
            .map_err(|_| PipelineError::Spawn(name.clone()))?;
        threads.push((name, h));
    }
    Ok(RunHandle {
        threads,
        streams: b.streams,
        outputs,
        stop,
    })
}
