use std::fmt;
use std::ops::{BitOr, Mul};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::time::Duration;

use super::{DataItem, PipelineError, Record, StreamWriter};

/// Result of polling a source once.
#[derive(Debug)]
pub enum SourcePoll {
    Item(Record),
    /// Nothing available yet; the runtime polls again after checking for stop.
    Idle,
    Done,
}

/// Produces items from outside the pipeline.
pub trait SourceTerm: Send {
    fn poll(&mut self) -> SourcePoll;
}

/// Consumes one input stream and appends zero or more items per input.
pub trait FunctionTerm: Send {
    fn process(&mut self, item: &DataItem, out: &mut Emitter);

    /// Called once after the input closes.
    fn finish(&mut self, _out: &mut Emitter) {}
}

/// Consumes one input stream and produces nothing.
pub trait SinkTerm: Send {
    fn consume(&mut self, item: &DataItem);

    fn finish(&mut self) {}
}

/// Output side handed to a [`FunctionTerm`].
pub struct Emitter {
    writer: StreamWriter,
    stopped: bool,
}

impl Emitter {
    pub(crate) fn new(writer: StreamWriter) -> Self {
        Emitter { writer, stopped: false }
    }

    pub fn emit(&mut self, record: Record) {
        if !self.stopped && self.writer.append(record).is_err() {
            self.stopped = true;
        }
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }
}

struct IterSource<I>(I);

impl<I: Iterator<Item = Record> + Send> SourceTerm for IterSource<I> {
    fn poll(&mut self) -> SourcePoll {
        match self.0.next() {
            Some(r) => SourcePoll::Item(r),
            None => SourcePoll::Done,
        }
    }
}

struct ChannelSource(Receiver<Record>);

impl SourceTerm for ChannelSource {
    fn poll(&mut self) -> SourcePoll {
        match self.0.recv_timeout(Duration::from_millis(10)) {
            Ok(r) => SourcePoll::Item(r),
            Err(RecvTimeoutError::Timeout) => SourcePoll::Idle,
            Err(RecvTimeoutError::Disconnected) => SourcePoll::Done,
        }
    }
}

struct MapFn<F>(F);

impl<F: FnMut(&Record) -> Option<Record> + Send> FunctionTerm for MapFn<F> {
    fn process(&mut self, item: &DataItem, out: &mut Emitter) {
        if let Some(r) = (self.0)(&item.record) {
            out.emit(r);
        }
    }
}

struct ForEach<F>(F);

impl<F: FnMut(&DataItem) + Send> SinkTerm for ForEach<F> {
    fn consume(&mut self, item: &DataItem) {
        (self.0)(item)
    }
}

/// Number of upstream streams a term consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arity {
    Exactly(usize),
    /// Any positive number of inputs (a merge).
    Variadic,
}

impl Arity {
    fn accepts(self, n: usize) -> bool {
        match self {
            Arity::Exactly(k) => k == n,
            Arity::Variadic => n >= 1,
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arity::Exactly(k) => write!(f, "{k}"),
            Arity::Variadic => f.write_str("one or more"),
        }
    }
}

pub(crate) enum LeafKind {
    Source(Box<dyn SourceTerm>),
    Function(Box<dyn FunctionTerm>),
    Merge,
    Sink(Box<dyn SinkTerm>),
}

pub(crate) struct Leaf {
    pub name: String,
    pub kind: LeafKind,
}

pub(crate) enum Node {
    Leaf(Leaf),
    Seq(Box<Node>, Box<Node>),
    Par(Box<Node>, Box<Node>),
}

impl Node {
    fn name(&self) -> String {
        match self {
            Node::Leaf(l) => l.name.clone(),
            Node::Seq(a, b) => format!("({} * {})", a.name(), b.name()),
            Node::Par(a, b) => format!("({} | {})", a.name(), b.name()),
        }
    }

    fn inputs(&self) -> Arity {
        match self {
            Node::Leaf(l) => match l.kind {
                LeafKind::Source(_) => Arity::Exactly(0),
                LeafKind::Function(_) | LeafKind::Sink(_) => Arity::Exactly(1),
                LeafKind::Merge => Arity::Variadic,
            },
            Node::Seq(a, _) => a.inputs(),
            Node::Par(a, b) => match (a.inputs(), b.inputs()) {
                (Arity::Variadic, other) | (other, Arity::Variadic) => other,
                (x, _) => x,
            },
        }
    }

    fn outputs(&self) -> usize {
        match self {
            Node::Leaf(l) => match l.kind {
                LeafKind::Sink(_) => 0,
                _ => 1,
            },
            Node::Seq(_, b) => b.outputs(),
            Node::Par(a, b) => a.outputs() + b.outputs(),
        }
    }

    fn check_seq(a: &Node, b: &Node) -> Result<(), PipelineError> {
        let produced = a.outputs();
        if produced == 0 {
            return Err(PipelineError::SinkUpstream(b.name()));
        }
        let wanted = b.inputs();
        if !wanted.accepts(produced) {
            return Err(PipelineError::Arity {
                downstream: b.name(),
                expected: wanted.to_string(),
                got: produced,
            });
        }
        Ok(())
    }

    fn check_par(a: &Node, b: &Node) -> Result<(), PipelineError> {
        let ok = match (a.inputs(), b.inputs()) {
            (Arity::Exactly(x), Arity::Exactly(y)) => x == y,
            (Arity::Exactly(x), Arity::Variadic) | (Arity::Variadic, Arity::Exactly(x)) => x >= 1,
            (Arity::Variadic, Arity::Variadic) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(PipelineError::BranchMismatch(a.name(), b.name()))
        }
    }

    pub(crate) fn validate(&self) -> Result<(), PipelineError> {
        match self {
            Node::Leaf(_) => Ok(()),
            Node::Seq(a, b) => {
                a.validate()?;
                b.validate()?;
                Node::check_seq(a, b)
            }
            Node::Par(a, b) => {
                a.validate()?;
                b.validate()?;
                Node::check_par(a, b)
            }
        }
    }
}

/// A composable unit of computation.
///
/// Terms form a tree, so a pipeline can never contain a cycle. The `*` and
/// `|` operators compose without checking; [`compose_sequential`] and
/// [`compose_parallel`] check immediately, and [`run_pipeline`](super::run_pipeline)
/// always validates the whole tree.
pub struct Term {
    pub(crate) node: Node,
}

impl Term {
    fn leaf(name: impl Into<String>, kind: LeafKind) -> Self {
        Term {
            node: Node::Leaf(Leaf { name: name.into(), kind }),
        }
    }

    pub fn source(name: impl Into<String>, source: impl SourceTerm + 'static) -> Self {
        Term::leaf(name, LeafKind::Source(Box::new(source)))
    }

    /// A bounded source replaying the items of `iter`.
    pub fn from_iter<I>(name: impl Into<String>, iter: I) -> Self
    where
        I: IntoIterator<Item = Record>,
        I::IntoIter: Send + 'static,
    {
        Term::source(name, IterSource(iter.into_iter()))
    }

    /// An unbounded source fed through a channel; ends when every sender is dropped.
    pub fn from_channel(name: impl Into<String>, rx: Receiver<Record>) -> Self {
        Term::source(name, ChannelSource(rx))
    }

    pub fn function(name: impl Into<String>, f: impl FunctionTerm + 'static) -> Self {
        Term::leaf(name, LeafKind::Function(Box::new(f)))
    }

    /// One-to-at-most-one transformation of records.
    pub fn map<F>(name: impl Into<String>, f: F) -> Self
    where
        F: FnMut(&Record) -> Option<Record> + Send + 'static,
    {
        Term::function(name, MapFn(f))
    }

    pub fn identity(name: impl Into<String>) -> Self {
        Term::map(name, |r: &Record| Some(r.clone()))
    }

    /// Keeps only the given fields of every record.
    pub fn key_filter(name: impl Into<String>, keys: &[&str]) -> Self {
        let keys: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
        Term::map(name, move |r: &Record| {
            Some(
                keys.iter()
                    .filter_map(|k| r.get(k).map(|v| (k.clone(), v.clone())))
                    .collect(),
            )
        })
    }

    /// Interleaves any number of inputs in arrival order.
    pub fn merge(name: impl Into<String>) -> Self {
        Term::leaf(name, LeafKind::Merge)
    }

    pub fn sink(name: impl Into<String>, sink: impl SinkTerm + 'static) -> Self {
        Term::leaf(name, LeafKind::Sink(Box::new(sink)))
    }

    pub fn for_each<F>(name: impl Into<String>, f: F) -> Self
    where
        F: FnMut(&DataItem) + Send + 'static,
    {
        Term::sink(name, ForEach(f))
    }

    pub fn name(&self) -> String {
        self.node.name()
    }

    pub fn inputs(&self) -> Arity {
        self.node.inputs()
    }

    pub fn outputs(&self) -> usize {
        self.node.outputs()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.node.validate()
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Term").field(&self.name()).finish()
    }
}

/// `t1 * t2`: every output of `t1` feeds `t2`.
pub fn compose_sequential(t1: Term, t2: Term) -> Result<Term, PipelineError> {
    Node::check_seq(&t1.node, &t2.node)?;
    Ok(t1 * t2)
}

/// `t1 | t2`: both branches receive the same inputs; outputs are concatenated.
pub fn compose_parallel(t1: Term, t2: Term) -> Result<Term, PipelineError> {
    Node::check_par(&t1.node, &t2.node)?;
    Ok(t1 | t2)
}

impl Mul for Term {
    type Output = Term;

    fn mul(self, rhs: Term) -> Term {
        Term {
            node: Node::Seq(Box::new(self.node), Box::new(rhs.node)),
        }
    }
}

impl BitOr for Term {
    type Output = Term;

    fn bitor(self, rhs: Term) -> Term {
        Term {
            node: Node::Par(Box::new(self.node), Box::new(rhs.node)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src() -> Term {
        Term::from_iter("src", Vec::<Record>::new())
    }

    #[test]
    fn arities() {
        let t = src() | src();
        assert_eq!(t.inputs(), Arity::Exactly(0));
        assert_eq!(t.outputs(), 2);
        let m = (src() | src()) * Term::merge("m");
        assert_eq!(m.outputs(), 1);
        assert!(m.validate().is_ok());
        let s = src() * Term::for_each("sink", |_| {});
        assert_eq!(s.outputs(), 0);
    }

    #[test]
    fn sink_cannot_feed_anything() {
        let sink = Term::for_each("sink", |_| {});
        let err = compose_sequential(sink, Term::identity("f")).unwrap_err();
        assert!(matches!(err, PipelineError::SinkUpstream(_)));
    }

    #[test]
    fn two_streams_into_a_function_is_rejected() {
        let err = compose_sequential(src() | src(), Term::identity("f")).unwrap_err();
        assert!(matches!(err, PipelineError::Arity { got: 2, .. }));
        assert!(((src() | src()) * Term::identity("f") * Term::identity("g")).validate().is_err());
    }

    #[test]
    fn source_beside_function_is_rejected() {
        assert!(matches!(
            compose_parallel(src(), Term::identity("f")),
            Err(PipelineError::BranchMismatch(_, _))
        ));
        assert!(compose_parallel(Term::identity("f"), Term::merge("m")).is_ok());
    }
}
