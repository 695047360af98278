//! Append-only data streams with one writer and any number of readers.
//!
//! A [`StreamWriter`] is the unique owner of its stream. Readers hold a
//! [`StreamView`] with a private cursor and only ever observe whole items in
//! append order. Registered views (from [`StreamWriter::subscribe`]) take
//! part in backpressure and truncation; observer views do not.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::SystemTime;

use super::{DataItem, PipelineError, Record};

/// Default bound on unconsumed items before `append` blocks.
pub const DEFAULT_CAPACITY: usize = 65_536;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamConfig {
    /// Maximum number of items not yet read by every registered reader.
    pub capacity: usize,
    /// Drop items once every registered reader has consumed them.
    pub truncate: bool,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            capacity: DEFAULT_CAPACITY,
            truncate: false,
        }
    }
}

#[derive(Debug)]
struct Inner {
    items: VecDeque<Arc<DataItem>>,
    /// Sequence number of `items[0]`.
    base: u64,
    next_seq: u64,
    closed: bool,
    readers: HashMap<u64, u64>,
    next_reader: u64,
}

impl Inner {
    fn min_cursor(&self) -> Option<u64> {
        self.readers.values().copied().min()
    }

    fn truncate(&mut self) {
        if let Some(min) = self.min_cursor() {
            while self.base < min && !self.items.is_empty() {
                self.items.pop_front();
                self.base += 1;
            }
        }
    }
}

#[derive(Debug)]
pub(crate) struct Shared {
    name: String,
    config: StreamConfig,
    inner: Mutex<Inner>,
    changed: Condvar,
    stop: Arc<AtomicBool>,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn stopped(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }

    /// Wakes every waiter; used after the stop flag is raised.
    pub(crate) fn wake(&self) {
        let _guard = self.lock();
        self.changed.notify_all();
    }

    pub(crate) fn name(&self) -> &str {
        &self.name
    }
}

/// Write handle; the stream closes when it is dropped.
#[derive(Debug)]
pub struct StreamWriter {
    shared: Arc<Shared>,
}

impl StreamWriter {
    pub fn new(name: impl Into<String>, config: StreamConfig) -> Self {
        Self::with_stop(name, config, Arc::new(AtomicBool::new(false)))
    }

    pub(crate) fn with_stop(name: impl Into<String>, config: StreamConfig, stop: Arc<AtomicBool>) -> Self {
        StreamWriter {
            shared: Arc::new(Shared {
                name: name.into(),
                config,
                inner: Mutex::new(Inner {
                    items: VecDeque::new(),
                    base: 0,
                    next_seq: 0,
                    closed: false,
                    readers: HashMap::new(),
                    next_reader: 0,
                }),
                changed: Condvar::new(),
                stop,
            }),
        }
    }

    pub(crate) fn shared(&self) -> Arc<Shared> {
        Arc::clone(&self.shared)
    }

    pub fn name(&self) -> &str {
        &self.shared.name
    }

    /// Appends one item, blocking while the slowest registered reader is
    /// `capacity` items behind. Returns the item's sequence number.
    pub fn append(&self, record: Record) -> Result<u64, PipelineError> {
        let sh = &self.shared;
        let mut g = sh.lock();
        loop {
            if sh.stopped() {
                return Err(PipelineError::Stopped);
            }
            match g.min_cursor() {
                Some(min) if g.next_seq - min >= sh.config.capacity as u64 => {
                    g = sh.changed.wait(g).unwrap_or_else(|e| e.into_inner());
                }
                _ => break,
            }
        }
        let seq = g.next_seq;
        g.items.push_back(Arc::new(DataItem {
            seq,
            ingest: SystemTime::now(),
            record,
        }));
        g.next_seq += 1;
        drop(g);
        sh.changed.notify_all();
        Ok(seq)
    }

    /// A registered reader positioned at the oldest retained item.
    pub fn subscribe(&self) -> StreamView {
        StreamView::register(Arc::clone(&self.shared), None)
    }

    /// An unregistered reader: never slows the writer down.
    pub fn observe(&self) -> StreamView {
        StreamView::observer(Arc::clone(&self.shared))
    }

    pub fn len(&self) -> u64 {
        self.shared.lock().next_seq
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Drop for StreamWriter {
    fn drop(&mut self) {
        let mut g = self.shared.lock();
        g.closed = true;
        drop(g);
        self.shared.changed.notify_all();
    }
}

/// Read-only cursor over a stream.
#[derive(Debug)]
pub struct StreamView {
    shared: Arc<Shared>,
    cursor: u64,
    reader: Option<u64>,
}

impl StreamView {
    pub(crate) fn register(shared: Arc<Shared>, at: Option<u64>) -> Self {
        let mut g = shared.lock();
        let cursor = at.unwrap_or(g.base).max(g.base);
        let id = g.next_reader;
        g.next_reader += 1;
        g.readers.insert(id, cursor);
        drop(g);
        StreamView {
            shared,
            cursor,
            reader: Some(id),
        }
    }

    pub(crate) fn observer(shared: Arc<Shared>) -> Self {
        let cursor = shared.lock().base;
        StreamView {
            shared,
            cursor,
            reader: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.shared.name
    }

    /// Sequence number of the next item this view will return.
    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    fn take(&mut self, g: &mut MutexGuard<'_, Inner>) -> Option<Arc<DataItem>> {
        if self.cursor < g.base {
            // truncated away underneath an observer
            self.cursor = g.base;
        }
        if self.cursor >= g.next_seq {
            return None;
        }
        let item = Arc::clone(&g.items[(self.cursor - g.base) as usize]);
        self.cursor += 1;
        if let Some(id) = self.reader {
            g.readers.insert(id, self.cursor);
            if self.shared.config.truncate {
                g.truncate();
            }
            self.shared.changed.notify_all();
        }
        Some(item)
    }

    /// Next item, blocking until one is appended. `None` once the stream is
    /// closed and drained, or the run was stopped.
    pub fn next_item(&mut self) -> Option<Arc<DataItem>> {
        let shared = Arc::clone(&self.shared);
        let mut g = shared.lock();
        loop {
            if shared.stopped() {
                return None;
            }
            if let Some(item) = self.take(&mut g) {
                return Some(item);
            }
            if g.closed {
                return None;
            }
            g = shared.changed.wait(g).unwrap_or_else(|e| e.into_inner());
        }
    }

    /// Next item if one is already available.
    pub fn try_next(&mut self) -> Option<Arc<DataItem>> {
        let shared = Arc::clone(&self.shared);
        let mut g = shared.lock();
        self.take(&mut g)
    }

    /// Every retained item, oldest first, without moving the cursor.
    pub fn snapshot(&self) -> Vec<Arc<DataItem>> {
        self.shared.lock().items.iter().cloned().collect()
    }

    /// Number of items appended so far.
    pub fn len(&self) -> u64 {
        self.shared.lock().next_seq
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_closed(&self) -> bool {
        self.shared.lock().closed
    }

    /// Blocks until the writer has closed the stream (or the run stopped).
    pub fn wait_closed(&self) {
        let mut g = self.shared.lock();
        while !g.closed && !self.shared.stopped() {
            g = self.shared.changed.wait(g).unwrap_or_else(|e| e.into_inner());
        }
    }
}

impl Clone for StreamView {
    fn clone(&self) -> Self {
        match self.reader {
            Some(_) => StreamView::register(Arc::clone(&self.shared), Some(self.cursor)),
            None => StreamView {
                shared: Arc::clone(&self.shared),
                cursor: self.cursor,
                reader: None,
            },
        }
    }
}

impl Drop for StreamView {
    fn drop(&mut self) {
        if let Some(id) = self.reader {
            let mut g = self.shared.lock();
            g.readers.remove(&id);
            drop(g);
            self.shared.changed.notify_all();
        }
    }
}

impl Iterator for StreamView {
    type Item = Arc<DataItem>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_item()
    }
}
