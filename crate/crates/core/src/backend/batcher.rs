//! Server-side request batching.
//!
//! The batcher is driven by an external clock: callers push enqueued
//! requests, ask for the next trigger time and take a batch once the device
//! is free at or after that time.

use std::collections::VecDeque;

use crate::spec::{BatchingMode, BatchingSpec};
use crate::time::{secs_to_nanos, Nanos};

#[derive(Debug, Clone)]
pub struct Batcher {
    mode: BatchingMode,
    max_batch: usize,
    max_delay: Nanos,
    queue: VecDeque<(usize, Nanos)>,
}

impl Batcher {
    pub fn new(spec: &BatchingSpec) -> Self {
        Batcher {
            mode: spec.mode,
            max_batch: spec.batch_size.max(1) as usize,
            max_delay: secs_to_nanos(spec.max_queue_delay.unwrap_or(0.0)),
            queue: VecDeque::new(),
        }
    }

    pub fn dynamic(max_batch: usize, max_delay: f64) -> Self {
        Batcher::new(&BatchingSpec {
            mode: BatchingMode::Dynamic,
            batch_size: max_batch as u32,
            max_queue_delay: Some(max_delay),
        })
    }

    pub fn max_batch(&self) -> usize {
        self.max_batch
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Enqueues request `id` at time `t`. Enqueue times must be
    /// non-decreasing.
    pub fn push(&mut self, id: usize, t: Nanos) {
        debug_assert!(self.queue.back().is_none_or(|&(_, last)| last <= t));
        self.queue.push_back((id, t));
    }

    /// Earliest time a batch may dispatch given the current queue.
    ///
    /// Dynamic: when the queue reaches the size cap, or when the oldest
    /// request has waited `max_queue_delay`, whichever comes first. Static:
    /// when exactly `batch_size` requests are queued; with `drained` set (no
    /// more requests will ever arrive) a partial batch flushes immediately.
    pub fn next_trigger(&self, drained: bool) -> Option<Nanos> {
        let (_, oldest) = *self.queue.front()?;
        let full_at = self.queue.get(self.max_batch - 1).map(|&(_, t)| t);
        match self.mode {
            BatchingMode::Dynamic => {
                let deadline = oldest.saturating_add(self.max_delay);
                Some(full_at.map_or(deadline, |f| f.min(deadline)))
            }
            BatchingMode::Static => match full_at {
                Some(t) => Some(t),
                None if drained => self.queue.back().map(|&(_, t)| t),
                None => None,
            },
        }
    }

    /// Removes up to `batch_size` requests in FIFO order.
    pub fn take(&mut self) -> Vec<usize> {
        let n = self.queue.len().min(self.max_batch);
        self.queue.drain(..n).map(|(id, _)| id).collect()
    }
}

/// A planned dispatch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchEvent {
    pub dispatch_at: Nanos,
    pub members: Vec<usize>,
}

/// Plans batches for a fixed arrival sequence on a device whose batches take
/// `service(batch_len)` nanoseconds. Requests arriving at or before a
/// dispatch instant join that batch.
pub fn plan_batches(
    arrivals: &[Nanos],
    spec: &BatchingSpec,
    mut service: impl FnMut(usize) -> Nanos,
) -> Vec<BatchEvent> {
    let mut batcher = Batcher::new(spec);
    let mut next = 0usize;
    let mut device_free: Nanos = 0;
    let mut events = Vec::new();
    loop {
        let drained = next == arrivals.len();
        let Some(trigger) = batcher.next_trigger(drained) else {
            if drained {
                break;
            }
            batcher.push(next, arrivals[next]);
            next += 1;
            continue;
        };
        let dispatch_at = trigger.max(device_free);
        if !drained && arrivals[next] <= dispatch_at {
            batcher.push(next, arrivals[next]);
            next += 1;
            continue;
        }
        let members = batcher.take();
        device_free = dispatch_at + service(members.len());
        events.push(BatchEvent { dispatch_at, members });
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;

    const MS: Nanos = 1_000_000;

    fn dynamic(b: u32, delay: f64) -> BatchingSpec {
        BatchingSpec {
            mode: BatchingMode::Dynamic,
            batch_size: b,
            max_queue_delay: Some(delay),
        }
    }

    #[test]
    fn full_queue_dispatches_at_once() {
        let ev = plan_batches(&[0; 8], &dynamic(8, 0.005), |_| 0);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].dispatch_at, 0);
        assert_eq!(ev[0].members.len(), 8);
    }

    #[test]
    fn partial_queue_waits_for_deadline() {
        let ev = plan_batches(&[0, 0, 0], &dynamic(8, 0.005), |_| 0);
        assert_eq!(ev, vec![BatchEvent { dispatch_at: 5 * MS, members: vec![0, 1, 2] }]);
    }

    #[test]
    fn millisecond_arrivals_trace() {
        // hand trace: oldest at 0 expires at 5 ms and takes 0..=5 (tie
        // included); oldest at 6 expires at 11 ms and takes the rest
        let arrivals: Vec<Nanos> = (0..10).map(|i| i * MS).collect();
        let ev = plan_batches(&arrivals, &dynamic(8, 0.005), |_| 0);
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0].dispatch_at, 5 * MS);
        assert_eq!(ev[0].members, (0..6).collect::<Vec<_>>());
        assert_eq!(ev[1].dispatch_at, 11 * MS);
        assert_eq!(ev[1].members, (6..10).collect::<Vec<_>>());
    }

    #[test]
    fn busy_device_grows_batches() {
        // device busy 20 ms per batch: everything that arrives meanwhile joins
        let arrivals: Vec<Nanos> = (0..10).map(|i| i * MS).collect();
        let ev = plan_batches(&arrivals, &dynamic(8, 0.0), |_| 20 * MS);
        assert_eq!(ev[0].members, vec![0]);
        assert_eq!(ev[1].dispatch_at, 20 * MS);
        assert_eq!(ev[1].members.len(), 8);
        assert_eq!(ev[2].members.len(), 1);
    }

    #[test]
    fn static_waits_for_full_batch_then_flushes() {
        let spec = BatchingSpec {
            mode: BatchingMode::Static,
            batch_size: 4,
            max_queue_delay: None,
        };
        let arrivals: Vec<Nanos> = (0..6).map(|i| i * MS).collect();
        let ev = plan_batches(&arrivals, &spec, |_| 0);
        assert_eq!(ev[0].dispatch_at, 3 * MS);
        assert_eq!(ev[0].members.len(), 4);
        assert_eq!(ev[1].dispatch_at, 5 * MS);
        assert_eq!(ev[1].members.len(), 2);
    }

    #[test]
    fn every_request_dispatched_once() {
        let arrivals: Vec<Nanos> = (0..97).map(|i| i * 37 * MS / 10).collect();
        let ev = plan_batches(&arrivals, &dynamic(5, 0.002), |n| n as Nanos * MS);
        let mut seen: Vec<usize> = ev.iter().flat_map(|e| e.members.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..97).collect::<Vec<_>>());
        assert!(ev.iter().all(|e| e.members.len() <= 5));
        // FIFO and causal
        for e in &ev {
            assert!(e.members.iter().all(|&m| arrivals[m] <= e.dispatch_at));
        }
    }
}
