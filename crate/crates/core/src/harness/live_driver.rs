//! Real-time driver for wall-clock backends.
//!
//! Open loop: a coordinator releases each request at its scheduled offset to
//! a pool of sender threads; when no sender is idle the pool grows, so a slow
//! server never delays later sends. Closed loop: `concurrency` senders each
//! keep one request in flight.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, Sender};

use super::perf::BatchStats;
use super::record::{RequestRecord, RequestStatus};
use super::DriverOutput;
use crate::backend::{InferOutcome, InferRequest, ServingBackend};
use crate::error::Result;
use crate::spec::JobSpec;
use crate::time::{duration_nanos, secs_to_nanos, Nanos};
use crate::workload::{gen_arrivals, PayloadSource};

/// Upper bound on sender threads in open-loop mode.
const MAX_SENDERS: usize = 512;

struct Ctx<'a> {
    epoch: Instant,
    pre: Duration,
    post: Duration,
    payloads: PayloadSource,
    backend: &'a dyn ServingBackend,
}

impl Ctx<'_> {
    fn now(&self) -> Nanos {
        duration_nanos(self.epoch.elapsed())
    }

    fn send_one(&self, id: u64, scheduled: Nanos) -> RequestRecord {
        let t_send = self.now();
        let bytes = self.payloads.len(id);
        let mut r = RequestRecord::at(id, scheduled, t_send, bytes);
        if !self.pre.is_zero() {
            std::thread::sleep(self.pre);
        }
        let ready = self.now();
        r.t_preproc_done = ready;
        r.t_arrive_server = ready;
        r.t_enqueue = ready;
        r.t_batch_dispatch = ready;
        let outcome = match self.payloads.payload(id) {
            Ok(payload) => {
                let req = InferRequest {
                    req_id: id,
                    payload_len: bytes,
                    body: &payload.bytes,
                    dispatch_at: ready,
                };
                match self.backend.infer(std::slice::from_ref(&req)) {
                    Ok(mut v) => v.pop().unwrap_or(InferOutcome::Failed("no outcome".into())),
                    Err(e) => InferOutcome::Failed(e.to_string()),
                }
            }
            Err(e) => InferOutcome::Failed(e.to_string()),
        };
        match outcome {
            InferOutcome::Ok { done, .. } => {
                // the round trip is all the client can see
                r.t_infer_done = done.max(ready);
                if !self.post.is_zero() {
                    std::thread::sleep(self.post);
                }
                r.t_postproc_done = self.now().max(r.t_infer_done);
                r.t_response = r.t_postproc_done;
            }
            InferOutcome::Failed(reason) => {
                let t = self.now().max(ready);
                r.t_infer_done = t;
                r.t_postproc_done = t;
                r.t_response = t;
                r.status = RequestStatus::Failed(reason);
            }
        }
        r
    }
}

pub(crate) fn run(spec: &JobSpec, backend: &dyn ServingBackend) -> Result<DriverOutput> {
    let w = &spec.workload;
    let schedule = gen_arrivals(w)?;
    let ctx = Ctx {
        epoch: Instant::now(),
        pre: Duration::from_secs_f64(spec.pipeline.preprocess.duration()?),
        post: Duration::from_secs_f64(spec.pipeline.postprocess.duration()?),
        payloads: PayloadSource::new(&w.payload, w.seed())?,
        backend,
    };
    let (done_tx, done_rx) = unbounded::<RequestRecord>();
    if w.pattern.is_open_loop() {
        open_loop(&ctx, &schedule.offsets, done_tx);
    } else {
        let concurrency = w.concurrency.unwrap_or(1) as usize;
        closed_loop(&ctx, concurrency, w.num_requests, w.duration.map(secs_to_nanos), done_tx);
    }
    let mut records: Vec<RequestRecord> = done_rx.iter().collect();
    records.sort_by_key(|r| r.req_id);
    let batches = BatchStats {
        count: records.len() as u64,
        mean_size: if records.is_empty() { 0.0 } else { 1.0 },
        max_size: u64::from(!records.is_empty()),
    };
    Ok(DriverOutput { records, batches })
}

fn open_loop(ctx: &Ctx<'_>, offsets: &[f64], done: Sender<RequestRecord>) {
    let (work_tx, work_rx) = unbounded::<(u64, Nanos)>();
    let idle = AtomicUsize::new(0);
    let spawned = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        let spawn = |rx: Receiver<(u64, Nanos)>, done: Sender<RequestRecord>| {
            spawned.fetch_add(1, Ordering::SeqCst);
            let idle = &idle;
            scope.spawn(move || loop {
                idle.fetch_add(1, Ordering::SeqCst);
                let Ok((id, scheduled)) = rx.recv() else {
                    idle.fetch_sub(1, Ordering::SeqCst);
                    break;
                };
                idle.fetch_sub(1, Ordering::SeqCst);
                let _ = done.send(ctx.send_one(id, scheduled));
            });
        };
        for (i, &offset) in offsets.iter().enumerate() {
            let scheduled = secs_to_nanos(offset);
            let now = ctx.now();
            if scheduled > now {
                std::thread::sleep(Duration::from_nanos(scheduled - now));
            }
            if idle.load(Ordering::SeqCst) == 0 && spawned.load(Ordering::SeqCst) < MAX_SENDERS {
                spawn(work_rx.clone(), done.clone());
            }
            let _ = work_tx.send((i as u64, scheduled));
        }
        drop(work_tx);
    });
}

fn closed_loop(ctx: &Ctx<'_>, concurrency: usize, limit: Option<u64>, horizon: Option<Nanos>, done: Sender<RequestRecord>) {
    let next = AtomicU64::new(0);
    std::thread::scope(|scope| {
        for _ in 0..concurrency {
            let done = done.clone();
            let next = &next;
            scope.spawn(move || loop {
                let now = ctx.now();
                if horizon.is_some_and(|h| now >= h) {
                    break;
                }
                let id = next.fetch_add(1, Ordering::SeqCst);
                if limit.is_some_and(|n| id >= n) {
                    break;
                }
                let _ = done.send(ctx.send_one(id, now));
            });
        }
    });
}
