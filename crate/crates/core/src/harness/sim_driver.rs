//! Discrete-event driver for virtual-clock backends.
//!
//! Every request's path is computed on integer nanoseconds: preprocess,
//! uplink, queueing in the batcher, device execution, postprocess and
//! downlink. Events are processed in time order with ties broken by request
//! id, so a run is a pure function of its spec.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::perf::BatchStats;
use super::record::{RequestRecord, RequestStatus};
use super::DriverOutput;
use crate::backend::{Batcher, InferOutcome, InferRequest, ServingBackend};
use crate::error::Result;
use crate::spec::JobSpec;
use crate::time::{secs_to_nanos, Nanos};
use crate::workload::{gen_arrivals, PayloadSource};

struct Plan {
    pre: Nanos,
    post: Nanos,
    down: Nanos,
    link: crate::backend::Link,
    payloads: PayloadSource,
}

impl Plan {
    fn new_request(&self, id: u64, scheduled: Nanos, t_send: Nanos) -> RequestRecord {
        let bytes = self.payloads.len(id);
        let mut r = RequestRecord::at(id, scheduled, t_send, bytes);
        r.t_preproc_done = t_send + self.pre;
        r.t_arrive_server = r.t_preproc_done + secs_to_nanos(self.link.one_way(bytes));
        r.t_enqueue = r.t_arrive_server;
        r
    }
}

pub(crate) fn run(spec: &JobSpec, backend: &dyn ServingBackend) -> Result<DriverOutput> {
    let w = &spec.workload;
    let schedule = gen_arrivals(w)?;
    let plan = Plan {
        pre: secs_to_nanos(spec.pipeline.preprocess.duration()?),
        post: secs_to_nanos(spec.pipeline.postprocess.duration()?),
        down: secs_to_nanos(spec.backend.network.link().one_way(spec.backend.sim.response_bytes)),
        link: spec.backend.network.link(),
        payloads: PayloadSource::new(&w.payload, w.seed())?,
    };
    let closed_loop = !w.pattern.is_open_loop();
    let limit = w.num_requests;
    let horizon = w.duration.map(secs_to_nanos);

    let mut records: Vec<RequestRecord> = Vec::with_capacity(schedule.len());
    let mut arrivals: BinaryHeap<Reverse<(Nanos, u64)>> = BinaryHeap::new();
    for &offset in &schedule.offsets {
        let t = secs_to_nanos(offset);
        let r = plan.new_request(records.len() as u64, t, t);
        arrivals.push(Reverse((r.t_enqueue, r.req_id)));
        records.push(r);
    }

    let mut batcher = Batcher::new(&spec.backend.batching);
    let mut device_free: Nanos = 0;
    let mut batches = BatchStats::default();
    let mut size_sum = 0u64;
    loop {
        let drained = arrivals.is_empty();
        let Some(trigger) = batcher.next_trigger(drained) else {
            match arrivals.pop() {
                Some(Reverse((t, id))) => {
                    batcher.push(id as usize, t);
                    continue;
                }
                None => break,
            }
        };
        let dispatch_at = trigger.max(device_free);
        if let Some(&Reverse((t, id))) = arrivals.peek() {
            if t <= dispatch_at {
                arrivals.pop();
                batcher.push(id as usize, t);
                continue;
            }
        }

        let members = batcher.take();
        let batch_id = batches.count;
        let requests: Vec<InferRequest<'_>> = members
            .iter()
            .map(|&m| InferRequest {
                req_id: m as u64,
                payload_len: records[m].payload_bytes,
                body: &[],
                dispatch_at,
            })
            .collect();
        let outcomes = backend.infer(&requests)?;
        batches.count += 1;
        size_sum += members.len() as u64;
        batches.max_size = batches.max_size.max(members.len() as u64);

        for (&m, outcome) in members.iter().zip(outcomes) {
            let r = &mut records[m];
            r.batch_id = Some(batch_id);
            r.t_batch_dispatch = dispatch_at;
            match outcome {
                InferOutcome::Ok { started, done } => {
                    r.t_batch_dispatch = started;
                    r.t_infer_done = done;
                    r.t_postproc_done = done + plan.post;
                    r.t_response = r.t_postproc_done + plan.down;
                    device_free = device_free.max(done);
                }
                InferOutcome::Failed(reason) => {
                    r.t_infer_done = dispatch_at;
                    r.t_postproc_done = dispatch_at;
                    r.t_response = dispatch_at;
                    r.status = RequestStatus::Failed(reason);
                }
            }
        }

        if closed_loop {
            // each completion triggers the next send from the same client
            for &m in &members {
                let t_send = records[m].t_response;
                let issued = records.len() as u64;
                let more = match (limit, horizon) {
                    (Some(n), _) => issued < n,
                    (None, Some(h)) => t_send < h,
                    (None, None) => false,
                };
                if more {
                    let r = plan.new_request(issued, t_send, t_send);
                    arrivals.push(Reverse((r.t_enqueue, r.req_id)));
                    records.push(r);
                }
            }
        }
    }
    batches.mean_size = if batches.count == 0 {
        0.0
    } else {
        size_sum as f64 / batches.count as f64
    };
    Ok(DriverOutput { records, batches })
}
