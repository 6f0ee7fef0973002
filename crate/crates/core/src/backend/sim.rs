//! Roofline-consistent simulated accelerator.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::resources::{BusyInterval, ResourceSample};
use super::{BackendInfo, Clock, DeviceTrace, InferOutcome, InferRequest, Link, ServingBackend};
use crate::catalog::{HardwareProfile, Precision};
use crate::error::{Error, Result};
use crate::modelgen::ModelDescriptor;
use crate::spec::{BatchingSpec, JobSpec};
use crate::time::{nanos_to_secs, secs_to_nanos, Nanos};

/// Everything the simulator needs; recorded verbatim in the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimBackendConfig {
    pub hardware: HardwareProfile,
    pub model: ModelDescriptor,
    pub precision: Precision,
    pub batching: BatchingSpec,
    pub compute_efficiency: f64,
    pub mem_efficiency: f64,
    /// Seconds per batch.
    pub fixed_overhead: f64,
    /// Seconds.
    pub base_start: f64,
    /// Bytes/s.
    pub load_bandwidth: f64,
    pub network: Link,
    pub response_bytes: u64,
}

impl SimBackendConfig {
    pub fn from_spec(spec: &JobSpec, hardware: HardwareProfile, model: ModelDescriptor) -> Self {
        let b = &spec.backend;
        SimBackendConfig {
            hardware,
            model,
            precision: b.numeric_precision,
            batching: b.batching.clone(),
            compute_efficiency: b.sim.compute_efficiency,
            mem_efficiency: b.sim.mem_efficiency,
            fixed_overhead: b.sim.fixed_overhead,
            base_start: b.sim.base_start(),
            load_bandwidth: b.sim.load_bandwidth,
            network: b.network.link(),
            response_bytes: b.sim.response_bytes,
        }
    }

    /// Effective compute roof, FLOP/s.
    pub fn compute_roof(&self) -> f64 {
        self.compute_efficiency * self.hardware.peak_flops(self.precision)
    }

    /// Effective memory bandwidth, bytes/s.
    pub fn memory_roof(&self) -> f64 {
        self.mem_efficiency * self.hardware.mem_bandwidth
    }

    /// Batch size at which the compute term overtakes the memory term,
    /// `W / (f·B'/P' − a)`; infinite if the model never becomes
    /// compute-bound.
    pub fn crossover_batch(&self) -> f64 {
        let m = &self.model;
        let denom = m.flops_per_sample as f64 * self.memory_roof() / self.compute_roof()
            - m.activation_bytes_per_sample as f64;
        if denom <= 0.0 {
            f64::INFINITY
        } else {
            m.weight_bytes as f64 / denom
        }
    }
}

/// Batch latency in seconds:
/// `fixed_overhead + max(b·f / (e_c·P), (W + b·a) / (e_m·B))`.
pub fn sim_infer_latency(m: &ModelDescriptor, h: &HardwareProfile, b: u64, cfg: &SimBackendConfig) -> f64 {
    debug_assert!(b >= 1);
    let b = b as f64;
    let compute = b * m.flops_per_sample as f64 / (cfg.compute_efficiency * h.peak_flops(cfg.precision));
    let memory = (m.weight_bytes as f64 + b * m.activation_bytes_per_sample as f64)
        / (cfg.mem_efficiency * h.mem_bandwidth);
    cfg.fixed_overhead + compute.max(memory)
}

/// `base_start + weight_bytes / load_bandwidth`, seconds.
pub fn sim_cold_start(m: &ModelDescriptor, cfg: &SimBackendConfig) -> f64 {
    cfg.base_start + m.weight_bytes as f64 / cfg.load_bandwidth
}

#[derive(Debug, Default)]
struct DeviceState {
    started: bool,
    stopped: bool,
    device_free: Nanos,
    busy_time: f64,
    executed_flops: f64,
    intervals: Vec<BusyInterval>,
}

/// Simulated single-device server. Batches run one at a time; a batch
/// dispatched while the device is busy starts when it frees up.
#[derive(Debug)]
pub struct SimBackend {
    cfg: SimBackendConfig,
    state: Mutex<DeviceState>,
}

impl SimBackend {
    pub fn new(cfg: SimBackendConfig) -> Self {
        SimBackend {
            cfg,
            state: Mutex::new(DeviceState::default()),
        }
    }

    pub fn config(&self) -> &SimBackendConfig {
        &self.cfg
    }

    pub fn latency(&self, b: u64) -> f64 {
        sim_infer_latency(&self.cfg.model, &self.cfg.hardware, b, &self.cfg)
    }

    /// Sum of exact batch latencies, seconds.
    pub fn busy_time(&self) -> f64 {
        self.lock().busy_time
    }

    pub fn executed_flops(&self) -> f64 {
        self.lock().executed_flops
    }

    pub fn busy_intervals(&self) -> Vec<BusyInterval> {
        self.lock().intervals.clone()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, DeviceState> {
        self.state.lock().expect("sim device lock poisoned")
    }

    fn batch_bytes(&self, b: u64) -> u64 {
        let m = &self.cfg.model;
        m.weight_bytes.saturating_add(b.saturating_mul(m.activation_bytes_per_sample))
    }
}

impl ServingBackend for SimBackend {
    fn info(&self) -> BackendInfo {
        BackendInfo {
            kind: "sim".into(),
            version: crate::VERSION.into(),
            clock: Clock::Virtual,
        }
    }

    fn start(&self) -> Result<f64> {
        let mut st = self.lock();
        if st.started {
            return Err(Error::Backend("sim backend already started".into()));
        }
        let m = &self.cfg.model;
        let h = &self.cfg.hardware;
        if m.weight_bytes > h.mem_capacity {
            return Err(Error::Backend(format!(
                "model load failed: {} weight bytes exceed {} capacity of {} bytes",
                m.weight_bytes, h.id, h.mem_capacity
            )));
        }
        st.started = true;
        Ok(sim_cold_start(m, &self.cfg))
    }

    fn infer(&self, batch: &[InferRequest<'_>]) -> Result<Vec<InferOutcome>> {
        let mut st = self.lock();
        if !st.started || st.stopped {
            return Err(Error::Backend("infer called on a backend that is not running".into()));
        }
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let b = batch.len() as u64;
        let needed = self.batch_bytes(b);
        if needed > self.cfg.hardware.mem_capacity {
            let reason = format!(
                "out of memory: batch of {b} needs {needed} bytes, capacity {}",
                self.cfg.hardware.mem_capacity
            );
            return Ok(vec![InferOutcome::Failed(reason); batch.len()]);
        }
        let dispatch = batch.iter().map(|r| r.dispatch_at).max().expect("non-empty");
        let started = dispatch.max(st.device_free);
        let latency = self.latency(b);
        let done = started + secs_to_nanos(latency);
        st.device_free = done;
        st.busy_time += latency;
        st.executed_flops += b as f64 * self.cfg.model.flops_per_sample as f64;
        st.intervals.push(BusyInterval {
            start: started,
            end: done,
            batch: b,
        });
        Ok(vec![InferOutcome::Ok { started, done }; batch.len()])
    }

    fn sample_resources(&self) -> Option<ResourceSample> {
        let st = self.lock();
        let now = st.device_free;
        let utilization = if now == 0 {
            0.0
        } else {
            (st.busy_time / nanos_to_secs(now)).clamp(0.0, 1.0)
        };
        let in_flight = st.intervals.last().filter(|iv| iv.end >= now).map_or(0, |iv| iv.batch);
        Some(ResourceSample {
            t: nanos_to_secs(now),
            utilization,
            mem_used: self.batch_bytes(in_flight).min(self.cfg.hardware.mem_capacity),
        })
    }

    fn stop(&self) {
        self.lock().stopped = true;
    }

    fn device_trace(&self) -> Option<DeviceTrace> {
        let st = self.lock();
        Some(DeviceTrace {
            busy_time: st.busy_time,
            executed_flops: st.executed_flops,
            intervals: st.intervals.clone(),
        })
    }
}
