//! Serving backends.
//!
//! A backend turns batches of requests into completions. The simulated
//! backend ([`SimBackend`]) runs on a virtual clock and is driven by the
//! harness's event loop; the HTTP backend ([`HttpBackend`]) talks to an
//! external server in real time.

pub mod batcher;
pub mod http;
pub mod network;
pub mod resources;
pub mod sim;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::time::Nanos;

pub use batcher::{plan_batches, BatchEvent, Batcher};
pub use http::HttpBackend;
pub use network::{sim_network, Link};
pub use resources::{sim_resource_sampler, BusyInterval, ResourceSample};
pub use sim::{sim_cold_start, sim_infer_latency, SimBackend, SimBackendConfig};

/// Which clock request timestamps are measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    /// Deterministic simulated time; the harness schedules every event.
    Virtual,
    /// Real elapsed time.
    Wall,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendInfo {
    pub kind: String,
    pub version: String,
    pub clock: Clock,
}

/// One request handed to a backend. Times are on the caller's clock in
/// nanoseconds since job start.
#[derive(Debug, Clone, Copy)]
pub struct InferRequest<'a> {
    pub req_id: u64,
    pub payload_len: u64,
    /// Request body. The simulated backend only looks at `payload_len`.
    pub body: &'a [u8],
    pub dispatch_at: Nanos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InferOutcome {
    Ok { started: Nanos, done: Nanos },
    Failed(String),
}

impl InferOutcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, InferOutcome::Ok { .. })
    }
}

/// What the device did during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceTrace {
    /// Sum of exact batch latencies, seconds.
    pub busy_time: f64,
    pub executed_flops: f64,
    pub intervals: Vec<BusyInterval>,
}

/// Uniform interface over serving backends.
///
/// `infer` is only valid after `start`; `stop` is idempotent. Implementations
/// are shared across sender threads.
pub trait ServingBackend: Send + Sync {
    fn info(&self) -> BackendInfo;

    /// Brings the model up and returns the cold-start time in seconds.
    fn start(&self) -> Result<f64>;

    /// Serves one batch, returning one outcome per request in order.
    fn infer(&self, batch: &[InferRequest<'_>]) -> Result<Vec<InferOutcome>>;

    /// Current resource usage, if the backend can observe it.
    fn sample_resources(&self) -> Option<ResourceSample>;

    /// Device execution history, for backends that can report it.
    fn device_trace(&self) -> Option<DeviceTrace> {
        None
    }

    fn stop(&self);
}
