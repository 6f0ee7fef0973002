//! Declarative benchmark job specs and job lifecycle states.
//!
//! A job is one TOML document. `parse_job_spec` applies every default and
//! validates the result, so any spec it returns can be executed as-is.
//! `JobSpec::to_toml` emits the fully-defaulted form, which parses back to an
//! equal value. See `docs/job-spec.md` for the schema.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::backend::network::Link;
use crate::catalog::{Catalog, Precision};
use crate::error::{from_toml, Error, Result};
use crate::harness::pipeline;
use crate::hashing::seed_from_name;
use crate::modelgen::GeneratorParams;
use crate::workload::{ArrivalPattern, WorkloadSpec};

pub const JOB_SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_PERCENTILES: [f64; 3] = [0.5, 0.95, 0.99];
pub const DEFAULT_SIM_HARDWARE: &str = "G1";
pub const DEFAULT_CARBON_INTENSITY: f64 = 475.0;
/// Used when the workload does not imply a length (closed loop by count).
pub const FALLBACK_ESTIMATED_DURATION: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    /// Id of a model in the model repository.
    Repository(String),
    Generate(GeneratorParams),
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Sim,
    Http,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Sim => "sim",
            BackendKind::Http => "http",
        })
    }
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim" => Ok(BackendKind::Sim),
            "http" => Ok(BackendKind::Http),
            other => Err(Error::validation("backend", format!("unknown backend kind `{other}`"))),
        }
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchingMode {
    #[default]
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchingSpec {
    #[serde(default)]
    pub mode: BatchingMode,
    #[serde(default = "one")]
    pub batch_size: u32,
    /// Seconds; required in dynamic mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_queue_delay: Option<f64>,
}

fn one() -> u32 {
    1
}

impl Default for BatchingSpec {
    fn default() -> Self {
        BatchingSpec {
            mode: BatchingMode::Static,
            batch_size: 1,
            max_queue_delay: None,
        }
    }
}

/// Network between client and server. Presets are engineering defaults.
#[derive(Debug, Default, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkSpec {
    /// 0.2 ms RTT, 1 Gbit/s.
    #[default]
    Lan,
    /// 3 ms RTT, 100 Mbit/s.
    Wifi,
    /// 50 ms RTT, 20 Mbit/s.
    Lte,
    /// RTT in seconds, bandwidth in bytes/s.
    Custom { rtt: f64, bandwidth: f64 },
}

impl NetworkSpec {
    pub fn link(self) -> Link {
        match self {
            NetworkSpec::Lan => Link::new(0.2e-3, 1e9 / 8.0),
            NetworkSpec::Wifi => Link::new(3e-3, 100e6 / 8.0),
            NetworkSpec::Lte => Link::new(50e-3, 20e6 / 8.0),
            NetworkSpec::Custom { rtt, bandwidth } => Link::new(rtt, bandwidth),
        }
    }
}

/// Start-up behaviour presets for the simulated server.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimProfile {
    /// 0.5 s base start.
    #[default]
    TfsLike,
    /// 10 s base start.
    TrisLike,
}

impl SimProfile {
    pub fn base_start(self) -> f64 {
        match self {
            SimProfile::TfsLike => 0.5,
            SimProfile::TrisLike => 10.0,
        }
    }
}

/// Simulated-device tunables. All values are recorded in the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimTuning {
    #[serde(default = "default_compute_efficiency")]
    pub compute_efficiency: f64,
    #[serde(default = "default_mem_efficiency")]
    pub mem_efficiency: f64,
    /// Seconds added to every batch.
    #[serde(default = "default_fixed_overhead")]
    pub fixed_overhead: f64,
    #[serde(default)]
    pub profile: SimProfile,
    /// Overrides the profile's base start time (seconds).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_start: Option<f64>,
    /// Bytes/s at which weights load during cold start.
    #[serde(default = "default_load_bandwidth")]
    pub load_bandwidth: f64,
    #[serde(default = "default_response_bytes")]
    pub response_bytes: u64,
}

fn default_compute_efficiency() -> f64 {
    0.6
}
fn default_mem_efficiency() -> f64 {
    0.75
}
fn default_fixed_overhead() -> f64 {
    0.5e-3
}
fn default_load_bandwidth() -> f64 {
    1e9
}
fn default_response_bytes() -> u64 {
    256
}

impl Default for SimTuning {
    fn default() -> Self {
        SimTuning {
            compute_efficiency: default_compute_efficiency(),
            mem_efficiency: default_mem_efficiency(),
            fixed_overhead: default_fixed_overhead(),
            profile: SimProfile::default(),
            base_start: None,
            load_bandwidth: default_load_bandwidth(),
            response_bytes: default_response_bytes(),
        }
    }
}

impl SimTuning {
    pub fn base_start(&self) -> f64 {
        self.base_start.unwrap_or_else(|| self.profile.base_start())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSpec {
    #[serde(default)]
    pub kind: BackendKind,
    /// Catalog id of the simulated device (sim), or of the serving device for
    /// cost accounting (http, optional).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hardware_id: Option<String>,
    /// Base URL of an external server (http).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub numeric_precision: Precision,
    /// Per-request client timeout in seconds (http).
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default)]
    pub network: NetworkSpec,
    #[serde(default)]
    pub batching: BatchingSpec,
    #[serde(default)]
    pub sim: SimTuning,
}

fn default_timeout() -> f64 {
    30.0
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec {
            kind: BackendKind::Sim,
            hardware_id: Some(DEFAULT_SIM_HARDWARE.into()),
            endpoint: None,
            numeric_precision: Precision::Fp32,
            timeout: default_timeout(),
            network: NetworkSpec::Lan,
            batching: BatchingSpec::default(),
            sim: SimTuning::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Slo {
    /// Seconds.
    pub latency_p99: f64,
    /// USD per 1000 requests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_per_1k_requests: Option<f64>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DigestKind {
    #[default]
    Exact,
    Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectSpec {
    #[serde(default = "default_percentiles")]
    pub percentiles: Vec<f64>,
    #[serde(default = "yes")]
    pub stages: bool,
    #[serde(default = "yes")]
    pub resources: bool,
    /// Seconds per resource sample window.
    #[serde(default = "default_sample_interval")]
    pub resource_sample_interval: f64,
    /// Requests sent before this offset (seconds) are left out of the
    /// latency digests.
    #[serde(default)]
    pub warmup: f64,
    #[serde(default)]
    pub digest: DigestKind,
    /// gCO2 per kWh.
    #[serde(default = "default_carbon")]
    pub carbon_intensity: f64,
}

fn default_percentiles() -> Vec<f64> {
    DEFAULT_PERCENTILES.to_vec()
}
fn yes() -> bool {
    true
}
fn default_sample_interval() -> f64 {
    1.0
}
fn default_carbon() -> f64 {
    DEFAULT_CARBON_INTENSITY
}

impl Default for CollectSpec {
    fn default() -> Self {
        CollectSpec {
            percentiles: default_percentiles(),
            stages: true,
            resources: true,
            resource_sample_interval: default_sample_interval(),
            warmup: 0.0,
            digest: DigestKind::Exact,
            carbon_intensity: DEFAULT_CARBON_INTENSITY,
        }
    }
}

/// A named pre/post-processor, optionally with an explicit duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProcessorSpec {
    Named(String),
    Timed { name: String, duration: f64 },
}

impl ProcessorSpec {
    pub fn name(&self) -> &str {
        match self {
            ProcessorSpec::Named(name) | ProcessorSpec::Timed { name, .. } => name,
        }
    }

    /// Simulated duration in seconds.
    pub fn duration(&self) -> Result<f64> {
        match self {
            ProcessorSpec::Timed { duration, .. } => Ok(*duration),
            ProcessorSpec::Named(name) => pipeline::default_duration(name).ok_or_else(|| {
                Error::validation(
                    "pipeline",
                    format!("unknown processor `{name}` (known: {})", pipeline::PROCESSORS.join(", ")),
                )
            }),
        }
    }
}

impl Default for ProcessorSpec {
    fn default() -> Self {
        ProcessorSpec::Named(pipeline::PASSTHROUGH.into())
    }
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    #[serde(default)]
    pub preprocess: ProcessorSpec,
    #[serde(default)]
    pub postprocess: ProcessorSpec,
}

/// A fully-defaulted, validated benchmark job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub schema_version: u32,
    pub job_name: String,
    pub user: String,
    /// Seconds; the scheduler's processing-time estimate.
    pub estimated_duration: f64,
    pub seed: u64,
    pub model: ModelSource,
    pub backend: BackendSpec,
    pub workload: WorkloadSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slo: Option<Slo>,
    pub collect: CollectSpec,
    pub pipeline: PipelineSpec,
}

/// The document as written by a user, before defaults.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobDoc {
    #[serde(default)]
    schema_version: Option<u32>,
    #[serde(default)]
    job_name: Option<String>,
    #[serde(default)]
    user: Option<String>,
    #[serde(default)]
    estimated_duration: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
    model: ModelSource,
    #[serde(default)]
    backend: Option<BackendSpec>,
    workload: WorkloadSpec,
    #[serde(default)]
    slo: Option<Slo>,
    #[serde(default)]
    collect: Option<CollectSpec>,
    #[serde(default)]
    pipeline: Option<PipelineSpec>,
}

/// Parses and validates a job spec against the bundled hardware catalog.
pub fn parse_job_spec(text: &str) -> Result<JobSpec> {
    parse_job_spec_with(text, &Catalog::bundled())
}

/// Parses and validates a job spec against `catalog`.
pub fn parse_job_spec_with(text: &str, catalog: &Catalog) -> Result<JobSpec> {
    let doc: JobDoc = toml::from_str(text).map_err(|e| from_toml(text, e))?;
    let schema_version = doc.schema_version.unwrap_or(JOB_SCHEMA_VERSION);
    let job_name = doc.job_name.unwrap_or_else(|| "unnamed".to_string());
    let seed = doc.seed.unwrap_or_else(|| seed_from_name(&job_name));
    let mut workload = doc.workload;
    if workload.seed.is_none() {
        workload.seed = Some(seed);
    }
    let estimated_duration = doc.estimated_duration.unwrap_or_else(|| {
        workload
            .expected_duration()
            .filter(|d| d.is_finite() && *d > 0.0)
            .unwrap_or(FALLBACK_ESTIMATED_DURATION)
    });
    let spec = JobSpec {
        schema_version,
        job_name,
        user: doc.user.unwrap_or_else(|| "anonymous".to_string()),
        estimated_duration,
        seed,
        model: doc.model,
        backend: doc.backend.map_or_else(BackendSpec::default, |mut b| {
            if b.kind == BackendKind::Sim && b.hardware_id.is_none() {
                b.hardware_id = Some(DEFAULT_SIM_HARDWARE.into());
            }
            b
        }),
        workload,
        slo: doc.slo,
        collect: doc.collect.unwrap_or_default(),
        pipeline: doc.pipeline.unwrap_or_default(),
    };
    spec.validate(catalog)?;
    Ok(spec)
}

impl JobSpec {
    /// A spec with every default applied, mainly for programmatic use.
    pub fn new(job_name: impl Into<String>, model: ModelSource, workload: WorkloadSpec) -> Self {
        let job_name = job_name.into();
        let seed = seed_from_name(&job_name);
        let mut workload = workload;
        workload.seed.get_or_insert(seed);
        let estimated_duration = workload
            .expected_duration()
            .filter(|d| d.is_finite() && *d > 0.0)
            .unwrap_or(FALLBACK_ESTIMATED_DURATION);
        JobSpec {
            schema_version: JOB_SCHEMA_VERSION,
            job_name,
            user: "anonymous".into(),
            estimated_duration,
            seed,
            model,
            backend: BackendSpec::default(),
            workload,
            slo: None,
            collect: CollectSpec::default(),
            pipeline: PipelineSpec::default(),
        }
    }

    /// Replaces both the job seed and the workload seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.workload.seed = Some(seed);
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("job spec serializes")
    }

    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        if self.schema_version != JOB_SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!("unsupported version {} (expected {JOB_SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.job_name.trim().is_empty() {
            return Err(Error::validation("job_name", "must not be empty"));
        }
        if !(self.estimated_duration.is_finite() && self.estimated_duration > 0.0) {
            return Err(Error::validation("estimated_duration", "must be > 0"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::validation("seed", "must fit in a signed 64-bit integer"));
        }
        if let ModelSource::Generate(params) = &self.model {
            params.validate().map_err(|e| prefix("model.generate", e))?;
        }
        if let ModelSource::Repository(id) = &self.model {
            if id.trim().is_empty() {
                return Err(Error::validation("model.repository", "must not be empty"));
            }
        }
        self.validate_backend(catalog)?;
        self.workload.validate()?;
        if self.workload.seed.is_none() {
            return Err(Error::validation("workload.seed", "must be set"));
        }
        if let Some(slo) = &self.slo {
            if !(slo.latency_p99.is_finite() && slo.latency_p99 > 0.0) {
                return Err(Error::validation("slo.latency_p99", "must be > 0"));
            }
            if slo.budget_per_1k_requests.is_some_and(|b| !(b.is_finite() && b >= 0.0)) {
                return Err(Error::validation("slo.budget_per_1k_requests", "must be >= 0"));
            }
        }
        let c = &self.collect;
        if c.percentiles.is_empty() {
            return Err(Error::validation("collect.percentiles", "must not be empty"));
        }
        if c.percentiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return Err(Error::validation("collect.percentiles", "each must be strictly in (0, 1)"));
        }
        if !(c.resource_sample_interval.is_finite() && c.resource_sample_interval > 0.0) {
            return Err(Error::validation("collect.resource_sample_interval", "must be > 0"));
        }
        if !(c.warmup.is_finite() && c.warmup >= 0.0) {
            return Err(Error::validation("collect.warmup", "must be >= 0"));
        }
        if !(c.carbon_intensity.is_finite() && c.carbon_intensity >= 0.0) {
            return Err(Error::validation("collect.carbon_intensity", "must be >= 0"));
        }
        for (field, proc_spec) in [
            ("pipeline.preprocess", &self.pipeline.preprocess),
            ("pipeline.postprocess", &self.pipeline.postprocess),
        ] {
            let d = proc_spec.duration().map_err(|e| prefix(field, e))?;
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::validation(format!("{field}.duration"), "must be >= 0"));
            }
        }
        Ok(())
    }

    fn validate_backend(&self, catalog: &Catalog) -> Result<()> {
        let b = &self.backend;
        if b.batching.batch_size == 0 {
            return Err(Error::validation("backend.batching.batch_size", "must be >= 1"));
        }
        match (b.batching.mode, b.batching.max_queue_delay) {
            (BatchingMode::Dynamic, None) => {
                return Err(Error::validation(
                    "backend.batching.max_queue_delay",
                    "max_queue_delay required for dynamic batching",
                ))
            }
            (BatchingMode::Dynamic, Some(d)) if !(d.is_finite() && d >= 0.0) => {
                return Err(Error::validation("backend.batching.max_queue_delay", "must be >= 0"))
            }
            (BatchingMode::Static, Some(_)) => {
                return Err(Error::validation(
                    "backend.batching.max_queue_delay",
                    "only valid for dynamic batching",
                ))
            }
            _ => {}
        }
        let link = b.network.link();
        if !(link.rtt.is_finite() && link.rtt >= 0.0) {
            return Err(Error::validation("backend.network.rtt", "must be >= 0"));
        }
        if !(link.bandwidth.is_finite() && link.bandwidth > 0.0) {
            return Err(Error::validation("backend.network.bandwidth", "must be > 0"));
        }
        if let Some(id) = &b.hardware_id {
            catalog.resolve(id).map_err(|_| {
                Error::validation("backend.hardware_id", format!("`{id}` is not in the hardware catalog"))
            })?;
        }
        match b.kind {
            BackendKind::Sim => {
                if b.hardware_id.is_none() {
                    return Err(Error::validation("backend.hardware_id", "required for the sim backend"));
                }
                if b.endpoint.is_some() {
                    return Err(Error::validation("backend.endpoint", "only valid for the http backend"));
                }
                let s = &b.sim;
                for (name, v) in [
                    ("compute_efficiency", s.compute_efficiency),
                    ("mem_efficiency", s.mem_efficiency),
                ] {
                    if !(v > 0.0 && v <= 1.0) {
                        return Err(Error::validation(format!("backend.sim.{name}"), "must be in (0, 1]"));
                    }
                }
                if !(s.fixed_overhead.is_finite() && s.fixed_overhead >= 0.0) {
                    return Err(Error::validation("backend.sim.fixed_overhead", "must be >= 0"));
                }
                if !(s.base_start().is_finite() && s.base_start() >= 0.0) {
                    return Err(Error::validation("backend.sim.base_start", "must be >= 0"));
                }
                if !(s.load_bandwidth.is_finite() && s.load_bandwidth > 0.0) {
                    return Err(Error::validation("backend.sim.load_bandwidth", "must be > 0"));
                }
            }
            BackendKind::Http => {
                let endpoint = b
                    .endpoint
                    .as_deref()
                    .ok_or_else(|| Error::validation("backend.endpoint", "required for the http backend"))?;
                if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
                    return Err(Error::validation("backend.endpoint", "must be an http:// or https:// URL"));
                }
                if !(b.timeout.is_finite() && b.timeout > 0.0) {
                    return Err(Error::validation("backend.timeout", "must be > 0"));
                }
                if b.batching != BatchingSpec::default() {
                    return Err(Error::validation(
                        "backend.batching",
                        "batching is configured on the external server, not in the http backend",
                    ));
                }
            }
        }
        if matches!(self.workload.pattern, ArrivalPattern::Replay) && self.workload.offsets.is_none() {
            return Err(Error::validation("workload.offsets", "required for pattern replay"));
        }
        Ok(())
    }
}

fn prefix(field: &str, err: Error) -> Error {
    match err {
        Error::Validation { field: inner, constraint } => Error::Validation {
            field: format!("{field}.{inner}"),
            constraint,
        },
        other => other,
    }
}

/// Lifecycle of a submitted job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobState {
    Submitted,
    Queued,
    Running,
    Collecting,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }

    /// Allowed moves: one step forward along
    /// SUBMITTED → QUEUED → RUNNING → COLLECTING → DONE, FAILED from any
    /// non-terminal state, and QUEUED → SUBMITTED when a worker is lost
    /// before the job started.
    pub fn can_transition(self, next: JobState) -> bool {
        use JobState::*;
        matches!(
            (self, next),
            (Submitted, Queued)
                | (Queued, Running)
                | (Running, Collecting)
                | (Collecting, Done)
                | (Queued, Submitted)
        ) || (next == Failed && !self.is_terminal())
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JobState::Submitted => "SUBMITTED",
            JobState::Queued => "QUEUED",
            JobState::Running => "RUNNING",
            JobState::Collecting => "COLLECTING",
            JobState::Done => "DONE",
            JobState::Failed => "FAILED",
        })
    }
}

/// Status of one job as tracked by the leader. Timestamps are Unix seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: String,
    pub job_name: String,
    pub user: String,
    pub state: JobState,
    pub submitted_at: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worker_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Every state entered, with its Unix timestamp.
    #[serde(default)]
    pub history: Vec<(JobState, f64)>,
}

impl JobStatus {
    pub fn new(job_id: impl Into<String>, spec: &JobSpec, now: f64) -> Self {
        JobStatus {
            job_id: job_id.into(),
            job_name: spec.job_name.clone(),
            user: spec.user.clone(),
            state: JobState::Submitted,
            submitted_at: now,
            started_at: None,
            finished_at: None,
            worker_id: None,
            reason: None,
            history: vec![(JobState::Submitted, now)],
        }
    }

    /// Applies a transition, keeping `finished_at` set iff the state is
    /// terminal.
    pub fn transition(&mut self, next: JobState, now: f64) -> Result<()> {
        if !self.state.can_transition(next) {
            return Err(Error::validation(
                "state",
                format!("illegal transition {} -> {next} for {}", self.state, self.job_id),
            ));
        }
        match next {
            JobState::Running => self.started_at = Some(now),
            JobState::Submitted => {
                self.worker_id = None;
                self.started_at = None;
            }
            _ => {}
        }
        if next.is_terminal() {
            self.finished_at = Some(now);
        }
        self.state = next;
        self.history.push((next, now));
        Ok(())
    }

    /// Job completion time: submission to completion, seconds.
    pub fn jct(&self) -> Option<f64> {
        self.finished_at.map(|f| f - self.submitted_at)
    }
}
