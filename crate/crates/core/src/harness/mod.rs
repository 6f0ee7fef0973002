//! Drives one job end to end and aggregates its [`PerfRecord`].
//!
//! Virtual-clock backends run under a deterministic event loop, so the
//! same spec always yields the same records. Wall-clock backends run under a
//! real-time load generator.

pub mod digest;
mod live_driver;
pub mod perf;
pub mod pipeline;
pub mod record;
mod sim_driver;

use crate::backend::resources::sim_resource_sampler;
use crate::backend::{Clock, HttpBackend, ServingBackend, SimBackend, SimBackendConfig};
use crate::catalog::{Catalog, HardwareProfile};
use crate::error::{Error, Result};
use crate::modelgen::{generate_model, ModelDescriptor, ModelRepository};
use crate::spec::{BackendKind, JobSpec, JobState, ModelSource};
use crate::time::{nanos_to_secs, unix_now};
use crate::workload::PRNG_ALGORITHM;

pub use digest::{nearest_rank, DigestSummary, LatencyDigest};
pub use perf::{
    compute_costs, stage_breakdown, BatchStats, CloudCost, Costs, DeviceStats, EnvLog, PerfRecord, SoftwareVersions,
    StageStat, Usage,
};
pub use record::{read_records, write_records, RequestRecord, RequestStatus, Stage};

pub(crate) struct DriverOutput {
    pub records: Vec<RequestRecord>,
    pub batches: BatchStats,
}

/// A job with its model and hardware resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct JobInputs {
    pub spec: JobSpec,
    pub model: ModelDescriptor,
    pub hardware: Option<HardwareProfile>,
    /// Settings changed from the submitted spec, recorded in the run log.
    pub overrides: Vec<String>,
}

impl JobInputs {
    /// Resolves the spec's model (generated or from `models`) and hardware.
    pub fn resolve(spec: &JobSpec, catalog: &Catalog, models: Option<&ModelRepository>) -> Result<Self> {
        let model = match &spec.model {
            ModelSource::Generate(params) => generate_model(params)?,
            ModelSource::Repository(id) => match models {
                Some(repo) => repo.get(id)?,
                None => {
                    return Err(Error::NotFound {
                        kind: "model",
                        id: id.clone(),
                    })
                }
            },
        };
        let hardware = match &spec.backend.hardware_id {
            Some(id) => Some(catalog.resolve(id)?.clone()),
            None => None,
        };
        Ok(JobInputs {
            spec: spec.clone(),
            model,
            hardware,
            overrides: Vec::new(),
        })
    }

    pub fn sim_config(&self) -> Option<SimBackendConfig> {
        match (self.spec.backend.kind, &self.hardware) {
            (BackendKind::Sim, Some(h)) => Some(SimBackendConfig::from_spec(&self.spec, h.clone(), self.model.clone())),
            _ => None,
        }
    }

    /// Instantiates the backend the spec asks for.
    pub fn build_backend(&self) -> Result<Box<dyn ServingBackend>> {
        let b = &self.spec.backend;
        match b.kind {
            BackendKind::Sim => {
                let cfg = self
                    .sim_config()
                    .ok_or_else(|| Error::validation("backend.hardware_id", "required for the sim backend"))?;
                Ok(Box::new(SimBackend::new(cfg)))
            }
            BackendKind::Http => {
                let endpoint = b
                    .endpoint
                    .as_deref()
                    .ok_or_else(|| Error::validation("backend.endpoint", "required for the http backend"))?;
                Ok(Box::new(HttpBackend::new(endpoint, b.timeout)))
            }
        }
    }
}

/// Builds the spec's backend and runs the job on it.
pub fn execute(job_id: &str, inputs: &JobInputs) -> Result<PerfRecord> {
    let backend = inputs.build_backend()?;
    run_job(job_id, inputs, backend.as_ref())
}

/// Runs a job on `backend`.
///
/// A backend that fails to start yields a FAILED record with every request
/// counted as failed; request-level failures only raise the error rate.
pub fn run_job(job_id: &str, inputs: &JobInputs, backend: &dyn ServingBackend) -> Result<PerfRecord> {
    run_job_with_records(job_id, inputs, backend).map(|(record, _)| record)
}

/// [`run_job`], also returning the per-request records.
pub fn run_job_with_records(
    job_id: &str,
    inputs: &JobInputs,
    backend: &dyn ServingBackend,
) -> Result<(PerfRecord, Vec<RequestRecord>)> {
    let spec = &inputs.spec;
    let started_at = unix_now();
    let env = |finished_at: f64| EnvLog {
        job_spec: spec.clone(),
        model: inputs.model.clone(),
        model_hash: inputs.model.descriptor_hash(),
        hardware: inputs.hardware.clone(),
        hardware_hash: inputs.hardware.as_ref().map(HardwareProfile::profile_hash),
        backend: backend.info(),
        sim_config: inputs.sim_config(),
        prng: PRNG_ALGORITHM.to_string(),
        job_seed: spec.seed,
        workload_seed: spec.workload.seed(),
        overrides: inputs.overrides.clone(),
        software: SoftwareVersions::current(),
        started_at,
        finished_at,
    };

    let cold_start = match backend.start() {
        Ok(t) => t,
        Err(e) => {
            let scheduled = crate::workload::gen_arrivals(&spec.workload)
                .map(|s| spec.workload.num_requests.unwrap_or(s.len() as u64))
                .unwrap_or(0);
            let record = PerfRecord {
                job_id: job_id.to_string(),
                job_name: spec.job_name.clone(),
                state: JobState::Failed,
                failure: Some(e.to_string()),
                scheduled,
                ok: 0,
                failed: scheduled,
                error_rate: if scheduled == 0 { 0.0 } else { 1.0 },
                throughput: 0.0,
                wall_time: 0.0,
                cold_start: 0.0,
                e2e: LatencyDigest::from_samples(spec.collect.digest, []),
                summary: None,
                stages: Vec::new(),
                batches: BatchStats::default(),
                device: None,
                resources: Vec::new(),
                costs: Costs::default(),
                env_log: env(unix_now()),
            };
            return Ok((record, Vec::new()));
        }
    };

    let output = match backend.info().clock {
        Clock::Virtual => sim_driver::run(spec, backend),
        Clock::Wall => live_driver::run(spec, backend),
    };
    backend.stop();
    let DriverOutput { records, batches } = output?;
    let record = aggregate(job_id, inputs, backend, cold_start, &records, batches, env(unix_now()))?;
    Ok((record, records))
}

fn aggregate(
    job_id: &str,
    inputs: &JobInputs,
    backend: &dyn ServingBackend,
    cold_start: f64,
    records: &[RequestRecord],
    batches: BatchStats,
    env_log: EnvLog,
) -> Result<PerfRecord> {
    let spec = &inputs.spec;
    let collect = &spec.collect;
    let scheduled = records.len() as u64;
    let ok = records.iter().filter(|r| r.is_ok()).count() as u64;
    let failed = scheduled - ok;
    let first_send = records.iter().map(|r| r.t_send).min().unwrap_or(0);
    let last_response = records.iter().map(|r| r.t_response).max().unwrap_or(0);
    let wall_time = nanos_to_secs(last_response - first_send);
    let throughput = if wall_time > 0.0 { ok as f64 / wall_time } else { 0.0 };

    let warmup = crate::time::secs_to_nanos(collect.warmup);
    let measured: Vec<RequestRecord> = records
        .iter()
        .filter(|r| r.is_ok() && r.scheduled_offset >= warmup)
        .cloned()
        .collect();
    let e2e = LatencyDigest::from_samples(collect.digest, measured.iter().map(|r| nanos_to_secs(r.e2e())));
    let summary = if e2e.is_empty() {
        None
    } else {
        Some(e2e.summary(&collect.percentiles)?)
    };
    let stages = if collect.stages && !measured.is_empty() {
        stage_breakdown(&measured, collect.digest, &collect.percentiles)?
    } else {
        Vec::new()
    };

    let trace = backend.device_trace();
    let device = trace.as_ref().map(|t| DeviceStats {
        busy_time: t.busy_time,
        executed_flops: t.executed_flops,
        mean_utilization: if wall_time > 0.0 {
            (t.busy_time / wall_time).clamp(0.0, 1.0)
        } else {
            0.0
        },
        achieved_flops: if t.busy_time > 0.0 {
            t.executed_flops / t.busy_time
        } else {
            0.0
        },
    });
    let resources = match (&trace, collect.resources, &inputs.hardware) {
        (Some(t), true, Some(h)) => sim_resource_sampler(
            &t.intervals,
            inputs.model.weight_bytes,
            inputs.model.activation_bytes_per_sample,
            h.mem_capacity,
            collect.resource_sample_interval,
            last_response,
        ),
        _ => Vec::new(),
    };
    let costs = match &inputs.hardware {
        Some(h) if throughput > 0.0 => compute_costs(
            &Usage {
                requests: ok,
                wall_time,
                throughput,
                mean_utilization: device.as_ref().map(|d| d.mean_utilization),
            },
            h,
            collect.carbon_intensity,
        )?,
        _ => Costs::default(),
    };

    Ok(PerfRecord {
        job_id: job_id.to_string(),
        job_name: spec.job_name.clone(),
        state: JobState::Done,
        failure: None,
        scheduled,
        ok,
        failed,
        error_rate: if scheduled == 0 { 0.0 } else { failed as f64 / scheduled as f64 },
        throughput,
        wall_time,
        cold_start,
        e2e,
        summary,
        stages,
        batches,
        device,
        resources,
        costs,
        env_log,
    })
}

/// Builds the spec's backend and runs the job, also returning the
/// per-request records.
pub fn execute_with_records(job_id: &str, inputs: &JobInputs) -> Result<(PerfRecord, Vec<RequestRecord>)> {
    let backend = inputs.build_backend()?;
    run_job_with_records(job_id, inputs, backend.as_ref())
}

/// Re-runs a simulated job from its run log and checks that every digest
/// comes out bit-identical.
pub fn replay(record: &PerfRecord) -> Result<PerfRecord> {
    let env = &record.env_log;
    if env.backend.clock != Clock::Virtual {
        return Err(Error::validation(
            "backend",
            format!("only simulated runs can be replayed, this one used `{}`", env.backend.kind),
        ));
    }
    let inputs = JobInputs {
        spec: env.job_spec.clone(),
        model: env.model.clone(),
        hardware: env.hardware.clone(),
        overrides: env.overrides.clone(),
    };
    let again = execute(&format!("{}-replay", record.job_id), &inputs)?;
    let mut diffs = Vec::new();
    if again.e2e != record.e2e {
        diffs.push("e2e digest".to_string());
    }
    if again.summary != record.summary {
        diffs.push("e2e summary".to_string());
    }
    if again.stages != record.stages {
        diffs.push("stage digests".to_string());
    }
    if (again.scheduled, again.ok, again.failed) != (record.scheduled, record.ok, record.failed) {
        diffs.push("request counts".to_string());
    }
    if again.throughput.to_bits() != record.throughput.to_bits() {
        diffs.push("throughput".to_string());
    }
    if diffs.is_empty() {
        Ok(again)
    } else {
        Err(Error::ReplayMismatch(format!("{} differ for job {}", diffs.join(", "), record.job_id)))
    }
}
