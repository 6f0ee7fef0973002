//! Aggregated job results, costs and the run log.

use serde::{Deserialize, Serialize};

use super::digest::{DigestSummary, LatencyDigest};
use super::record::{RequestRecord, Stage};
use crate::backend::{BackendInfo, ResourceSample, SimBackendConfig};
use crate::catalog::HardwareProfile;
use crate::error::{Error, Result};
use crate::hashing::content_hash;
use crate::modelgen::ModelDescriptor;
use crate::spec::{DigestKind, JobSpec, JobState};
use crate::time::nanos_to_secs;

/// One stage's latency statistics and its share of mean end-to-end latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStat {
    pub stage: Stage,
    pub summary: DigestSummary,
    pub fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub count: u64,
    pub mean_size: f64,
    pub max_size: u64,
}

/// Device-side figures, available for the simulated backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceStats {
    /// Sum of batch execution times, seconds.
    pub busy_time: f64,
    pub executed_flops: f64,
    /// Busy time over wall time.
    pub mean_utilization: f64,
    /// `executed_flops / busy_time`, FLOP/s.
    pub achieved_flops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudCost {
    pub provider_label: String,
    pub instance_label: String,
    /// USD per request.
    pub cost_per_req: f64,
}

/// Per-request costs. `None` means not computable (no utilization figure,
/// no cloud offers), never zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Costs {
    /// Joules per request.
    pub energy_per_req: Option<f64>,
    /// Grams CO2 per request.
    pub co2_per_req: Option<f64>,
    pub cloud: Option<Vec<CloudCost>>,
}

impl Costs {
    /// Cheapest offer, USD per request.
    pub fn cloud_cost_per_req(&self) -> Option<f64> {
        self.cloud
            .as_ref()?
            .iter()
            .map(|c| c.cost_per_req)
            .min_by(f64::total_cmp)
    }
}

/// Inputs to [`compute_costs`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Usage {
    pub requests: u64,
    /// Seconds.
    pub wall_time: f64,
    /// Requests/s.
    pub throughput: f64,
    pub mean_utilization: Option<f64>,
}

/// Energy, carbon and cloud cost per request.
///
/// `energy = tdp · utilization · wall / n`, `co2 = energy_kWh · intensity`,
/// `cloud = hourly_rate / (throughput · 3600)`.
pub fn compute_costs(usage: &Usage, h: &HardwareProfile, carbon_intensity: f64) -> Result<Costs> {
    if usage.throughput.is_nan() || usage.throughput <= 0.0 || usage.requests == 0 {
        return Err(Error::validation("throughput", "costs need a positive throughput"));
    }
    let energy = usage
        .mean_utilization
        .map(|u| h.tdp_power * u * usage.wall_time / usage.requests as f64);
    let co2 = energy.map(|j| j / 3.6e6 * carbon_intensity);
    let cloud = (!h.cloud_offers.is_empty()).then(|| {
        h.cloud_offers
            .iter()
            .map(|o| CloudCost {
                provider_label: o.provider_label.clone(),
                instance_label: o.instance_label.clone(),
                cost_per_req: o.hourly_rate / (usage.throughput * 3600.0),
            })
            .collect()
    });
    Ok(Costs {
        energy_per_req: energy,
        co2_per_req: co2,
        cloud,
    })
}

/// Per-stage digests over ok records, with each stage's share of mean e2e
/// latency. Fractions sum to 1 up to rounding.
pub fn stage_breakdown(records: &[RequestRecord], kind: DigestKind, percentiles: &[f64]) -> Result<Vec<StageStat>> {
    let ok: Vec<&RequestRecord> = records.iter().filter(|r| r.is_ok()).collect();
    if ok.is_empty() {
        return Err(Error::EmptyDigest);
    }
    let total: u128 = ok.iter().map(|r| u128::from(r.e2e())).sum();
    Stage::ALL
        .iter()
        .enumerate()
        .map(|(i, &stage)| {
            let durations: Vec<u64> = ok.iter().map(|r| r.stage_durations()[i]).collect();
            let stage_total: u128 = durations.iter().map(|&d| u128::from(d)).sum();
            let digest = LatencyDigest::from_samples(kind, durations.iter().map(|&d| nanos_to_secs(d)));
            Ok(StageStat {
                stage,
                summary: digest.summary(percentiles)?,
                fraction: if total == 0 { 0.0 } else { stage_total as f64 / total as f64 },
            })
        })
        .collect()
}

/// Software and platform versions recorded with every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftwareVersions {
    pub servbench: String,
    pub os: String,
    pub arch: String,
}

impl SoftwareVersions {
    pub fn current() -> Self {
        SoftwareVersions {
            servbench: crate::VERSION.to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        }
    }
}

/// Everything needed to re-run a job and to interpret its numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvLog {
    /// Effective, fully-defaulted spec (including overrides).
    pub job_spec: JobSpec,
    pub model: ModelDescriptor,
    pub model_hash: String,
    pub hardware: Option<HardwareProfile>,
    pub hardware_hash: Option<String>,
    pub backend: BackendInfo,
    pub sim_config: Option<SimBackendConfig>,
    pub prng: String,
    pub job_seed: u64,
    pub workload_seed: u64,
    /// Settings changed from the spec file, e.g. `seed=7`.
    pub overrides: Vec<String>,
    pub software: SoftwareVersions,
    /// Unix seconds.
    pub started_at: f64,
    pub finished_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfRecord {
    pub job_id: String,
    pub job_name: String,
    /// DONE, or FAILED when the backend could not start.
    pub state: JobState,
    pub failure: Option<String>,
    pub scheduled: u64,
    pub ok: u64,
    pub failed: u64,
    pub error_rate: f64,
    /// `ok / (last t_response − first t_send)`, requests/s.
    pub throughput: f64,
    /// Last response minus first send, seconds.
    pub wall_time: f64,
    /// Seconds.
    pub cold_start: f64,
    /// End-to-end latency of ok requests after warm-up.
    pub e2e: LatencyDigest,
    /// Summary of `e2e` at the configured percentiles; absent when empty.
    pub summary: Option<DigestSummary>,
    pub stages: Vec<StageStat>,
    pub batches: BatchStats,
    pub device: Option<DeviceStats>,
    pub resources: Vec<ResourceSample>,
    pub costs: Costs,
    pub env_log: EnvLog,
}

impl PerfRecord {
    /// Hash of the result content, ignoring the job id and wall-clock
    /// timestamps so that re-runs can be compared.
    pub fn content_hash(&self) -> String {
        let mut copy = self.clone();
        copy.job_id.clear();
        copy.env_log.started_at = 0.0;
        copy.env_log.finished_at = 0.0;
        content_hash(&copy)
    }

    pub fn percentile(&self, q: f64) -> Option<f64> {
        self.e2e.percentile(q).ok()
    }

    pub fn hardware_id(&self) -> Option<&str> {
        self.env_log.job_spec.backend.hardware_id.as_deref()
    }

    /// Batch size the job was configured with.
    pub fn batch_size(&self) -> u32 {
        self.env_log.job_spec.backend.batching.batch_size
    }
}
