//! Named metrics over perf records.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::PerfRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    /// End-to-end latency percentile, q in (0, 1).
    Percentile(f64),
    MeanLatency,
    Throughput,
    ErrorRate,
    ColdStart,
    Utilization,
    EnergyPerReq,
    Co2PerReq,
    /// Cheapest cloud offer, USD per request.
    CloudCostPerReq,
    AchievedFlops,
}

/// Accepted names, for help text.
pub const METRIC_NAMES: &str = "pNN (e.g. p50, p99, p99.9), mean_latency, throughput, error_rate, cold_start, \
utilization, energy_per_req, co2_per_req, cloud_cost_per_req (cost_per_req), achieved_flops";

impl Metric {
    pub fn value(&self, r: &PerfRecord) -> Option<f64> {
        match self {
            Metric::Percentile(q) => r.percentile(*q),
            Metric::MeanLatency => r.e2e.mean().ok(),
            Metric::Throughput => Some(r.throughput),
            Metric::ErrorRate => Some(r.error_rate),
            Metric::ColdStart => Some(r.cold_start),
            Metric::Utilization => r.device.as_ref().map(|d| d.mean_utilization),
            Metric::EnergyPerReq => r.costs.energy_per_req,
            Metric::Co2PerReq => r.costs.co2_per_req,
            Metric::CloudCostPerReq => r.costs.cloud_cost_per_req(),
            Metric::AchievedFlops => r.device.as_ref().map(|d| d.achieved_flops),
        }
    }

    pub fn higher_is_better(&self) -> bool {
        matches!(self, Metric::Throughput | Metric::Utilization | Metric::AchievedFlops)
    }

    /// `a` before `b` when `a` is better.
    pub fn better_first(&self, a: f64, b: f64) -> std::cmp::Ordering {
        if self.higher_is_better() {
            b.total_cmp(&a)
        } else {
            a.total_cmp(&b)
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Percentile(q) => write!(f, "p{}", q * 100.0),
            Metric::MeanLatency => f.write_str("mean_latency"),
            Metric::Throughput => f.write_str("throughput"),
            Metric::ErrorRate => f.write_str("error_rate"),
            Metric::ColdStart => f.write_str("cold_start"),
            Metric::Utilization => f.write_str("utilization"),
            Metric::EnergyPerReq => f.write_str("energy_per_req"),
            Metric::Co2PerReq => f.write_str("co2_per_req"),
            Metric::CloudCostPerReq => f.write_str("cloud_cost_per_req"),
            Metric::AchievedFlops => f.write_str("achieved_flops"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mean_latency" | "mean" => Metric::MeanLatency,
            "throughput" => Metric::Throughput,
            "error_rate" => Metric::ErrorRate,
            "cold_start" => Metric::ColdStart,
            "utilization" => Metric::Utilization,
            "energy_per_req" | "energy" => Metric::EnergyPerReq,
            "co2_per_req" | "co2" => Metric::Co2PerReq,
            "cloud_cost_per_req" | "cost_per_req" | "cost" => Metric::CloudCostPerReq,
            "achieved_flops" => Metric::AchievedFlops,
            other => {
                let q = other
                    .strip_prefix('p')
                    .and_then(|p| p.parse::<f64>().ok())
                    .map(|p| p / 100.0)
                    .filter(|q| *q > 0.0 && *q < 1.0)
                    .ok_or_else(|| Error::UnknownMetric(other.to_string()))?;
                Metric::Percentile(q)
            }
        })
    }
}
