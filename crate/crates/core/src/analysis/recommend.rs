//! SLO-constrained configuration recommender.

use serde::{Deserialize, Serialize};

use super::metrics::Metric;
use crate::harness::PerfRecord;
use crate::spec::{JobState, Slo};

pub const TOP_N: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub job_id: String,
    pub p99: f64,
    /// The ranking metric; `None` ranks last.
    pub value: Option<f64>,
    pub record: PerfRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestMiss {
    pub job_id: String,
    pub p99: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub metric: String,
    pub top: Vec<Candidate>,
    /// Smallest p99 seen, reported when nothing meets the SLO.
    pub nearest_miss: Option<NearestMiss>,
}

/// Up to three finished records with p99 within the SLO (and cloud cost
/// within budget, when one is given), best `rank_by` first; ties go to the
/// lower p99, then the lower job id.
pub fn recommend(records: &[PerfRecord], slo: &Slo, rank_by: Metric) -> Recommendation {
    let finished: Vec<(&PerfRecord, f64)> = records
        .iter()
        .filter(|r| r.state == JobState::Done)
        .filter_map(|r| r.percentile(0.99).map(|p| (r, p)))
        .collect();
    let within_budget = |r: &PerfRecord| match slo.budget_per_1k_requests {
        None => true,
        Some(budget) => r.costs.cloud_cost_per_req().is_some_and(|c| c * 1000.0 <= budget),
    };
    let mut passing: Vec<Candidate> = finished
        .iter()
        .filter(|(r, p99)| *p99 <= slo.latency_p99 && within_budget(r))
        .map(|(r, p99)| Candidate {
            job_id: r.job_id.clone(),
            p99: *p99,
            value: rank_by.value(r),
            record: (*r).clone(),
        })
        .collect();
    passing.sort_by(|a, b| {
        let by_value = match (a.value, b.value) {
            (Some(x), Some(y)) => rank_by.better_first(x, y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        };
        by_value.then(a.p99.total_cmp(&b.p99)).then_with(|| a.job_id.cmp(&b.job_id))
    });
    passing.truncate(TOP_N);
    let nearest_miss = if passing.is_empty() {
        finished
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.job_id.cmp(&b.0.job_id)))
            .map(|(r, p99)| NearestMiss {
                job_id: r.job_id.clone(),
                p99: *p99,
            })
    } else {
        None
    };
    Recommendation {
        metric: rank_by.to_string(),
        top: passing,
        nearest_miss,
    }
}
