//! Leaderboards and plot-ready flat files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::Metric;
use crate::error::{Error, Result};
use crate::harness::PerfRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Hardware,
    Model,
    Family,
    Backend,
    /// Every record is its own group.
    Job,
}

impl GroupBy {
    pub fn key(self, r: &PerfRecord) -> String {
        match self {
            GroupBy::Hardware => r.hardware_id().unwrap_or("-").to_string(),
            GroupBy::Model => r.env_log.model.model_id.clone(),
            GroupBy::Family => r.env_log.model.family.to_string(),
            GroupBy::Backend => r.env_log.backend.kind.clone(),
            GroupBy::Job => r.job_id.clone(),
        }
    }
}

impl FromStr for GroupBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hardware" => Ok(GroupBy::Hardware),
            "model" => Ok(GroupBy::Model),
            "family" => Ok(GroupBy::Family),
            "backend" => Ok(GroupBy::Backend),
            "job" | "none" => Ok(GroupBy::Job),
            other => Err(Error::validation(
                "group_by",
                format!("unknown grouping `{other}` (hardware, model, family, backend, job)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderRow {
    pub group: String,
    pub job_id: String,
    pub value: f64,
    pub p99: Option<f64>,
    pub throughput: f64,
}

/// Best record per group by `metric`, groups ordered best first (ties by
/// group name). Records without the metric are left out.
pub fn leaderboard(records: &[PerfRecord], group_by: GroupBy, metric: Metric) -> Vec<LeaderRow> {
    let mut best: BTreeMap<String, LeaderRow> = BTreeMap::new();
    for r in records {
        let Some(value) = metric.value(r) else { continue };
        let row = LeaderRow {
            group: group_by.key(r),
            job_id: r.job_id.clone(),
            value,
            p99: r.percentile(0.99),
            throughput: r.throughput,
        };
        match best.get(&row.group) {
            Some(cur)
                if metric
                    .better_first(cur.value, value)
                    .then_with(|| cur.job_id.cmp(&row.job_id))
                    .is_le() => {}
            _ => {
                best.insert(row.group.clone(), row);
            }
        }
    }
    let mut rows: Vec<LeaderRow> = best.into_values().collect();
    rows.sort_by(|a, b| metric.better_first(a.value, b.value).then_with(|| a.group.cmp(&b.group)));
    rows
}

pub fn write_leaderboard_csv(out: impl Write, metric: Metric, rows: &[LeaderRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "group", "job_id", &metric.to_string(), "p99", "throughput"])?;
    for (i, r) in rows.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            r.group.clone(),
            r.job_id.clone(),
            r.value.to_string(),
            r.p99.map(|v| v.to_string()).unwrap_or_default(),
            r.throughput.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Empirical CDF of a record's e2e latency: `latency,fraction` rows.
pub fn write_cdf_csv(out: impl Write, record: &PerfRecord) -> Result<usize> {
    let rows = record.e2e.cdf();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["latency", "fraction"])?;
    for (v, f) in &rows {
        w.write_record([v.to_string(), f.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(rows.len())
}

/// One bar per leaderboard row: `label,value`.
pub fn write_bars_csv(out: impl Write, rows: &[LeaderRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "value"])?;
    for r in rows {
        w.write_record([r.group.clone(), r.value.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub job_id: String,
    pub latency: f64,
    /// Baseline latency over this record's latency.
    pub speedup: f64,
}

/// Latency speedups relative to `baseline_id`, using `latency` (a latency
/// metric such as p99). Records lacking the metric are skipped.
pub fn speedup_table(records: &[PerfRecord], baseline_id: &str, latency: Metric) -> Result<Vec<SpeedupRow>> {
    let baseline = records
        .iter()
        .find(|r| r.job_id == baseline_id)
        .ok_or_else(|| Error::NotFound {
            kind: "perf record",
            id: baseline_id.to_string(),
        })?;
    let base = latency
        .value(baseline)
        .ok_or_else(|| Error::validation("baseline", format!("{baseline_id} has no {latency}")))?;
    let mut rows: Vec<SpeedupRow> = records
        .iter()
        .filter_map(|r| {
            let v = latency.value(r)?;
            Some(SpeedupRow {
                job_id: r.job_id.clone(),
                latency: v,
                speedup: base / v,
            })
        })
        .collect();
    rows.sort_by(|a, b| a.job_id.cmp(&b.job_id));
    Ok(rows)
}

pub fn write_speedup_csv(out: impl Write, rows: &[SpeedupRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["job_id", "latency", "speedup"])?;
    for r in rows {
        w.write_record([r.job_id.clone(), r.latency.to_string(), r.speedup.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Writes `leaderboard.csv`, `bars.csv` and one `cdf-<job_id>.csv` per row
/// into `dir`, plus `speedup.csv` when a baseline is given.
pub fn emit_files(
    dir: &Path,
    records: &[PerfRecord],
    rows: &[LeaderRow],
    metric: Metric,
    baseline: Option<&str>,
) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: String| {
        let path = dir.join(name);
        std::fs::File::create(&path).map(|f| (path.clone(), f)).map_err(|e| Error::io(&path, e))
    };
    let mut written = Vec::new();
    let (path, f) = create("leaderboard.csv".into())?;
    write_leaderboard_csv(f, metric, rows)?;
    written.push(path);
    let (path, f) = create("bars.csv".into())?;
    write_bars_csv(f, rows)?;
    written.push(path);
    for row in rows {
        if let Some(r) = records.iter().find(|r| r.job_id == row.job_id) {
            let (path, f) = create(format!("cdf-{}.csv", row.job_id))?;
            write_cdf_csv(f, r)?;
            written.push(path);
        }
    }
    if let Some(base) = baseline {
        let table = speedup_table(records, base, Metric::Percentile(0.99))?;
        let (path, f) = create("speedup.csv".into())?;
        write_speedup_csv(f, &table)?;
        written.push(path);
    }
    Ok(written)
}
