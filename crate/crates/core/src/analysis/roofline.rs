//! Roofline model: attainable performance and measured points.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::catalog::{HardwareProfile, Precision};
use crate::error::{Error, Result};
use crate::harness::PerfRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Memory,
    Compute,
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Bound::Memory => "memory",
            Bound::Compute => "compute",
        })
    }
}

/// `min(P, B·I)` in FLOP/s.
pub fn roofline_attainable(h: &HardwareProfile, intensity: f64, precision: Precision) -> f64 {
    h.peak_flops(precision).min(h.mem_bandwidth * intensity)
}

/// Memory-bound below the ridge point `P/B`, compute-bound at or above it.
pub fn classify(ridge: f64, intensity: f64) -> Bound {
    if intensity < ridge {
        Bound::Memory
    } else {
        Bound::Compute
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RooflinePoint {
    pub label: String,
    pub job_id: String,
    pub hardware_id: String,
    /// Mean executed batch size.
    pub batch: f64,
    /// FLOP/byte at `batch`.
    pub intensity: f64,
    /// FLOP/s.
    pub achieved: f64,
    /// Roof the point is judged against: the efficiency-scaled roof for
    /// simulated runs, the datasheet roof otherwise.
    pub roof: f64,
    pub bound: Bound,
    /// False when the point lies above the datasheet roof.
    pub valid: bool,
}

/// Points for every record that carries a model descriptor and hardware
/// profile. Records that cannot be placed are reported in the warnings.
///
/// Achieved FLOP/s is executed FLOPs over device busy time when the backend
/// reports it, otherwise over wall time.
pub fn roofline_points(records: &[PerfRecord]) -> (Vec<RooflinePoint>, Vec<String>) {
    let mut points = Vec::new();
    let mut warnings = Vec::new();
    for r in records {
        let env = &r.env_log;
        let Some(h) = &env.hardware else {
            warnings.push(format!("{}: no hardware profile, skipped", r.job_id));
            continue;
        };
        if env.model_hash.is_empty() || env.model.descriptor_hash() != env.model_hash {
            warnings.push(format!("{}: missing or stale model descriptor hash, skipped", r.job_id));
            continue;
        }
        if r.ok == 0 || r.batches.count == 0 {
            warnings.push(format!("{}: no completed requests, skipped", r.job_id));
            continue;
        }
        let model = &env.model;
        let precision = env.job_spec.backend.numeric_precision;
        let batch = r.batches.mean_size;
        let intensity = model.intensity(batch);
        let achieved = match &r.device {
            Some(d) if d.busy_time > 0.0 => d.executed_flops / d.busy_time,
            _ if r.wall_time > 0.0 => r.ok as f64 * model.flops_per_sample as f64 / r.wall_time,
            _ => {
                warnings.push(format!("{}: no timing, skipped", r.job_id));
                continue;
            }
        };
        let (peak, bandwidth) = match &env.sim_config {
            Some(cfg) => (cfg.compute_roof(), cfg.memory_roof()),
            None => (h.peak_flops(precision), h.mem_bandwidth),
        };
        let roof = peak.min(bandwidth * intensity);
        let datasheet = roofline_attainable(h, intensity, precision);
        let valid = achieved <= datasheet * (1.0 + 1e-9);
        if !valid {
            warnings.push(format!(
                "{}: achieved {achieved:.4e} FLOP/s exceeds the {} roof {datasheet:.4e}, invalid measurement",
                r.job_id, h.id
            ));
        }
        points.push(RooflinePoint {
            label: format!("{} b={}", model.model_id, batch),
            job_id: r.job_id.clone(),
            hardware_id: h.id.clone(),
            batch,
            intensity,
            achieved,
            roof,
            bound: classify(peak / bandwidth, intensity),
            valid,
        });
    }
    (points, warnings)
}

pub fn write_points_csv(out: impl Write, points: &[RooflinePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "job_id", "hardware_id", "batch", "intensity", "achieved_flops", "roof_flops", "bound", "valid"])?;
    for p in points {
        w.write_record([
            p.label.clone(),
            p.job_id.clone(),
            p.hardware_id.clone(),
            p.batch.to_string(),
            p.intensity.to_string(),
            p.achieved.to_string(),
            p.roof.to_string(),
            p.bound.to_string(),
            p.valid.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Roof curve sampled at log-spaced intensities in `[lo, hi]`.
pub fn write_roof_csv(out: impl Write, h: &HardwareProfile, precision: Precision, lo: f64, hi: f64, steps: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["hardware_id", "intensity", "attainable_flops"])?;
    let steps = steps.max(2);
    for i in 0..steps {
        let x = lo * (hi / lo).powf(i as f64 / (steps - 1) as f64);
        w.write_record([h.id.clone(), x.to_string(), roofline_attainable(h, x, precision).to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}
