//! Two-axis metric grids over sweep results.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::Metric;
use crate::error::{Error, Result};
use crate::harness::PerfRecord;

/// A sweep dimension that can be read back from a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridAxis {
    Batch,
    Layers,
    Width,
    SeqLen,
}

impl GridAxis {
    pub fn name(self) -> &'static str {
        match self {
            GridAxis::Batch => "batch",
            GridAxis::Layers => "layers",
            GridAxis::Width => "width",
            GridAxis::SeqLen => "seq_len",
        }
    }

    pub fn value(self, r: &PerfRecord) -> Option<u32> {
        let params = r.env_log.model.generator_params();
        match self {
            GridAxis::Batch => Some(r.batch_size()),
            GridAxis::Layers => params.map(|p| p.num_layers),
            GridAxis::Width => params.map(|p| p.width),
            GridAxis::SeqLen => params.and_then(|p| p.seq_len),
        }
    }
}

impl FromStr for GridAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch" | "batch_size" => Ok(GridAxis::Batch),
            "layers" | "num_layers" => Ok(GridAxis::Layers),
            "width" | "neurons" => Ok(GridAxis::Width),
            "seq_len" => Ok(GridAxis::SeqLen),
            other => Err(Error::validation("axis", format!("unknown grid axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatGrid {
    pub axis1: GridAxis,
    pub values1: Vec<u32>,
    pub axis2: GridAxis,
    pub values2: Vec<u32>,
    pub metric: String,
    /// `matrix[i][j]` is the metric at `(values1[i], values2[j])`.
    pub matrix: Vec<Vec<f64>>,
}

/// Builds a grid from records. Axis values default to those present in the
/// records; pass them explicitly to check a planned sweep for holes. When a
/// cell has several records the most recently finished one wins.
pub fn build_heatgrid(
    records: &[PerfRecord],
    axis1: GridAxis,
    values1: Option<Vec<u32>>,
    axis2: GridAxis,
    values2: Option<Vec<u32>>,
    metric: Metric,
) -> Result<HeatGrid> {
    let mut cells: BTreeMap<(u32, u32), &PerfRecord> = BTreeMap::new();
    for r in records {
        let (Some(a), Some(b)) = (axis1.value(r), axis2.value(r)) else {
            continue;
        };
        let newer = |old: &&PerfRecord| {
            (r.env_log.finished_at, &r.job_id) > (old.env_log.finished_at, &old.job_id)
        };
        match cells.get(&(a, b)) {
            Some(old) if !newer(old) => {}
            _ => {
                cells.insert((a, b), r);
            }
        }
    }
    let axis_values = |explicit: Option<Vec<u32>>, pick: fn(&(u32, u32)) -> u32| {
        explicit.unwrap_or_else(|| {
            let mut v: Vec<u32> = cells.keys().map(pick).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
    };
    let values1 = axis_values(values1, |k| k.0);
    let values2 = axis_values(values2, |k| k.1);
    if values1.is_empty() || values2.is_empty() {
        return Err(Error::validation(
            "records",
            format!("no records carry both `{}` and `{}`", axis1.name(), axis2.name()),
        ));
    }

    let mut missing = Vec::new();
    let mut matrix = vec![vec![0.0; values2.len()]; values1.len()];
    for (i, &a) in values1.iter().enumerate() {
        for (j, &b) in values2.iter().enumerate() {
            let cell = format!("({}={a}, {}={b})", axis1.name(), axis2.name());
            match cells.get(&(a, b)).and_then(|r| metric.value(r)) {
                Some(v) => matrix[i][j] = v,
                None if cells.contains_key(&(a, b)) => missing.push(format!("{cell} has no {metric}")),
                None => missing.push(cell),
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteSweep(missing));
    }
    Ok(HeatGrid {
        axis1,
        values1,
        axis2,
        values2,
        metric: metric.to_string(),
        matrix,
    })
}

impl HeatGrid {
    /// Row-major CSV: the first column holds axis-1 values, one column per
    /// axis-2 value headed `<axis2>=<value>`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![format!("{}\\{}", self.axis1.name(), self.axis2.name())];
        header.extend(self.values2.iter().map(|v| format!("{}={v}", self.axis2.name())));
        w.write_record(&header)?;
        for (a, row) in self.values1.iter().zip(&self.matrix) {
            let mut line = vec![a.to_string()];
            line.extend(row.iter().map(f64::to_string));
            w.write_record(&line)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}
