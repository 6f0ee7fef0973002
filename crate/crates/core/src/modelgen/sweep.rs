use std::fmt;

use super::{generate_model, GeneratorParams, ModelDescriptor};
use crate::error::{Error, Result};

/// A hyper-parameter that can be swept.
///
/// `Batch` is a workload parameter rather than a model parameter: it is
/// accepted so callers can pass one axis list for a whole study, and
/// [`sweep_grid`] ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Layers,
    Width,
    SeqLen,
    Batch,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Layers => "layers",
            SweepAxis::Width => "width",
            SweepAxis::SeqLen => "seq_len",
            SweepAxis::Batch => "batch",
        }
    }

    fn apply(self, params: &mut GeneratorParams, value: u32) {
        match self {
            SweepAxis::Layers => params.num_layers = value,
            SweepAxis::Width => params.width = value,
            SweepAxis::SeqLen => params.seq_len = Some(value),
            SweepAxis::Batch => {}
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layers" | "num_layers" => Ok(SweepAxis::Layers),
            "width" | "neurons" => Ok(SweepAxis::Width),
            "seq_len" => Ok(SweepAxis::SeqLen),
            "batch" | "batch_size" => Ok(SweepAxis::Batch),
            other => Err(Error::validation(
                "axis",
                format!("unknown sweep axis `{other}` (expected layers, width, seq_len or batch)"),
            )),
        }
    }
}

/// Generates the Cartesian product of the model axes, row-major in declared
/// order (the last axis varies fastest).
pub fn sweep_grid(base: &GeneratorParams, axes: &[(SweepAxis, Vec<u32>)]) -> Result<Vec<ModelDescriptor>> {
    for (axis, values) in axes {
        if values.is_empty() {
            return Err(Error::validation(format!("axes.{axis}"), "axis has no values"));
        }
    }
    let model_axes: Vec<&(SweepAxis, Vec<u32>)> =
        axes.iter().filter(|(axis, _)| *axis != SweepAxis::Batch).collect();

    let mut combos: Vec<GeneratorParams> = vec![base.clone()];
    for (axis, values) in model_axes {
        combos = combos
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut next = p.clone();
                    axis.apply(&mut next, v);
                    next
                })
            })
            .collect();
    }
    combos.iter().map(generate_model).collect()
}
