//! Canonical model generator.
//!
//! Models are analytic: a descriptor carries FLOPs, weight bytes and
//! activation bytes per sample, enough for the simulated device and the
//! roofline analysis. No tensors are materialised.
//!
//! Per-block cost model (`p` = precision bytes):
//!
//! | block       | FLOP per sample                   | weight bytes           | activation bytes          |
//! |-------------|-----------------------------------|------------------------|---------------------------|
//! | fc          | `2·n_in·n_out`                    | `n_in·n_out·p`         | `(n_in+n_out)·p`          |
//! | cnn         | `2 · 2·9·C²·H·W` (two 3×3 convs)  | `2·9·C²·p`             | `2 · 2·C·H·W·p`           |
//! | rnn (LSTM)  | `s · 8·h·(h+i)`                   | `4·h·(h+i)·p`          | `s·(i+h)·p`               |
//! | transformer | `s · (24d² + 4sd)`                | `12d²·p`               | `2·s·d·p`                 |

mod repository;
mod sweep;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::content_hash;

pub use repository::{model_from_toml, model_to_toml, read_model_file, ModelQuery, ModelRepository};
pub use sweep::{sweep_grid, SweepAxis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Fc,
    Cnn,
    Rnn,
    Transformer,
}

impl BlockKind {
    pub fn needs_seq_len(self) -> bool {
        matches!(self, BlockKind::Rnn | BlockKind::Transformer)
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockKind::Fc => "fc",
            BlockKind::Cnn => "cnn",
            BlockKind::Rnn => "rnn",
            BlockKind::Transformer => "transformer",
        })
    }
}

impl std::str::FromStr for BlockKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fc" | "mlp" => Ok(BlockKind::Fc),
            "cnn" => Ok(BlockKind::Cnn),
            "rnn" | "lstm" => Ok(BlockKind::Rnn),
            "transformer" => Ok(BlockKind::Transformer),
            other => Err(Error::validation(
                "block",
                format!("unknown block kind `{other}` (expected fc, cnn, rnn or transformer)"),
            )),
        }
    }
}

/// Model family as stored in the repository and PerfDB indexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Fc,
    Cnn,
    Rnn,
    Transformer,
    Realworld,
}

impl From<BlockKind> for ModelFamily {
    fn from(block: BlockKind) -> Self {
        match block {
            BlockKind::Fc => ModelFamily::Fc,
            BlockKind::Cnn => ModelFamily::Cnn,
            BlockKind::Rnn => ModelFamily::Rnn,
            BlockKind::Transformer => ModelFamily::Transformer,
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFamily::Fc => "fc",
            ModelFamily::Cnn => "cnn",
            ModelFamily::Rnn => "rnn",
            ModelFamily::Transformer => "transformer",
            ModelFamily::Realworld => "realworld",
        })
    }
}

impl std::str::FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("realworld") {
            return Ok(ModelFamily::Realworld);
        }
        s.parse::<BlockKind>()
            .map(Into::into)
            .map_err(|_| Error::validation("model_family", format!("unknown family `{s}`")))
    }
}

/// Hyper-parameters of a canonical model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub block: BlockKind,
    pub num_layers: u32,
    /// Neurons (fc), channels (cnn), hidden units (rnn) or embedding dim (transformer).
    pub width: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq_len: Option<u32>,
    /// fc: flattened input features; cnn: `[H, W]` or `[C_in, H, W]`;
    /// rnn: `[features]` per time step; transformer: unused.
    #[serde(default)]
    pub input_dims: Vec<u32>,
    #[serde(default = "default_precision_bytes")]
    pub precision_bytes: u8,
}

fn default_precision_bytes() -> u8 {
    4
}

impl GeneratorParams {
    pub fn new(block: BlockKind, num_layers: u32, width: u32) -> Self {
        GeneratorParams {
            block,
            num_layers,
            width,
            seq_len: None,
            input_dims: Vec::new(),
            precision_bytes: 4,
        }
    }

    pub fn with_input(mut self, dims: impl Into<Vec<u32>>) -> Self {
        self.input_dims = dims.into();
        self
    }

    pub fn with_seq_len(mut self, seq_len: u32) -> Self {
        self.seq_len = Some(seq_len);
        self
    }

    pub fn with_precision_bytes(mut self, bytes: u8) -> Self {
        self.precision_bytes = bytes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::validation("num_layers", "must be >= 1"));
        }
        if self.width == 0 {
            return Err(Error::validation("width", "must be >= 1"));
        }
        if !matches!(self.precision_bytes, 2 | 4) {
            return Err(Error::validation("precision_bytes", "must be 4 (fp32) or 2 (fp16)"));
        }
        if self.input_dims.contains(&0) {
            return Err(Error::validation("input_dims", "all dimensions must be >= 1"));
        }
        match (self.block.needs_seq_len(), self.seq_len) {
            (true, None) => {
                return Err(Error::validation(
                    "seq_len",
                    format!("required for {} blocks", self.block),
                ))
            }
            (true, Some(0)) => return Err(Error::validation("seq_len", "must be >= 1")),
            (false, Some(_)) => {
                return Err(Error::validation(
                    "seq_len",
                    format!("only valid for rnn and transformer blocks, not {}", self.block),
                ))
            }
            _ => {}
        }
        match self.block {
            BlockKind::Fc | BlockKind::Rnn if self.input_dims.is_empty() => Err(
                Error::validation("input_dims", format!("required for {} blocks", self.block)),
            ),
            BlockKind::Rnn if self.input_dims.len() != 1 => {
                Err(Error::validation("input_dims", "rnn expects [features]"))
            }
            BlockKind::Cnn if !(2..=3).contains(&self.input_dims.len()) => Err(Error::validation(
                "input_dims",
                "cnn expects [H, W] or [C_in, H, W]",
            )),
            _ => Ok(()),
        }
    }

    /// Deterministic id such as `fc-l4-w1024-i1024-fp32`.
    pub fn model_id(&self) -> String {
        let mut id = format!("{}-l{}-w{}", self.block, self.num_layers, self.width);
        if let Some(s) = self.seq_len {
            id.push_str(&format!("-s{s}"));
        }
        if !self.input_dims.is_empty() {
            let dims: Vec<String> = self.input_dims.iter().map(u32::to_string).collect();
            id.push_str(&format!("-i{}", dims.join("x")));
        }
        id.push_str(if self.precision_bytes == 2 { "-fp16" } else { "-fp32" });
        id
    }
}

/// Where a descriptor's numbers came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelParams {
    Generated(GeneratorParams),
    /// Free-form metadata for imported real-world models.
    Metadata(BTreeMap<String, String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDescriptor {
    pub model_id: String,
    pub family: ModelFamily,
    pub flops_per_sample: u64,
    pub weight_bytes: u64,
    pub activation_bytes_per_sample: u64,
    pub params: ModelParams,
    #[serde(default = "initial_version")]
    pub version: u32,
}

fn initial_version() -> u32 {
    1
}

impl ModelDescriptor {
    /// A descriptor for a real-world model from user-supplied figures.
    pub fn realworld(
        model_id: impl Into<String>,
        flops_per_sample: u64,
        weight_bytes: u64,
        activation_bytes_per_sample: u64,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        let descriptor = ModelDescriptor {
            model_id: model_id.into(),
            family: ModelFamily::Realworld,
            flops_per_sample,
            weight_bytes,
            activation_bytes_per_sample,
            params: ModelParams::Metadata(metadata),
            version: 1,
        };
        descriptor.validate()?;
        Ok(descriptor)
    }

    pub fn validate(&self) -> Result<()> {
        if !valid_model_id(&self.model_id) {
            return Err(Error::validation(
                "model_id",
                "must be non-empty and use only [A-Za-z0-9._-]",
            ));
        }
        for (name, value) in [
            ("flops_per_sample", self.flops_per_sample),
            ("weight_bytes", self.weight_bytes),
            ("activation_bytes_per_sample", self.activation_bytes_per_sample),
        ] {
            if value == 0 {
                return Err(Error::validation(name, "must be > 0"));
            }
        }
        Ok(())
    }

    /// Operational intensity at batch size `batch`, in FLOP/byte:
    /// `b·f / (W + b·a)`.
    pub fn intensity(&self, batch: f64) -> f64 {
        let flops = batch * self.flops_per_sample as f64;
        let bytes = self.weight_bytes as f64 + batch * self.activation_bytes_per_sample as f64;
        flops / bytes
    }

    /// Limit of [`Self::intensity`] as the batch grows.
    pub fn intensity_limit(&self) -> f64 {
        self.flops_per_sample as f64 / self.activation_bytes_per_sample as f64
    }

    pub fn descriptor_hash(&self) -> String {
        content_hash(self)
    }

    pub fn generator_params(&self) -> Option<&GeneratorParams> {
        match &self.params {
            ModelParams::Generated(p) => Some(p),
            ModelParams::Metadata(_) => None,
        }
    }
}

pub(crate) fn valid_model_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
        && !id.starts_with('.')
}

/// Overflow-checked accumulator so oversized models are rejected, never
/// saturated.
struct Tally {
    what: &'static str,
    value: u64,
}

impl Tally {
    fn new(what: &'static str) -> Self {
        Tally { what, value: 0 }
    }

    fn add(&mut self, factors: &[u64]) -> Result<()> {
        let term = factors
            .iter()
            .try_fold(1u64, |acc, &f| acc.checked_mul(f))
            .ok_or_else(|| Error::Overflow(self.what.to_string()))?;
        self.value = self
            .value
            .checked_add(term)
            .ok_or_else(|| Error::Overflow(self.what.to_string()))?;
        Ok(())
    }
}

/// Builds the analytic descriptor for a canonical model.
pub fn generate_model(p: &GeneratorParams) -> Result<ModelDescriptor> {
    p.validate()?;
    let bytes = u64::from(p.precision_bytes);
    let layers = u64::from(p.num_layers);
    let width = u64::from(p.width);

    let mut flops = Tally::new("flops_per_sample");
    let mut weights = Tally::new("weight_bytes");
    let mut acts = Tally::new("activation_bytes_per_sample");

    match p.block {
        BlockKind::Fc => {
            let mut n_in = p
                .input_dims
                .iter()
                .try_fold(1u64, |acc, &d| acc.checked_mul(u64::from(d)))
                .ok_or_else(|| Error::Overflow("input size".into()))?;
            for _ in 0..layers {
                flops.add(&[2, n_in, width])?;
                weights.add(&[n_in, width, bytes])?;
                acts.add(&[n_in.checked_add(width).ok_or_else(|| Error::Overflow("activation_bytes_per_sample".into()))?, bytes])?;
                n_in = width;
            }
        }
        BlockKind::Cnn => {
            let dims = &p.input_dims;
            let (h, w) = (
                u64::from(dims[dims.len() - 2]),
                u64::from(dims[dims.len() - 1]),
            );
            for _ in 0..layers {
                // two 3x3 convolutions, identity shortcut
                for _ in 0..2 {
                    flops.add(&[2, 9, width, width, h, w])?;
                    weights.add(&[9, width, width, bytes])?;
                    acts.add(&[2, width, h, w, bytes])?;
                }
            }
        }
        BlockKind::Rnn => {
            let steps = u64::from(p.seq_len.expect("validated"));
            let mut n_in = u64::from(p.input_dims[0]);
            for _ in 0..layers {
                let fan = width
                    .checked_add(n_in)
                    .ok_or_else(|| Error::Overflow("flops_per_sample".into()))?;
                flops.add(&[steps, 8, width, fan])?;
                weights.add(&[4, width, fan, bytes])?;
                acts.add(&[steps, fan, bytes])?;
                n_in = width;
            }
        }
        BlockKind::Transformer => {
            let s = u64::from(p.seq_len.expect("validated"));
            let d = width;
            for _ in 0..layers {
                // projections 8d², attention 4sd, feed-forward 16d², per token
                flops.add(&[s, 24, d, d])?;
                flops.add(&[s, 4, s, d])?;
                weights.add(&[12, d, d, bytes])?;
                acts.add(&[2, s, d, bytes])?;
            }
        }
    }

    let descriptor = ModelDescriptor {
        model_id: p.model_id(),
        family: p.block.into(),
        flops_per_sample: flops.value,
        weight_bytes: weights.value,
        activation_bytes_per_sample: acts.value,
        params: ModelParams::Generated(p.clone()),
        version: 1,
    };
    descriptor.validate()?;
    Ok(descriptor)
}
