//! Traffic generation: arrival schedules and request payloads.
//!
//! Randomness comes from ChaCha8 streams seeded with the workload seed.
//! Uniform variates are formed from the top 53 bits of each 64-bit output and
//! exponential gaps by inverse transform, so a schedule can be reproduced by
//! any implementation of the same generator.

use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the random-number algorithm, recorded in every run log.
pub const PRNG_ALGORITHM: &str =
    "ChaCha8 (rand_chacha 0.9); uniform = (next_u64 >> 11) * 2^-53; exponential by inverse CDF";

/// ChaCha stream ids, so arrivals and payloads never share random draws.
const ARRIVAL_STREAM: u64 = 0;
const PAYLOAD_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalPattern {
    Poisson,
    Constant,
    Burst,
    ClosedLoop,
    /// Offsets supplied verbatim (from `--replay` or a schedule file).
    Replay,
}

impl ArrivalPattern {
    pub fn is_open_loop(self) -> bool {
        !matches!(self, ArrivalPattern::ClosedLoop)
    }
}

/// Two-level modulated Poisson process: `peak_rate` for the first
/// `duty·period` seconds of every period, `base_rate` for the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurstSpec {
    pub base_rate: f64,
    pub peak_rate: f64,
    pub period: f64,
    pub duty: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadSpec {
    SyntheticBytes(u64),
    DatasetDir(PathBuf),
}

impl Default for PayloadSpec {
    fn default() -> Self {
        // a 224x224x3 image tensor
        PayloadSpec::SyntheticBytes(150_528)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub pattern: ArrivalPattern,
    /// Requests per second (poisson and constant).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    /// In-flight requests (closed_loop).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concurrency: Option<u32>,
    /// Seconds. Exactly one of `duration` and `num_requests` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_requests: Option<u64>,
    /// Defaults to the job seed when part of a job spec.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Explicit offsets for the replay pattern.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<f64>>,
    #[serde(default)]
    pub payload: PayloadSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burst: Option<BurstSpec>,
}

impl WorkloadSpec {
    pub fn constant(rate: f64, num_requests: u64) -> Self {
        WorkloadSpec {
            pattern: ArrivalPattern::Constant,
            rate: Some(rate),
            burst: None,
            concurrency: None,
            duration: None,
            num_requests: Some(num_requests),
            offsets: None,
            payload: PayloadSpec::default(),
            seed: Some(0),
        }
    }

    pub fn poisson(rate: f64, num_requests: u64, seed: u64) -> Self {
        WorkloadSpec {
            pattern: ArrivalPattern::Poisson,
            seed: Some(seed),
            ..Self::constant(rate, num_requests)
        }
    }

    pub fn closed_loop(concurrency: u32, num_requests: u64) -> Self {
        WorkloadSpec {
            pattern: ArrivalPattern::ClosedLoop,
            rate: None,
            concurrency: Some(concurrency),
            ..Self::constant(1.0, num_requests)
        }
    }

    pub fn replay(offsets: Vec<f64>) -> Self {
        WorkloadSpec {
            pattern: ArrivalPattern::Replay,
            rate: None,
            num_requests: Some(offsets.len() as u64),
            offsets: Some(offsets),
            ..Self::constant(1.0, 0)
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str| format!("workload.{name}");
        let positive = |name: &str, v: Option<f64>| -> Result<f64> {
            match v {
                Some(x) if x.is_finite() && x > 0.0 => Ok(x),
                Some(_) => Err(Error::validation(field(name), "must be > 0")),
                None => Err(Error::validation(
                    field(name),
                    format!("required for pattern {:?}", self.pattern).to_lowercase(),
                )),
            }
        };

        match self.pattern {
            ArrivalPattern::Replay => {
                let offsets = self
                    .offsets
                    .as_ref()
                    .ok_or_else(|| Error::validation(field("offsets"), "required for pattern replay"))?;
                if offsets.iter().any(|o| !(o.is_finite() && *o >= 0.0)) {
                    return Err(Error::validation(field("offsets"), "must be finite and >= 0"));
                }
                if offsets.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::validation(field("offsets"), "must be non-decreasing"));
                }
                if self.num_requests != Some(offsets.len() as u64) || self.duration.is_some() {
                    return Err(Error::validation(
                        field("num_requests"),
                        "must equal the number of replayed offsets",
                    ));
                }
                return Ok(());
            }
            ArrivalPattern::Poisson | ArrivalPattern::Constant => {
                positive("rate", self.rate)?;
            }
            ArrivalPattern::Burst => {
                let burst = self
                    .burst
                    .as_ref()
                    .ok_or_else(|| Error::validation(field("burst"), "required for pattern burst"))?;
                positive("burst.base_rate", Some(burst.base_rate))?;
                positive("burst.peak_rate", Some(burst.peak_rate))?;
                positive("burst.period", Some(burst.period))?;
                if !(burst.duty > 0.0 && burst.duty < 1.0) {
                    return Err(Error::validation(field("burst.duty"), "must be in (0, 1)"));
                }
            }
            ArrivalPattern::ClosedLoop => match self.concurrency {
                Some(c) if c >= 1 => {}
                Some(_) => return Err(Error::validation(field("concurrency"), "must be >= 1")),
                None => {
                    return Err(Error::validation(
                        field("concurrency"),
                        "required for pattern closed_loop",
                    ))
                }
            },
        }
        if self.offsets.is_some() {
            return Err(Error::validation(field("offsets"), "only valid for pattern replay"));
        }
        match (self.duration, self.num_requests) {
            (Some(_), Some(_)) | (None, None) => Err(Error::validation(
                field("duration"),
                "exactly one of duration and num_requests must be set",
            )),
            (Some(d), None) => positive("duration", Some(d)).map(|_| ()),
            (None, Some(0)) => Err(Error::validation(field("num_requests"), "must be >= 1")),
            (None, Some(_)) => Ok(()),
        }
    }

    /// Expected wall-clock length of the run, when the pattern implies one.
    pub fn expected_duration(&self) -> Option<f64> {
        if let Some(d) = self.duration {
            return Some(d);
        }
        let n = self.num_requests? as f64;
        match self.pattern {
            ArrivalPattern::Poisson | ArrivalPattern::Constant => Some(n / self.rate?),
            ArrivalPattern::Burst => {
                let b = self.burst.as_ref()?;
                let mean_rate = b.duty * b.peak_rate + (1.0 - b.duty) * b.base_rate;
                Some(n / mean_rate)
            }
            ArrivalPattern::Replay => self.offsets.as_ref()?.last().copied().filter(|d| *d > 0.0),
            ArrivalPattern::ClosedLoop => None,
        }
    }
}

/// Send offsets, in seconds from job start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalSchedule {
    pub offsets: Vec<f64>,
    pub seed: u64,
}

impl ArrivalSchedule {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// One offset per line. `{:?}` prints the shortest representation that
    /// parses back to the same `f64`.
    pub fn to_flat(&self) -> String {
        let mut out = String::with_capacity(self.offsets.len() * 12);
        for offset in &self.offsets {
            out.push_str(&format!("{offset:?}\n"));
        }
        out
    }

    pub fn from_flat(text: &str) -> Result<Self> {
        let mut offsets = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let value: f64 = line.parse().map_err(|_| Error::Malformed {
                what: "schedule",
                line: idx + 1,
                message: format!("`{line}` is not a number"),
            })?;
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::Malformed {
                    what: "schedule",
                    line: idx + 1,
                    message: "offsets must be finite and >= 0".into(),
                });
            }
            if offsets.last().is_some_and(|prev| value < *prev) {
                return Err(Error::Malformed {
                    what: "schedule",
                    line: idx + 1,
                    message: "offsets must be non-decreasing".into(),
                });
            }
            offsets.push(value);
        }
        Ok(ArrivalSchedule { offsets, seed: 0 })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_flat(&text)
    }
}

/// Uniform on [0, 1) from the top 53 bits.
pub fn unit_uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Exponential with the given rate by inverse transform.
pub fn exponential(rng: &mut impl RngCore, rate: f64) -> f64 {
    -(1.0 - unit_uniform(rng)).ln() / rate
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Materialises the arrival process.
///
/// * poisson: i.i.d. exponential gaps with mean `1/rate`, first send after the
///   first gap;
/// * constant: sends at `i/rate`, starting at 0;
/// * burst: piecewise-constant-rate Poisson (exact, by restarting the draw at
///   each phase boundary);
/// * closed_loop: the `concurrency` initial sends at offset 0; later sends
///   are driven by responses;
/// * replay: the stored offsets.
///
/// Duration-bounded runs keep every offset strictly below the duration.
pub fn gen_arrivals(w: &WorkloadSpec) -> Result<ArrivalSchedule> {
    w.validate()?;
    let seed = w.seed();
    let limit = w.num_requests.map(|n| n as usize);
    let horizon = w.duration.unwrap_or(f64::INFINITY);
    let wanted = |offsets: &Vec<f64>| limit.is_none_or(|n| offsets.len() < n);

    let mut offsets = Vec::with_capacity(limit.unwrap_or(1024).min(1 << 24));
    match w.pattern {
        ArrivalPattern::Constant => {
            let rate = w.rate.expect("validated");
            let mut i = 0u64;
            while wanted(&offsets) {
                let t = i as f64 / rate;
                if t >= horizon {
                    break;
                }
                offsets.push(t);
                i += 1;
            }
        }
        ArrivalPattern::Poisson => {
            let rate = w.rate.expect("validated");
            let mut rng = stream_rng(seed, ARRIVAL_STREAM);
            let mut t = 0.0;
            while wanted(&offsets) {
                t += exponential(&mut rng, rate);
                if t >= horizon {
                    break;
                }
                offsets.push(t);
            }
        }
        ArrivalPattern::Burst => {
            let b = w.burst.as_ref().expect("validated");
            let peak_len = b.duty * b.period;
            let mut rng = stream_rng(seed, ARRIVAL_STREAM);
            let mut t = 0.0f64;
            while wanted(&offsets) {
                let cycle_start = (t / b.period).floor() * b.period;
                let in_cycle = t - cycle_start;
                let (rate, phase_end) = if in_cycle < peak_len {
                    (b.peak_rate, cycle_start + peak_len)
                } else {
                    (b.base_rate, cycle_start + b.period)
                };
                let candidate = t + exponential(&mut rng, rate);
                if candidate >= phase_end {
                    // memoryless: restart at the boundary with the next rate
                    t = phase_end;
                    if t >= horizon {
                        break;
                    }
                    continue;
                }
                t = candidate;
                if t >= horizon {
                    break;
                }
                offsets.push(t);
            }
        }
        ArrivalPattern::ClosedLoop => {
            let c = w.concurrency.expect("validated") as usize;
            let initial = limit.map_or(c, |n| n.min(c));
            offsets.resize(initial, 0.0);
        }
        ArrivalPattern::Replay => {
            offsets = w.offsets.clone().expect("validated");
        }
    }
    Ok(ArrivalSchedule { offsets, seed })
}

/// One request body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payload {
    pub id: String,
    pub bytes: Vec<u8>,
}

/// Resolved payload source for a workload.
#[derive(Debug, Clone)]
pub enum PayloadSource {
    Synthetic { size: u64, seed: u64 },
    Dataset { files: Vec<(PathBuf, u64)> },
}

impl PayloadSource {
    /// Resolves the payload spec; dataset directories are listed once, sorted
    /// by file name.
    pub fn new(spec: &PayloadSpec, seed: u64) -> Result<Self> {
        match spec {
            PayloadSpec::SyntheticBytes(size) => Ok(PayloadSource::Synthetic { size: *size, seed }),
            PayloadSpec::DatasetDir(dir) => {
                let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
                let mut files = Vec::new();
                for entry in entries {
                    let entry = entry.map_err(|e| Error::io(dir, e))?;
                    let meta = entry.metadata().map_err(|e| Error::io(entry.path(), e))?;
                    if meta.is_file() {
                        files.push((entry.path(), meta.len()));
                    }
                }
                if files.is_empty() {
                    return Err(Error::validation(
                        "workload.payload.dataset_dir",
                        format!("{} contains no files", dir.display()),
                    ));
                }
                files.sort_by(|a, b| a.0.file_name().cmp(&b.0.file_name()));
                Ok(PayloadSource::Dataset { files })
            }
        }
    }

    /// Payload size for request `i` without materialising the bytes.
    pub fn len(&self, i: u64) -> u64 {
        match self {
            PayloadSource::Synthetic { size, .. } => *size,
            PayloadSource::Dataset { files } => files[(i % files.len() as u64) as usize].1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, i: u64) -> String {
        match self {
            PayloadSource::Synthetic { .. } => format!("synthetic-{i}"),
            PayloadSource::Dataset { files } => {
                let path = &files[(i % files.len() as u64) as usize].0;
                path.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default()
            }
        }
    }

    /// Payload for request `i`: pseudorandom bytes from stream `i` of the
    /// seed, or the `i mod n`-th dataset file.
    pub fn payload(&self, i: u64) -> Result<Payload> {
        let bytes = match self {
            PayloadSource::Synthetic { size, seed } => {
                let mut rng = stream_rng(*seed, PAYLOAD_STREAM_BASE + i);
                let mut bytes = vec![0u8; *size as usize];
                rng.fill_bytes(&mut bytes);
                bytes
            }
            PayloadSource::Dataset { files } => {
                let path = &files[(i % files.len() as u64) as usize].0;
                std::fs::read(path).map_err(|e| Error::io(path, e))?
            }
        };
        Ok(Payload { id: self.id(i), bytes })
    }
}

/// Convenience wrapper: payload `i` of workload `w`.
pub fn gen_payload(w: &WorkloadSpec, i: u64) -> Result<Payload> {
    PayloadSource::new(&w.payload, w.seed())?.payload(i)
}
