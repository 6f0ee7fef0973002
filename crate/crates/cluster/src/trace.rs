//! Job traces for the scheduler simulator: a flat `job_id,submit_time,t_proc`
//! file format and a seeded random generator.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use servbench_core::workload::{exponential, unit_uniform};

use crate::error::{ClusterError, Result};
use crate::sched::Job;

pub const TRACE_HEADER: &str = "job_id,submit_time,t_proc";

/// Parses a trace. Blank lines and `#` comments are skipped; the header
/// line is optional. Line numbers in errors are 1-based.
pub fn parse_trace(text: &str) -> Result<Vec<Job>> {
    let mut jobs = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if jobs.is_empty() && line.replace(' ', "") == TRACE_HEADER {
            continue;
        }
        let bad = |message: String| ClusterError::Trace { line: line_no, message };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 fields ({TRACE_HEADER}), found {}", fields.len())));
        }
        if fields[0].is_empty() {
            return Err(bad("empty job_id".into()));
        }
        let num = |name: &str, s: &str| -> Result<f64> {
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
                _ => Err(bad(format!("{name} must be a non-negative number, got `{s}`"))),
            }
        };
        let submit_time = num("submit_time", fields[1])?;
        let t_proc = num("t_proc", fields[2])?;
        if !seen.insert(fields[0].to_string()) {
            return Err(bad(format!("duplicate job_id `{}`", fields[0])));
        }
        jobs.push(Job::new(fields[0], t_proc, submit_time));
    }
    if jobs.is_empty() {
        return Err(ClusterError::User("trace contains no jobs".into()));
    }
    Ok(jobs)
}

pub fn write_trace(jobs: &[Job]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for j in jobs {
        let _ = writeln!(out, "{},{},{}", j.job_id, j.submit_time, j.t_proc);
    }
    out
}

/// Processing-time distribution, written `exp:MEAN`, `pareto:ALPHA:XM`,
/// `const:V` or `uniform:LO:HI`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcDist {
    Exp { mean: f64 },
    Pareto { alpha: f64, xm: f64 },
    Const(f64),
    Uniform { lo: f64, hi: f64 },
}

impl ProcDist {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            ProcDist::Exp { mean } => exponential(rng, 1.0 / mean),
            ProcDist::Pareto { alpha, xm } => xm / (1.0 - unit_uniform(rng)).powf(1.0 / alpha),
            ProcDist::Const(v) => v,
            ProcDist::Uniform { lo, hi } => lo + (hi - lo) * unit_uniform(rng),
        }
    }
}

fn parse_params(s: &str, what: &str, n: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').skip(1).collect();
    if parts.len() != n {
        return Err(ClusterError::User(format!("`{s}`: {what} takes {n} parameter(s)")));
    }
    parts
        .iter()
        .map(|p| match p.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
            _ => Err(ClusterError::User(format!("`{s}`: parameter `{p}` must be a positive number"))),
        })
        .collect()
}

impl FromStr for ProcDist {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self> {
        let kind = s.split(':').next().unwrap_or("");
        match kind {
            "exp" => Ok(ProcDist::Exp { mean: parse_params(s, kind, 1)?[0] }),
            "pareto" => {
                let p = parse_params(s, kind, 2)?;
                Ok(ProcDist::Pareto { alpha: p[0], xm: p[1] })
            }
            "const" => Ok(ProcDist::Const(parse_params(s, kind, 1)?[0])),
            "uniform" => {
                let p = parse_params(s, kind, 2)?;
                if p[0] > p[1] {
                    return Err(ClusterError::User(format!("`{s}`: lo exceeds hi")));
                }
                Ok(ProcDist::Uniform { lo: p[0], hi: p[1] })
            }
            _ => Err(ClusterError::User(format!(
                "unknown distribution `{s}` (exp:MEAN, pareto:ALPHA:XM, const:V, uniform:LO:HI)"
            ))),
        }
    }
}

impl fmt::Display for ProcDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcDist::Exp { mean } => write!(f, "exp:{mean}"),
            ProcDist::Pareto { alpha, xm } => write!(f, "pareto:{alpha}:{xm}"),
            ProcDist::Const(v) => write!(f, "const:{v}"),
            ProcDist::Uniform { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
        }
    }
}

/// Job submission process: `poisson:RATE` (jobs/s) or `batch` (all at 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JobArrivals {
    Poisson { rate: f64 },
    Batch,
}

impl FromStr for JobArrivals {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self> {
        match s.split(':').next().unwrap_or("") {
            "poisson" => Ok(JobArrivals::Poisson { rate: parse_params(s, "poisson", 1)?[0] }),
            "batch" if s == "batch" => Ok(JobArrivals::Batch),
            _ => Err(ClusterError::User(format!("unknown arrival process `{s}` (poisson:RATE, batch)"))),
        }
    }
}

impl fmt::Display for JobArrivals {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JobArrivals::Poisson { rate } => write!(f, "poisson:{rate}"),
            JobArrivals::Batch => f.write_str("batch"),
        }
    }
}

/// Seeded random trace. Processing times and arrivals use separate
/// streams so changing one does not perturb the other.
pub fn random_trace(n: usize, dist: ProcDist, arrivals: JobArrivals, seed: u64) -> Vec<Job> {
    let mut proc_rng = ChaCha8Rng::seed_from_u64(seed);
    proc_rng.set_stream(1);
    let mut arr_rng = ChaCha8Rng::seed_from_u64(seed);
    arr_rng.set_stream(2);
    let width = n.max(1).to_string().len();
    let mut t = 0.0;
    (0..n)
        .map(|i| {
            let submit = match arrivals {
                JobArrivals::Batch => 0.0,
                JobArrivals::Poisson { rate } => {
                    if i > 0 {
                        t += exponential(&mut arr_rng, rate);
                    }
                    t
                }
            };
            Job::new(format!("j{:0width$}", i + 1), dist.sample(&mut proc_rng), submit)
        })
        .collect()
}
