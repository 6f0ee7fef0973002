//! Latency digests with nearest-rank percentiles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spec::DigestKind;

/// Bucket growth factor of the histogram. Reporting each bucket by the
/// harmonic mean of its bounds keeps relative error below
/// `(GAMMA - 1) / (GAMMA + 1)`, just under 1%.
pub const HISTOGRAM_GAMMA: f64 = 1.02;
/// Smallest positive value the histogram resolves, seconds.
const HISTOGRAM_FLOOR: f64 = 1e-9;

/// 1-based nearest rank `⌈q·n⌉`, clamped to `[1, n]`. A product within
/// floating-point noise of an integer is taken as that integer, so
/// `q = 0.99, n = 100` gives 99.
pub fn nearest_rank(q: f64, n: usize) -> usize {
    let qn = q * n as f64;
    let rounded = qn.round();
    let rank = if (qn - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded
    } else {
        qn.ceil()
    };
    (rank as usize).clamp(1, n.max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyDigest {
    /// All samples, sorted ascending.
    Exact { sorted: Vec<f64> },
    Histogram(Histogram),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    count: u64,
    min: f64,
    max: f64,
    sum: f64,
    /// Samples at or below the floor.
    zeros: u64,
    /// (bucket index, count), ascending by index.
    buckets: Vec<(i32, u64)>,
}

impl Histogram {
    fn index(v: f64) -> i32 {
        ((v / HISTOGRAM_FLOOR).ln() / HISTOGRAM_GAMMA.ln()).floor() as i32
    }

    fn representative(index: i32) -> f64 {
        let lo = HISTOGRAM_FLOOR * HISTOGRAM_GAMMA.powi(index);
        let hi = lo * HISTOGRAM_GAMMA;
        2.0 * lo * hi / (lo + hi)
    }

    fn from_samples(samples: &[f64]) -> Self {
        let mut map: BTreeMap<i32, u64> = BTreeMap::new();
        let mut zeros = 0;
        for &v in samples {
            if v <= HISTOGRAM_FLOOR {
                zeros += 1;
            } else {
                *map.entry(Self::index(v)).or_default() += 1;
            }
        }
        let (min, max) = if samples.is_empty() {
            (0.0, 0.0)
        } else {
            (
                samples.iter().copied().fold(f64::INFINITY, f64::min),
                samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        Histogram {
            count: samples.len() as u64,
            min,
            max,
            sum: samples.iter().sum(),
            zeros,
            buckets: map.into_iter().collect(),
        }
    }

    fn value_at_rank(&self, rank: u64) -> f64 {
        if rank <= self.zeros {
            return self.min;
        }
        let mut seen = self.zeros;
        for &(index, c) in &self.buckets {
            seen += c;
            if seen >= rank {
                return Self::representative(index).clamp(self.min, self.max);
            }
        }
        self.max
    }
}

/// Summary statistics as stored in perf records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigestSummary {
    pub count: u64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// (q, value) pairs in the requested order.
    pub percentiles: Vec<(f64, f64)>,
}

impl DigestSummary {
    pub fn percentile(&self, q: f64) -> Option<f64> {
        self.percentiles.iter().find(|(p, _)| (p - q).abs() < 1e-12).map(|&(_, v)| v)
    }
}

impl LatencyDigest {
    /// Builds a digest from samples in seconds. NaNs are rejected.
    pub fn from_samples(kind: DigestKind, samples: impl IntoIterator<Item = f64>) -> Self {
        let mut sorted: Vec<f64> = samples.into_iter().collect();
        assert!(sorted.iter().all(|v| !v.is_nan()), "latency samples must not be NaN");
        match kind {
            DigestKind::Exact => {
                sorted.sort_by(f64::total_cmp);
                LatencyDigest::Exact { sorted }
            }
            DigestKind::Histogram => LatencyDigest::Histogram(Histogram::from_samples(&sorted)),
        }
    }

    pub fn count(&self) -> u64 {
        match self {
            LatencyDigest::Exact { sorted } => sorted.len() as u64,
            LatencyDigest::Histogram(h) => h.count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn min(&self) -> Result<f64> {
        match self {
            LatencyDigest::Exact { sorted } => sorted.first().copied().ok_or(Error::EmptyDigest),
            LatencyDigest::Histogram(h) if h.count > 0 => Ok(h.min),
            _ => Err(Error::EmptyDigest),
        }
    }

    pub fn max(&self) -> Result<f64> {
        match self {
            LatencyDigest::Exact { sorted } => sorted.last().copied().ok_or(Error::EmptyDigest),
            LatencyDigest::Histogram(h) if h.count > 0 => Ok(h.max),
            _ => Err(Error::EmptyDigest),
        }
    }

    pub fn mean(&self) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyDigest);
        }
        let sum = match self {
            LatencyDigest::Exact { sorted } => sorted.iter().sum::<f64>(),
            LatencyDigest::Histogram(h) => h.sum,
        };
        Ok(sum / self.count() as f64)
    }

    /// Nearest-rank percentile, `q` in (0, 1).
    pub fn percentile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::validation("q", format!("percentile {q} not in (0, 1)")));
        }
        let n = self.count() as usize;
        if n == 0 {
            return Err(Error::EmptyDigest);
        }
        let rank = nearest_rank(q, n);
        Ok(match self {
            LatencyDigest::Exact { sorted } => sorted[rank - 1],
            LatencyDigest::Histogram(h) => h.value_at_rank(rank as u64),
        })
    }

    pub fn summary(&self, percentiles: &[f64]) -> Result<DigestSummary> {
        Ok(DigestSummary {
            count: self.count(),
            min: self.min()?,
            max: self.max()?,
            mean: self.mean()?,
            percentiles: percentiles
                .iter()
                .map(|&q| self.percentile(q).map(|v| (q, v)))
                .collect::<Result<_>>()?,
        })
    }

    /// Empirical CDF rows `(value, cumulative fraction)`. Exact digests give
    /// one row per sample, `(x_i, i/n)`; histograms one row per bucket.
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        match self {
            LatencyDigest::Exact { sorted } => {
                let n = sorted.len() as f64;
                sorted.iter().enumerate().map(|(i, &v)| (v, (i + 1) as f64 / n)).collect()
            }
            LatencyDigest::Histogram(h) => {
                let n = h.count as f64;
                let mut rows = Vec::new();
                let mut seen = h.zeros;
                if h.zeros > 0 {
                    rows.push((h.min, seen as f64 / n));
                }
                for &(index, c) in &h.buckets {
                    seen += c;
                    rows.push((Histogram::representative(index).clamp(h.min, h.max), seen as f64 / n));
                }
                rows
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::exponential;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_to_hundred() -> LatencyDigest {
        LatencyDigest::from_samples(DigestKind::Exact, (1..=100).rev().map(f64::from))
    }

    #[test]
    fn nearest_rank_examples() {
        let d = one_to_hundred();
        assert_eq!(d.percentile(0.99).unwrap(), 99.0);
        assert_eq!(d.percentile(0.5).unwrap(), 50.0);
        assert_eq!(d.percentile(0.001).unwrap(), 1.0);
        assert_eq!(d.percentile(0.999).unwrap(), 100.0);
        assert_eq!(d.mean().unwrap(), 50.5);
    }

    #[test]
    fn empty_digest_errors() {
        let d = LatencyDigest::from_samples(DigestKind::Exact, []);
        assert!(matches!(d.percentile(0.5), Err(Error::EmptyDigest)));
        let h = LatencyDigest::from_samples(DigestKind::Histogram, []);
        assert!(matches!(h.summary(&[0.5]), Err(Error::EmptyDigest)));
    }

    fn exp_samples(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| exponential(&mut rng, 50.0)).collect()
    }

    fn sort_oracle(samples: &[f64], q: f64) -> f64 {
        let mut s = samples.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = (q * s.len() as f64 - 1e-9).ceil() as usize;
        s[k.max(1) - 1]
    }

    #[test]
    fn exact_matches_sort_oracle() {
        let samples = exp_samples(10_000, 3);
        let d = LatencyDigest::from_samples(DigestKind::Exact, samples.clone());
        for q in [0.01, 0.1, 0.25, 0.5, 0.9, 0.95, 0.99, 0.999] {
            assert_eq!(d.percentile(q).unwrap(), sort_oracle(&samples, q), "q={q}");
        }
    }

    #[test]
    fn histogram_within_one_percent() {
        let samples = exp_samples(10_000, 4);
        let d = LatencyDigest::from_samples(DigestKind::Histogram, samples.clone());
        for q in [0.01, 0.1, 0.5, 0.9, 0.95, 0.99, 0.999] {
            let exact = sort_oracle(&samples, q);
            let approx = d.percentile(q).unwrap();
            assert!((approx - exact).abs() / exact <= 0.01, "q={q}: {approx} vs {exact}");
        }
        assert_eq!(d.count(), 10_000);
    }

    #[test]
    fn cdf_has_one_row_per_sample() {
        let rows = one_to_hundred().cdf();
        assert_eq!(rows.len(), 100);
        assert_eq!(rows[0], (1.0, 0.01));
        assert_eq!(rows[99], (100.0, 1.0));
    }

    proptest! {
        #[test]
        fn histogram_error_bound(v in 1e-8f64..1e3) {
            let d = LatencyDigest::from_samples(DigestKind::Histogram, [v, v * 1.5]);
            let got = d.percentile(0.5).unwrap();
            prop_assert!((got - v).abs() / v <= 0.01);
        }

        #[test]
        fn percentile_monotone(mut xs in prop::collection::vec(0.0f64..10.0, 1..200), a in 0.01f64..0.99, b in 0.01f64..0.99) {
            let d = LatencyDigest::from_samples(DigestKind::Exact, xs.drain(..));
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(d.percentile(lo).unwrap() <= d.percentile(hi).unwrap());
        }
    }
}
