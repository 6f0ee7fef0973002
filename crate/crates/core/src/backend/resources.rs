//! Resource usage derived from a simulated device's busy intervals.

use serde::{Deserialize, Serialize};

use crate::time::{nanos_to_secs, secs_to_nanos, Nanos};

/// Device usage over one sampling window starting at `t` (seconds since job
/// start).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceSample {
    pub t: f64,
    pub utilization: f64,
    pub mem_used: u64,
}

/// One batch execution on the device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusyInterval {
    pub start: Nanos,
    pub end: Nanos,
    pub batch: u64,
}

/// Samples `[0, horizon)` in windows of `window` seconds.
///
/// Utilization is the busy fraction of each window (the last window may be
/// shorter); memory is the weights plus the activations of the largest batch
/// running during the window, capped at `capacity`. Intervals must be
/// sorted and non-overlapping.
pub fn sim_resource_sampler(
    intervals: &[BusyInterval],
    weight_bytes: u64,
    activation_bytes_per_sample: u64,
    capacity: u64,
    window: f64,
    horizon: Nanos,
) -> Vec<ResourceSample> {
    let step = secs_to_nanos(window).max(1);
    let mut samples = Vec::new();
    let mut first = 0usize;
    let mut lo: Nanos = 0;
    while lo < horizon {
        let hi = (lo + step).min(horizon);
        while first < intervals.len() && intervals[first].end <= lo {
            first += 1;
        }
        let mut busy: Nanos = 0;
        let mut largest = 0u64;
        for iv in intervals[first..].iter().take_while(|iv| iv.start < hi) {
            let overlap = iv.end.min(hi).saturating_sub(iv.start.max(lo));
            if overlap > 0 {
                busy += overlap;
                largest = largest.max(iv.batch);
            }
        }
        let mem = weight_bytes.saturating_add(largest.saturating_mul(activation_bytes_per_sample));
        samples.push(ResourceSample {
            t: nanos_to_secs(lo),
            utilization: (busy as f64 / (hi - lo) as f64).clamp(0.0, 1.0),
            mem_used: mem.min(capacity),
        });
        lo = hi;
    }
    samples
}

/// Busy fraction over `[0, horizon)`.
pub fn mean_utilization(intervals: &[BusyInterval], horizon: Nanos) -> f64 {
    if horizon == 0 {
        return 0.0;
    }
    let busy: Nanos = intervals
        .iter()
        .map(|iv| iv.end.min(horizon).saturating_sub(iv.start.min(horizon)))
        .sum();
    (busy as f64 / horizon as f64).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const S: Nanos = 1_000_000_000;

    #[test]
    fn fully_busy_window() {
        let iv = [BusyInterval { start: 0, end: S, batch: 4 }];
        let s = sim_resource_sampler(&iv, 100, 10, 1000, 1.0, S);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].utilization, 1.0);
        assert_eq!(s[0].mem_used, 140);
    }

    #[test]
    fn quarter_duty_cycle() {
        // 25 ms busy every 100 ms for 10 s
        let iv: Vec<_> = (0..100)
            .map(|k| BusyInterval {
                start: k * S / 10,
                end: k * S / 10 + S / 40,
                batch: 1,
            })
            .collect();
        let s = sim_resource_sampler(&iv, 0, 0, 1, 1.0, 10 * S);
        assert_eq!(s.len(), 10);
        for sample in &s {
            assert!((sample.utilization - 0.25).abs() < 1e-12);
        }
        assert!((mean_utilization(&iv, 10 * S) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn idle_reports_weights_only() {
        let s = sim_resource_sampler(&[], 5000, 10, 1 << 20, 0.5, 2 * S);
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|x| x.utilization == 0.0 && x.mem_used == 5000));
    }

    #[test]
    fn interval_split_across_windows() {
        let iv = [BusyInterval { start: S / 2, end: 3 * S / 2, batch: 2 }];
        let s = sim_resource_sampler(&iv, 0, 1, 100, 1.0, 2 * S);
        assert_eq!(s[0].utilization, 0.5);
        assert_eq!(s[1].utilization, 0.5);
        assert_eq!(s[1].mem_used, 2);
    }

    #[test]
    fn memory_capped() {
        let iv = [BusyInterval { start: 0, end: S, batch: 1000 }];
        let s = sim_resource_sampler(&iv, 10, 10, 500, 1.0, S);
        assert_eq!(s[0].mem_used, 500);
    }
}
