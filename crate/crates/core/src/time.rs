//! Integer-nanosecond timestamps.
//!
//! Request timestamps are kept as whole nanoseconds from job start so that
//! stage durations telescope exactly to the end-to-end latency.

use std::time::Duration;

/// Nanoseconds since the start of a job.
pub type Nanos = u64;

pub const NANOS_PER_SEC: f64 = 1e9;

/// Rounds a non-negative duration in seconds to whole nanoseconds.
pub fn secs_to_nanos(secs: f64) -> Nanos {
    debug_assert!(secs >= 0.0 && secs.is_finite(), "bad duration {secs}");
    (secs.max(0.0) * NANOS_PER_SEC).round() as Nanos
}

pub fn nanos_to_secs(nanos: Nanos) -> f64 {
    nanos as f64 / NANOS_PER_SEC
}

pub fn duration_nanos(d: Duration) -> Nanos {
    d.as_nanos().min(u128::from(u64::MAX)) as Nanos
}

/// Seconds since the Unix epoch, used for log timestamps.
pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(secs_to_nanos(0.0), 0);
        assert_eq!(secs_to_nanos(1.5e-9), 2);
        assert_eq!(secs_to_nanos(0.005), 5_000_000);
        assert_eq!(nanos_to_secs(1_000_000_000), 1.0);
    }
}
