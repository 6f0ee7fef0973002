//! Cluster side of servbench: a leader that places benchmark jobs on
//! followers, the followers that run them, and an offline scheduler
//! simulator.

pub mod client;
pub mod error;
pub mod follower;
pub mod leader;
pub mod protocol;
pub mod sched;
pub mod trace;

pub use error::{ClusterError, Result};
pub use follower::{Follower, FollowerConfig};
pub use leader::{Leader, LeaderConfig};
pub use sched::{compare_policies, schedule_simulate, Job, SchedulerPolicy, SimReport};

/// Seconds since the Unix epoch.
pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}
