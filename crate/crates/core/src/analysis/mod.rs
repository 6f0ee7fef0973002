//! Result storage and analysis: PerfDB, metrics, rooflines, heat maps,
//! recommendations and leaderboards. Everything here is a pure function of
//! the records it is given; outputs are plot-ready CSV.

pub mod heatgrid;
pub mod leaderboard;
pub mod metrics;
pub mod perfdb;
pub mod recommend;
pub mod roofline;

pub use heatgrid::{build_heatgrid, GridAxis, HeatGrid};
pub use leaderboard::{leaderboard, speedup_table, GroupBy, LeaderRow, SpeedupRow};
pub use metrics::Metric;
pub use perfdb::{read_perf_record, IndexEntry, PerfDb, RecordQuery};
pub use recommend::{recommend, Candidate, NearestMiss, Recommendation};
pub use roofline::{classify, roofline_attainable, roofline_points, Bound, RooflinePoint};
