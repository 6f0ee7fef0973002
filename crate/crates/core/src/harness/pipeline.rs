//! Named pre/post-processors.
//!
//! These are stand-ins for model-specific processing: each has a fixed
//! simulated duration (overridable per job) so that stage accounting has
//! something to measure.

pub const PASSTHROUGH: &str = "passthrough";

/// Registered processor names.
pub const PROCESSORS: [&str; 4] = [PASSTHROUGH, "byte-resize", "tokenize", "label-lookup"];

/// Default duration in seconds of a registered processor.
pub fn default_duration(name: &str) -> Option<f64> {
    match name {
        PASSTHROUGH => Some(0.0),
        "byte-resize" => Some(2e-3),
        "tokenize" => Some(1e-3),
        "label-lookup" => Some(0.2e-3),
        _ => None,
    }
}
