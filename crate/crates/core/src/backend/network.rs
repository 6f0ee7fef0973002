//! Network emulation between client and server.

use serde::{Deserialize, Serialize};

/// A symmetric link. `rtt` in seconds, `bandwidth` in bytes/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub rtt: f64,
    pub bandwidth: f64,
}

impl Link {
    pub fn new(rtt: f64, bandwidth: f64) -> Self {
        Link { rtt, bandwidth }
    }

    /// One-way transfer time for `bytes`: half the round trip plus
    /// serialisation.
    pub fn one_way(&self, bytes: u64) -> f64 {
        self.rtt / 2.0 + bytes as f64 / self.bandwidth
    }
}

/// (uplink, downlink) seconds for one request.
pub fn sim_network(payload_bytes: u64, response_bytes: u64, link: Link) -> (f64, f64) {
    (link.one_way(payload_bytes), link.one_way(response_bytes))
}
