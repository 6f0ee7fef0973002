//! Per-request records and their line-delimited JSON export.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::Nanos;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Ok,
    Failed(String),
}

/// The five pipeline stages. Transmission covers both directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Preprocess,
    Transmission,
    Batching,
    Inference,
    Postprocess,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Preprocess,
        Stage::Transmission,
        Stage::Batching,
        Stage::Inference,
        Stage::Postprocess,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Transmission => "transmission",
            Stage::Batching => "batching",
            Stage::Inference => "inference",
            Stage::Postprocess => "postprocess",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One request's journey. Timestamps are integer nanoseconds since job start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub req_id: u64,
    /// Planned send time, nanoseconds since job start.
    pub scheduled_offset: Nanos,
    pub t_send: Nanos,
    pub t_preproc_done: Nanos,
    pub t_arrive_server: Nanos,
    pub t_enqueue: Nanos,
    pub t_batch_dispatch: Nanos,
    pub t_infer_done: Nanos,
    pub t_postproc_done: Nanos,
    pub t_response: Nanos,
    pub batch_id: Option<u64>,
    pub payload_bytes: u64,
    pub status: RequestStatus,
}

impl RequestRecord {
    /// A record whose every stamp equals `t`; drivers fill in the rest.
    pub fn at(req_id: u64, scheduled_offset: Nanos, t: Nanos, payload_bytes: u64) -> Self {
        RequestRecord {
            req_id,
            scheduled_offset,
            t_send: t,
            t_preproc_done: t,
            t_arrive_server: t,
            t_enqueue: t,
            t_batch_dispatch: t,
            t_infer_done: t,
            t_postproc_done: t,
            t_response: t,
            batch_id: None,
            payload_bytes,
            status: RequestStatus::Ok,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RequestStatus::Ok
    }

    pub fn timestamps(&self) -> [Nanos; 8] {
        [
            self.t_send,
            self.t_preproc_done,
            self.t_arrive_server,
            self.t_enqueue,
            self.t_batch_dispatch,
            self.t_infer_done,
            self.t_postproc_done,
            self.t_response,
        ]
    }

    pub fn is_monotone(&self) -> bool {
        self.timestamps().windows(2).all(|w| w[0] <= w[1])
    }

    pub fn e2e(&self) -> Nanos {
        self.t_response - self.t_send
    }

    /// Stage durations in [`Stage::ALL`] order. For a monotone record they
    /// sum to [`RequestRecord::e2e`] exactly; queueing between arrival and
    /// enqueue is charged to batching.
    pub fn stage_durations(&self) -> [Nanos; 5] {
        [
            self.t_preproc_done - self.t_send,
            (self.t_arrive_server - self.t_preproc_done) + (self.t_response - self.t_postproc_done),
            self.t_batch_dispatch - self.t_arrive_server,
            self.t_infer_done - self.t_batch_dispatch,
            self.t_postproc_done - self.t_infer_done,
        ]
    }
}

/// Writes one JSON object per line.
pub fn write_records(path: &Path, records: &[RequestRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RequestRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            what: "request record",
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(r);
    }
    Ok(records)
}
