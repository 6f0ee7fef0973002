//! Wire format between leader, followers and clients: each frame is a
//! 4-byte big-endian length followed by one JSON envelope.

use std::io::{ErrorKind, Read, Write};

use serde::{Deserialize, Serialize};
use servbench_core::harness::PerfRecord;
use servbench_core::spec::{JobSpec, JobState, JobStatus};

use crate::error::{ClusterError, Result};
use crate::sched::QueueOrder;

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_FRAME: usize = 64 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub schema_version: u32,
    #[serde(flatten)]
    pub msg: Message,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Message {
    /// Follower → leader, first frame on a follower connection.
    Register { worker_id: String },
    /// Leader → follower. `order` is the tier-2 queue order to apply.
    Registered {
        worker_id: String,
        order: QueueOrder,
        heartbeat_interval: f64,
    },
    /// Follower → leader. `queue_seconds` covers queued jobs plus the
    /// remainder of the running one.
    Heartbeat {
        worker_id: String,
        queue_seconds: f64,
        known_jobs: Vec<String>,
        running: Option<String>,
    },
    Dispatch { job_id: String, spec: Box<JobSpec> },
    Status {
        job_id: String,
        state: JobState,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    Result { job_id: String, record: Box<PerfRecord> },
    /// Client → leader. The spec is sent as its TOML text.
    Submit { spec_toml: String },
    Submitted { job_id: String },
    /// Client → leader. `None` lists every job.
    Query { job_id: Option<String> },
    JobInfo { jobs: Vec<JobStatus> },
    Error { message: String },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Register { .. } => "REGISTER",
            Message::Registered { .. } => "REGISTERED",
            Message::Heartbeat { .. } => "HEARTBEAT",
            Message::Dispatch { .. } => "DISPATCH",
            Message::Status { .. } => "STATUS",
            Message::Result { .. } => "RESULT",
            Message::Submit { .. } => "SUBMIT",
            Message::Submitted { .. } => "SUBMITTED",
            Message::Query { .. } => "QUERY",
            Message::JobInfo { .. } => "JOB_INFO",
            Message::Error { .. } => "ERROR",
        }
    }
}

pub fn encode(msg: &Message) -> Result<Vec<u8>> {
    let env = Envelope { schema_version: PROTOCOL_VERSION, msg: msg.clone() };
    let body = serde_json::to_vec(&env)?;
    if body.len() > MAX_FRAME {
        return Err(ClusterError::Protocol(format!("frame of {} bytes exceeds limit", body.len())));
    }
    let mut frame = Vec::with_capacity(body.len() + 4);
    frame.extend_from_slice(&(body.len() as u32).to_be_bytes());
    frame.extend_from_slice(&body);
    Ok(frame)
}

pub fn write_message(w: &mut impl Write, msg: &Message) -> Result<()> {
    w.write_all(&encode(msg)?)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. `Ok(None)` on a clean end of stream before a header.
pub fn read_message(r: &mut impl Read) -> Result<Option<Message>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(ClusterError::Protocol(format!("frame of {len} bytes exceeds limit")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    let env: Envelope = serde_json::from_slice(&body)
        .map_err(|e| ClusterError::Protocol(format!("bad envelope: {e}")))?;
    if env.schema_version != PROTOCOL_VERSION {
        return Err(ClusterError::Protocol(format!(
            "schema_version {} unsupported (expected {PROTOCOL_VERSION})",
            env.schema_version
        )));
    }
    Ok(Some(env.msg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip() {
        let msgs = vec![
            Message::Register { worker_id: "w1".into() },
            Message::Heartbeat {
                worker_id: "w1".into(),
                queue_seconds: 12.5,
                known_jobs: vec!["job-1".into()],
                running: None,
            },
            Message::Status { job_id: "job-1".into(), state: JobState::Running, reason: None },
            Message::Query { job_id: None },
            Message::Error { message: "nope".into() },
        ];
        let mut buf = Vec::new();
        for m in &msgs {
            write_message(&mut buf, m).unwrap();
        }
        let mut r = &buf[..];
        for m in &msgs {
            assert_eq!(read_message(&mut r).unwrap().as_ref(), Some(m));
        }
        assert!(read_message(&mut r).unwrap().is_none());
    }

    #[test]
    fn envelope_layout() {
        let frame = encode(&Message::Submitted { job_id: "job-7".into() }).unwrap();
        let len = u32::from_be_bytes(frame[..4].try_into().unwrap()) as usize;
        assert_eq!(len, frame.len() - 4);
        let v: serde_json::Value = serde_json::from_slice(&frame[4..]).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["kind"], "SUBMITTED");
        assert_eq!(v["job_id"], "job-7");
    }

    #[test]
    fn rejects_other_versions_and_oversize() {
        let body = br#"{"schema_version":2,"kind":"QUERY","job_id":null}"#;
        let mut frame = (body.len() as u32).to_be_bytes().to_vec();
        frame.extend_from_slice(body);
        assert!(matches!(read_message(&mut &frame[..]), Err(ClusterError::Protocol(_))));

        let huge = ((MAX_FRAME + 1) as u32).to_be_bytes();
        assert!(matches!(read_message(&mut &huge[..]), Err(ClusterError::Protocol(_))));
    }
}
