//! Short-lived client connections for submitting and querying jobs.

use std::io::BufReader;
use std::net::TcpStream;
use std::time::Duration;

use servbench_core::spec::JobStatus;

use crate::error::{ClusterError, Result};
use crate::protocol::{read_message, write_message, Message};

pub const LEADER_ENV: &str = "SERVBENCH_LEADER";
pub const DEFAULT_LEADER: &str = "127.0.0.1:7070";

fn request(leader: &str, msg: &Message) -> Result<Message> {
    let stream = TcpStream::connect(leader)?;
    stream.set_read_timeout(Some(Duration::from_secs(30)))?;
    let mut writer = stream.try_clone()?;
    write_message(&mut writer, msg)?;
    match read_message(&mut BufReader::new(stream))? {
        Some(Message::Error { message }) => Err(ClusterError::Remote(message)),
        Some(reply) => Ok(reply),
        None => Err(ClusterError::Protocol("leader closed the connection".into())),
    }
}

/// Submits a job spec (TOML text) and returns the leader-assigned job id.
pub fn submit(leader: &str, spec_toml: &str) -> Result<String> {
    match request(leader, &Message::Submit { spec_toml: spec_toml.to_string() })? {
        Message::Submitted { job_id } => Ok(job_id),
        other => Err(ClusterError::Protocol(format!("expected SUBMITTED, got {}", other.kind()))),
    }
}

/// Status of one job, or of every job when `job_id` is `None`.
pub fn query(leader: &str, job_id: Option<&str>) -> Result<Vec<JobStatus>> {
    match request(leader, &Message::Query { job_id: job_id.map(str::to_string) })? {
        Message::JobInfo { jobs } => Ok(jobs),
        other => Err(ClusterError::Protocol(format!("expected JOB_INFO, got {}", other.kind()))),
    }
}

/// Polls until every listed job is terminal or `timeout` passes.
pub fn wait_terminal(leader: &str, job_ids: &[String], timeout: Duration) -> Result<Vec<JobStatus>> {
    let deadline = std::time::Instant::now() + timeout;
    loop {
        let all = query(leader, None)?;
        let mine: Vec<JobStatus> = all.into_iter().filter(|s| job_ids.contains(&s.job_id)).collect();
        if mine.len() == job_ids.len() && mine.iter().all(|s| s.state.is_terminal()) {
            return Ok(mine);
        }
        if std::time::Instant::now() >= deadline {
            return Err(ClusterError::User(format!("timed out after {timeout:?} waiting for jobs")));
        }
        std::thread::sleep(Duration::from_millis(100));
    }
}
