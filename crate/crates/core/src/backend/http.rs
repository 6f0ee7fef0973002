//! Client backend for an external inference server.
//!
//! Each request is a `POST {endpoint}/infer` with the raw payload as body;
//! the response is read in full. Only client-side timestamps are available.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use ureq::Agent;

use super::resources::ResourceSample;
use super::{BackendInfo, Clock, InferOutcome, InferRequest, ServingBackend};
use crate::error::{Error, Result};
use crate::time::{duration_nanos, Nanos};

#[derive(Debug)]
pub struct HttpBackend {
    endpoint: String,
    agent: Agent,
    started: AtomicBool,
    stopped: AtomicBool,
}

impl HttpBackend {
    /// `timeout` bounds each request end to end, in seconds.
    pub fn new(endpoint: impl Into<String>, timeout: f64) -> Self {
        let config = Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(timeout)))
            .http_status_as_error(false)
            .build();
        HttpBackend {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            agent: Agent::new_with_config(config),
            started: AtomicBool::new(false),
            stopped: AtomicBool::new(false),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn infer_url(&self) -> String {
        format!("{}/infer", self.endpoint)
    }

    fn post(&self, body: &[u8]) -> std::result::Result<(), String> {
        let mut resp = self
            .agent
            .post(&self.infer_url())
            .header("content-type", "application/octet-stream")
            .send(body)
            .map_err(describe)?;
        let status = resp.status().as_u16();
        resp.body_mut().read_to_vec().map_err(describe)?;
        if (200..300).contains(&status) {
            Ok(())
        } else {
            Err(format!("http status {status}"))
        }
    }
}

fn describe(err: ureq::Error) -> String {
    match err {
        ureq::Error::Timeout(t) => format!("timeout ({t})"),
        other => other.to_string(),
    }
}

impl ServingBackend for HttpBackend {
    fn info(&self) -> BackendInfo {
        BackendInfo {
            kind: "http".into(),
            version: crate::VERSION.into(),
            clock: Clock::Wall,
        }
    }

    /// Probes the endpoint once. Any HTTP answer counts as ready; an
    /// unreachable server is not an error here, its requests fail instead.
    fn start(&self) -> Result<f64> {
        if self.started.swap(true, Ordering::SeqCst) {
            return Err(Error::Backend("http backend already started".into()));
        }
        let t0 = Instant::now();
        match self.agent.get(&self.endpoint).call() {
            Ok(mut resp) => {
                let _ = resp.body_mut().read_to_vec();
                Ok(t0.elapsed().as_secs_f64())
            }
            Err(e) => {
                log::warn!("endpoint {} not reachable at start: {}", self.endpoint, describe(e));
                Ok(0.0)
            }
        }
    }

    /// Sends the batch members one after another; the `started`/`done`
    /// stamps are `dispatch_at` plus elapsed wall time.
    fn infer(&self, batch: &[InferRequest<'_>]) -> Result<Vec<InferOutcome>> {
        if !self.started.load(Ordering::SeqCst) || self.stopped.load(Ordering::SeqCst) {
            return Err(Error::Backend("infer called on a backend that is not running".into()));
        }
        let t0 = Instant::now();
        let base: Nanos = batch.first().map_or(0, |r| r.dispatch_at);
        let mut out = Vec::with_capacity(batch.len());
        for req in batch {
            let started = base + duration_nanos(t0.elapsed());
            let outcome = match self.post(req.body) {
                Ok(()) => InferOutcome::Ok {
                    started,
                    done: base + duration_nanos(t0.elapsed()),
                },
                Err(reason) => InferOutcome::Failed(reason),
            };
            out.push(outcome);
        }
        Ok(out)
    }

    fn sample_resources(&self) -> Option<ResourceSample> {
        None
    }

    fn stop(&self) {
        self.stopped.store(true, Ordering::SeqCst);
    }
}
