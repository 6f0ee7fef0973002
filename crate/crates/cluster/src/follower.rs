//! Follower: registers with the leader, queues dispatched jobs and runs
//! them one at a time.

use std::collections::BTreeSet;
use std::io::{BufReader, BufWriter};
use std::net::{Shutdown, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{info, warn};
use servbench_core::catalog::Catalog;
use servbench_core::harness::{execute, JobInputs, PerfRecord};
use servbench_core::modelgen::ModelRepository;
use servbench_core::spec::{JobSpec, JobState};

use crate::error::{ClusterError, Result};
use crate::protocol::{read_message, write_message, Message};
use crate::sched::{order_queue, QueueOrder, Queued};

#[derive(Debug, Clone)]
pub struct FollowerConfig {
    pub leader: String,
    pub worker_id: String,
    /// Each job holds the worker for `pace` times its simulated duration
    /// (cold start plus wall time). 0 releases it as soon as it finishes.
    pub pace: f64,
    pub models: Option<PathBuf>,
    pub catalog: Catalog,
}

struct QueuedJob {
    job_id: String,
    spec: JobSpec,
    arrival: f64,
}

impl Queued for QueuedJob {
    fn t_proc(&self) -> f64 {
        self.spec.estimated_duration
    }
    fn submit_time(&self) -> f64 {
        self.arrival
    }
    fn job_id(&self) -> &str {
        &self.job_id
    }
}

#[derive(Default)]
struct Shared {
    queue: Vec<QueuedJob>,
    running: Option<(String, f64, Instant)>,
    seen: BTreeSet<String>,
    arrivals: u64,
    closed: bool,
}

struct Inner {
    cfg: FollowerConfig,
    order: QueueOrder,
    heartbeat: Duration,
    state: Mutex<Shared>,
    wake: Condvar,
    writer: Mutex<BufWriter<TcpStream>>,
    killed: AtomicBool,
}

impl Inner {
    fn send(&self, msg: &Message) -> Result<()> {
        if self.killed.load(Ordering::SeqCst) {
            return Ok(());
        }
        let mut w = self.writer.lock().expect("writer lock");
        write_message(&mut *w, msg)
    }

    fn stopped(&self) -> bool {
        self.killed.load(Ordering::SeqCst) || self.state.lock().expect("state lock").closed
    }

    fn heartbeat_msg(&self) -> Message {
        let s = self.state.lock().expect("state lock");
        let queued: f64 = s.queue.iter().map(|q| q.spec.estimated_duration).sum();
        let running = s.running.as_ref().map_or(0.0, |(_, t_proc, started)| {
            if self.cfg.pace > 0.0 {
                (t_proc - started.elapsed().as_secs_f64() / self.cfg.pace).max(0.0)
            } else {
                *t_proc
            }
        });
        let mut known: Vec<String> = s.queue.iter().map(|q| q.job_id.clone()).collect();
        if let Some((id, _, _)) = &s.running {
            known.push(id.clone());
        }
        Message::Heartbeat {
            worker_id: self.cfg.worker_id.clone(),
            queue_seconds: queued + running,
            known_jobs: known,
            running: s.running.as_ref().map(|(id, _, _)| id.clone()),
        }
    }
}

pub struct Follower {
    inner: Arc<Inner>,
    stream: TcpStream,
    threads: Vec<JoinHandle<()>>,
}

impl Follower {
    /// Connects, registers and starts the reader, heartbeat and executor threads.
    pub fn start(cfg: FollowerConfig) -> Result<Follower> {
        if !(cfg.pace >= 0.0 && cfg.pace.is_finite()) {
            return Err(ClusterError::User("pace must be >= 0".into()));
        }
        let stream = TcpStream::connect(&cfg.leader)?;
        stream.set_nodelay(true)?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream.try_clone()?);
        write_message(&mut writer, &Message::Register { worker_id: cfg.worker_id.clone() })?;
        let (order, heartbeat) = match read_message(&mut reader)? {
            Some(Message::Registered { order, heartbeat_interval, .. }) => {
                (order, Duration::from_secs_f64(heartbeat_interval.max(0.01)))
            }
            Some(Message::Error { message }) => return Err(ClusterError::Remote(message)),
            other => return Err(ClusterError::Protocol(format!("expected REGISTERED, got {other:?}"))),
        };
        info!("{} registered with {} (order {order:?}, heartbeat {heartbeat:?})", cfg.worker_id, cfg.leader);

        let inner = Arc::new(Inner {
            cfg,
            order,
            heartbeat,
            state: Mutex::new(Shared::default()),
            wake: Condvar::new(),
            writer: Mutex::new(writer),
            killed: AtomicBool::new(false),
        });
        let mut threads = Vec::new();
        {
            let inner = inner.clone();
            threads.push(thread::Builder::new().name("follower-read".into()).spawn(move || read_loop(&inner, reader))?);
        }
        {
            let inner = inner.clone();
            threads.push(thread::Builder::new().name("follower-beat".into()).spawn(move || heartbeat_loop(&inner))?);
        }
        {
            let inner = inner.clone();
            threads.push(thread::Builder::new().name("follower-exec".into()).spawn(move || exec_loop(&inner))?);
        }
        Ok(Follower { inner, stream, threads })
    }

    pub fn worker_id(&self) -> &str {
        &self.inner.cfg.worker_id
    }

    /// Simulates a crash: stops talking to the leader immediately,
    /// without any goodbye message.
    pub fn kill(&self) {
        self.inner.killed.store(true, Ordering::SeqCst);
        let _ = self.stream.shutdown(Shutdown::Both);
        self.inner.wake.notify_all();
    }

    /// Blocks until the leader connection closes or the follower is killed.
    pub fn wait(mut self) {
        for h in self.threads.drain(..) {
            let _ = h.join();
        }
    }
}

impl Drop for Follower {
    fn drop(&mut self) {
        if !self.threads.is_empty() {
            self.kill();
            for h in self.threads.drain(..) {
                let _ = h.join();
            }
        }
    }
}

fn close(inner: &Inner) {
    inner.state.lock().expect("state lock").closed = true;
    inner.wake.notify_all();
}

fn read_loop(inner: &Inner, mut reader: BufReader<TcpStream>) {
    loop {
        match read_message(&mut reader) {
            Ok(Some(Message::Dispatch { job_id, spec })) => {
                let mut s = inner.state.lock().expect("state lock");
                if !s.seen.insert(job_id.clone()) {
                    info!("duplicate DISPATCH for {job_id} ignored");
                    continue;
                }
                let arrival = s.arrivals as f64;
                s.arrivals += 1;
                s.queue.push(QueuedJob { job_id, spec: *spec, arrival });
                drop(s);
                inner.wake.notify_all();
            }
            Ok(Some(other)) => warn!("unexpected {} from leader", other.kind()),
            Ok(None) => break,
            Err(e) => {
                if !inner.killed.load(Ordering::SeqCst) {
                    warn!("leader connection: {e}");
                }
                break;
            }
        }
    }
    close(inner);
}

fn heartbeat_loop(inner: &Inner) {
    loop {
        if inner.send(&inner.heartbeat_msg()).is_err() {
            close(inner);
            return;
        }
        let s = inner.state.lock().expect("state lock");
        let (s, _) = inner
            .wake
            .wait_timeout_while(s, inner.heartbeat, |s| !s.closed && !inner.killed.load(Ordering::SeqCst))
            .expect("state lock");
        if s.closed || inner.killed.load(Ordering::SeqCst) {
            return;
        }
    }
}

fn exec_loop(inner: &Inner) {
    let repo = inner.cfg.models.as_ref().and_then(|p| match ModelRepository::open(p) {
        Ok(r) => Some(r),
        Err(e) => {
            warn!("model repository {}: {e}", p.display());
            None
        }
    });
    loop {
        let job = {
            let mut s = inner.state.lock().expect("state lock");
            while s.queue.is_empty() && !s.closed && !inner.killed.load(Ordering::SeqCst) {
                s = inner.wake.wait(s).expect("state lock");
            }
            if s.closed || inner.killed.load(Ordering::SeqCst) {
                return;
            }
            order_queue(&mut s.queue, inner.order);
            let job = s.queue.remove(0);
            s.running = Some((job.job_id.clone(), job.spec.estimated_duration, Instant::now()));
            job
        };
        run_one(inner, &job, repo.as_ref());
        inner.state.lock().expect("state lock").running = None;
        if inner.stopped() {
            return;
        }
    }
}

fn run_one(inner: &Inner, job: &QueuedJob, repo: Option<&ModelRepository>) {
    let started = Instant::now();
    let job_id = job.job_id.as_str();
    let _ = inner.send(&Message::Status { job_id: job_id.into(), state: JobState::Running, reason: None });
    info!("{} running {job_id}", inner.cfg.worker_id);

    let outcome: std::result::Result<PerfRecord, String> = JobInputs::resolve(&job.spec, &inner.cfg.catalog, repo)
        .and_then(|inputs| execute(job_id, &inputs))
        .map_err(|e| e.to_string());
    match outcome {
        Ok(record) => {
            if inner.cfg.pace > 0.0 {
                let hold = Duration::from_secs_f64((record.cold_start + record.wall_time) * inner.cfg.pace);
                let mut left = hold.saturating_sub(started.elapsed());
                while !left.is_zero() && !inner.stopped() {
                    let step = left.min(Duration::from_millis(50));
                    thread::sleep(step);
                    left = left.saturating_sub(step);
                }
            }
            if inner.stopped() {
                return;
            }
            let _ = inner.send(&Message::Status { job_id: job_id.into(), state: JobState::Collecting, reason: None });
            let _ = inner.send(&Message::Result { job_id: job_id.into(), record: Box::new(record) });
            info!("{} finished {job_id}", inner.cfg.worker_id);
        }
        Err(reason) => {
            warn!("{job_id} failed: {reason}");
            let _ = inner.send(&Message::Status { job_id: job_id.into(), state: JobState::Failed, reason: Some(reason) });
        }
    }
}
