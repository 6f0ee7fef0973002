//! Leader: accepts follower and client connections, owns job state and
//! runs placement on a fixed scheduling interval.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, unbounded, Receiver, RecvTimeoutError, Sender};
use log::{debug, info, warn};
use servbench_core::analysis::PerfDb;
use servbench_core::catalog::Catalog;
use servbench_core::error::Error as CoreError;
use servbench_core::harness::PerfRecord;
use servbench_core::spec::{parse_job_spec_with, JobSpec, JobState, JobStatus};

use crate::error::Result;
use crate::protocol::{read_message, write_message, Message};
use crate::sched::{place_job, RoundRobin, SchedulerPolicy};
use crate::unix_now;

pub const WORKER_LOST: &str = "worker lost";

#[derive(Debug, Clone)]
pub struct LeaderConfig {
    pub bind: String,
    pub policy: SchedulerPolicy,
    pub sched_interval: Duration,
    pub heartbeat_interval: Duration,
    /// A follower is dead after this many heartbeat intervals of silence.
    pub missed_heartbeats: u32,
    /// Placement starts once this many followers have been alive at the
    /// same time. Later losses do not pause it.
    pub min_workers: usize,
    pub perfdb: Option<PathBuf>,
    pub catalog: Catalog,
}

impl Default for LeaderConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:7070".into(),
            policy: SchedulerPolicy::QA_SJF,
            sched_interval: Duration::from_secs(1),
            heartbeat_interval: Duration::from_secs(2),
            missed_heartbeats: 3,
            min_workers: 1,
            perfdb: None,
            catalog: Catalog::bundled(),
        }
    }
}

enum Event {
    Registered { conn: u64, worker_id: String, writer: TcpStream },
    Worker { conn: u64, msg: Message },
    Disconnected { conn: u64 },
    Client { msg: Message, reply: Sender<Message> },
}

struct JobEntry {
    status: JobStatus,
    spec: JobSpec,
    seq: u64,
}

struct WorkerEntry {
    conn: u64,
    writer: BufWriter<TcpStream>,
    last_heartbeat: Instant,
    queue_seconds: f64,
    known_jobs: BTreeSet<String>,
    /// Dispatched and not yet terminal.
    assigned: BTreeSet<String>,
    alive: bool,
}

pub struct Leader {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    scheduler: Option<JoinHandle<()>>,
    acceptor: Option<JoinHandle<()>>,
}

impl Leader {
    /// Binds and starts serving in background threads.
    pub fn start(cfg: LeaderConfig) -> Result<Leader> {
        let listener = TcpListener::bind(&cfg.bind)?;
        let addr = listener.local_addr()?;
        let perfdb = cfg.perfdb.as_ref().map(PerfDb::open).transpose()?;
        let stop = Arc::new(AtomicBool::new(false));
        let (tx, rx) = unbounded();

        info!(
            "leader on {addr}: policy {}, scheduling every {:?}, heartbeat {:?}, dead after {} missed",
            cfg.policy, cfg.sched_interval, cfg.heartbeat_interval, cfg.missed_heartbeats
        );

        let acceptor = {
            let stop = stop.clone();
            thread::Builder::new().name("leader-accept".into()).spawn(move || accept_loop(listener, tx, stop))?
        };
        let scheduler = {
            let stop = stop.clone();
            let mut state = LeaderState::new(cfg, perfdb);
            thread::Builder::new()
                .name("leader-sched".into())
                .spawn(move || state.run(rx, stop))?
        };
        Ok(Leader { addr, stop, scheduler: Some(scheduler), acceptor: Some(acceptor) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the leader stops.
    pub fn wait(mut self) {
        if let Some(h) = self.scheduler.take() {
            let _ = h.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop_now();
    }

    fn stop_now(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the acceptor.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
        if let Some(h) = self.scheduler.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Leader {
    fn drop(&mut self) {
        if self.scheduler.is_some() {
            self.stop_now();
        }
    }
}

fn accept_loop(listener: TcpListener, tx: Sender<Event>, stop: Arc<AtomicBool>) {
    let next_conn = Arc::new(AtomicU64::new(1));
    for stream in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let tx = tx.clone();
        let conn = next_conn.fetch_add(1, Ordering::SeqCst);
        let _ = thread::Builder::new()
            .name(format!("leader-conn-{conn}"))
            .spawn(move || handle_connection(conn, stream, tx));
    }
}

fn handle_connection(conn: u64, stream: TcpStream, tx: Sender<Event>) {
    let _ = stream.set_nodelay(true);
    let Ok(read_half) = stream.try_clone() else { return };
    let mut reader = BufReader::new(read_half);
    let mut writer = stream;
    let mut is_worker = false;
    loop {
        let msg = match read_message(&mut reader) {
            Ok(Some(m)) => m,
            Ok(None) => break,
            Err(e) => {
                debug!("connection {conn}: {e}");
                break;
            }
        };
        match msg {
            Message::Register { worker_id } if !is_worker => {
                let Ok(w) = writer.try_clone() else { break };
                is_worker = true;
                if tx.send(Event::Registered { conn, worker_id, writer: w }).is_err() {
                    break;
                }
            }
            m @ (Message::Heartbeat { .. } | Message::Status { .. } | Message::Result { .. }) if is_worker => {
                if tx.send(Event::Worker { conn, msg: m }).is_err() {
                    break;
                }
            }
            m @ (Message::Submit { .. } | Message::Query { .. }) if !is_worker => {
                let (rtx, rrx) = bounded(1);
                if tx.send(Event::Client { msg: m, reply: rtx }).is_err() {
                    break;
                }
                let Ok(reply) = rrx.recv() else { break };
                if write_message(&mut writer, &reply).is_err() {
                    break;
                }
            }
            other => {
                let _ = write_message(
                    &mut writer,
                    &Message::Error { message: format!("unexpected {} on this connection", other.kind()) },
                );
            }
        }
    }
    if is_worker {
        let _ = tx.send(Event::Disconnected { conn });
    }
}

struct LeaderState {
    cfg: LeaderConfig,
    perfdb: Option<PerfDb>,
    jobs: BTreeMap<String, JobEntry>,
    pending: Vec<String>,
    workers: BTreeMap<String, WorkerEntry>,
    rr: RoundRobin,
    next_seq: u64,
    gate_open: bool,
}

impl LeaderState {
    fn new(cfg: LeaderConfig, perfdb: Option<PerfDb>) -> Self {
        Self {
            cfg,
            perfdb,
            jobs: BTreeMap::new(),
            pending: Vec::new(),
            workers: BTreeMap::new(),
            rr: RoundRobin::default(),
            next_seq: 0,
            gate_open: false,
        }
    }

    fn run(&mut self, rx: Receiver<Event>, stop: Arc<AtomicBool>) {
        let mut next_tick = Instant::now() + self.cfg.sched_interval;
        while !stop.load(Ordering::SeqCst) {
            let timeout = next_tick.saturating_duration_since(Instant::now());
            match rx.recv_timeout(timeout.min(Duration::from_millis(200))) {
                Ok(ev) => self.handle(ev),
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => break,
            }
            if Instant::now() >= next_tick {
                self.tick();
                next_tick += self.cfg.sched_interval;
                if next_tick < Instant::now() {
                    next_tick = Instant::now() + self.cfg.sched_interval;
                }
            }
        }
    }

    fn handle(&mut self, ev: Event) {
        match ev {
            Event::Registered { conn, worker_id, writer } => self.register(conn, worker_id, writer),
            Event::Worker { conn, msg } => {
                let Some(worker_id) = self.worker_for(conn) else {
                    debug!("message from stale connection {conn} ignored");
                    return;
                };
                match msg {
                    Message::Heartbeat { queue_seconds, known_jobs, .. } => {
                        let w = self.workers.get_mut(&worker_id).expect("worker exists");
                        if w.alive {
                            w.last_heartbeat = Instant::now();
                            w.queue_seconds = queue_seconds;
                            w.known_jobs = known_jobs.into_iter().collect();
                        }
                    }
                    Message::Status { job_id, state, reason } => self.on_status(&worker_id, &job_id, state, reason),
                    Message::Result { job_id, record } => self.on_result(&worker_id, &job_id, *record),
                    _ => {}
                }
            }
            Event::Disconnected { conn } => {
                if let Some(id) = self.worker_for(conn) {
                    info!("follower {id} disconnected; waiting for heartbeat timeout");
                }
            }
            Event::Client { msg, reply } => {
                let _ = reply.send(self.client(msg));
            }
        }
    }

    fn worker_for(&self, conn: u64) -> Option<String> {
        self.workers.iter().find(|(_, w)| w.conn == conn).map(|(id, _)| id.clone())
    }

    fn register(&mut self, conn: u64, worker_id: String, writer: TcpStream) {
        let _ = writer.set_write_timeout(Some(Duration::from_secs(10)));
        if self.workers.get(&worker_id).is_some_and(|w| w.alive) {
            // A restarted follower has lost its queue.
            info!("follower {worker_id} re-registered");
            self.release_worker(&worker_id);
        }
        let mut writer = BufWriter::new(writer);
        let hello = Message::Registered {
            worker_id: worker_id.clone(),
            order: self.cfg.policy.order,
            heartbeat_interval: self.cfg.heartbeat_interval.as_secs_f64(),
        };
        if let Err(e) = write_message(&mut writer, &hello) {
            warn!("registering {worker_id}: {e}");
            return;
        }
        info!("follower {worker_id} registered");
        self.workers.insert(
            worker_id,
            WorkerEntry {
                conn,
                writer,
                last_heartbeat: Instant::now(),
                queue_seconds: 0.0,
                known_jobs: BTreeSet::new(),
                assigned: BTreeSet::new(),
                alive: true,
            },
        );
    }

    /// Fails the worker's running job and returns its queued jobs to SUBMITTED.
    fn release_worker(&mut self, worker_id: &str) {
        let Some(w) = self.workers.get_mut(worker_id) else { return };
        w.alive = false;
        let assigned = std::mem::take(&mut w.assigned);
        let now = unix_now();
        for job_id in assigned {
            let Some(job) = self.jobs.get_mut(&job_id) else { continue };
            match job.status.state {
                JobState::Queued => {
                    let _ = job.status.transition(JobState::Submitted, now);
                    info!("{job_id} returned to SUBMITTED after losing {worker_id}");
                    self.pending.push(job_id);
                }
                JobState::Running | JobState::Collecting => {
                    job.status.reason = Some(WORKER_LOST.into());
                    let _ = job.status.transition(JobState::Failed, now);
                    warn!("{job_id} failed: {WORKER_LOST} ({worker_id})");
                }
                _ => {}
            }
        }
        let jobs = &self.jobs;
        self.pending.sort_by_key(|id| jobs.get(id).map_or(u64::MAX, |j| j.seq));
    }

    fn tick(&mut self) {
        let deadline = self.cfg.heartbeat_interval * self.cfg.missed_heartbeats;
        let dead: Vec<String> = self
            .workers
            .iter()
            .filter(|(_, w)| w.alive && w.last_heartbeat.elapsed() > deadline)
            .map(|(id, _)| id.clone())
            .collect();
        for id in dead {
            warn!("follower {id} missed {} heartbeats; marked dead", self.cfg.missed_heartbeats);
            self.release_worker(&id);
        }
        self.place_pending();
    }

    /// Estimated queued seconds: the follower's last report plus jobs
    /// dispatched since that it has not acknowledged yet.
    fn estimate(&self, w: &WorkerEntry) -> f64 {
        let unseen: f64 = w
            .assigned
            .iter()
            .filter(|id| !w.known_jobs.contains(*id))
            .filter_map(|id| self.jobs.get(id))
            .filter(|j| !j.status.state.is_terminal())
            .map(|j| j.spec.estimated_duration)
            .sum();
        w.queue_seconds + unseen
    }

    fn place_pending(&mut self) {
        let alive: Vec<String> = self.workers.iter().filter(|(_, w)| w.alive).map(|(id, _)| id.clone()).collect();
        self.gate_open |= alive.len() >= self.cfg.min_workers;
        if self.pending.is_empty() || alive.is_empty() || !self.gate_open {
            return;
        }
        let pending = std::mem::take(&mut self.pending);
        for job_id in pending {
            let qs: Vec<f64> = alive.iter().map(|id| self.estimate(&self.workers[id])).collect();
            let idx = place_job(&qs, self.cfg.policy.lb, &mut self.rr).expect("alive is non-empty");
            let worker_id = &alive[idx];
            let job = self.jobs.get_mut(&job_id).expect("pending job exists");
            let msg = Message::Dispatch { job_id: job_id.clone(), spec: Box::new(job.spec.clone()) };
            let w = self.workers.get_mut(worker_id).expect("alive worker");
            if let Err(e) = write_message(&mut w.writer, &msg) {
                warn!("dispatch of {job_id} to {worker_id} failed: {e}");
                self.pending.push(job_id);
                continue;
            }
            let now = unix_now();
            let _ = job.status.transition(JobState::Queued, now);
            job.status.worker_id = Some(worker_id.clone());
            w.assigned.insert(job_id.clone());
            info!("{job_id} dispatched to {worker_id} (queue estimates {qs:?})");
        }
    }

    fn on_status(&mut self, worker_id: &str, job_id: &str, state: JobState, reason: Option<String>) {
        let Some(job) = self.jobs.get_mut(job_id) else { return };
        if job.status.worker_id.as_deref() != Some(worker_id) || job.status.state.is_terminal() {
            debug!("stale STATUS {state} for {job_id} from {worker_id} ignored");
            return;
        }
        if state == JobState::Failed {
            job.status.reason = reason.or_else(|| Some("failed on worker".into()));
        }
        if let Err(e) = job.status.transition(state, unix_now()) {
            debug!("{e}; ignored");
            return;
        }
        if state.is_terminal() {
            if let Some(w) = self.workers.get_mut(worker_id) {
                w.assigned.remove(job_id);
            }
        }
    }

    fn on_result(&mut self, worker_id: &str, job_id: &str, record: PerfRecord) {
        let Some(job) = self.jobs.get_mut(job_id) else { return };
        if job.status.state.is_terminal() || job.status.worker_id.as_deref() != Some(worker_id) {
            debug!("duplicate or stale RESULT for {job_id} ignored");
            return;
        }
        let now = unix_now();
        if job.status.state == JobState::Running {
            let _ = job.status.transition(JobState::Collecting, now);
        }
        let failed = record.state == JobState::Failed;
        if failed {
            job.status.reason = record.failure.clone().or_else(|| Some("job failed".into()));
        }
        if let Some(db) = &self.perfdb {
            match db.append(&record) {
                Ok(()) | Err(CoreError::Duplicate { .. }) => {}
                Err(e) => warn!("storing record for {job_id}: {e}"),
            }
        }
        let target = if failed { JobState::Failed } else { JobState::Done };
        if let Err(e) = job.status.transition(target, now) {
            warn!("{e}");
        }
        if let Some(w) = self.workers.get_mut(worker_id) {
            w.assigned.remove(job_id);
        }
    }

    fn client(&mut self, msg: Message) -> Message {
        match msg {
            Message::Submit { spec_toml } => match parse_job_spec_with(&spec_toml, &self.cfg.catalog) {
                Ok(spec) => {
                    let job_id = new_job_id();
                    let status = JobStatus::new(job_id.clone(), &spec, unix_now());
                    info!("{job_id} submitted ({}, t_proc {:.3} s)", spec.job_name, spec.estimated_duration);
                    self.jobs.insert(job_id.clone(), JobEntry { status, spec, seq: self.next_seq });
                    self.next_seq += 1;
                    self.pending.push(job_id.clone());
                    Message::Submitted { job_id }
                }
                Err(e) => Message::Error { message: e.to_string() },
            },
            Message::Query { job_id: Some(id) } => match self.jobs.get(&id) {
                Some(j) => Message::JobInfo { jobs: vec![j.status.clone()] },
                None => Message::Error { message: format!("job not found: {id}") },
            },
            Message::Query { job_id: None } => {
                let mut jobs: Vec<&JobEntry> = self.jobs.values().collect();
                jobs.sort_by_key(|j| j.seq);
                Message::JobInfo { jobs: jobs.into_iter().map(|j| j.status.clone()).collect() }
            }
            other => Message::Error { message: format!("unexpected {}", other.kind()) },
        }
    }
}

fn new_job_id() -> String {
    let id = uuid::Uuid::new_v4().simple().to_string();
    format!("job-{}", &id[..12])
}
