//! Two-tier job scheduling: placement across workers, then per-worker
//! queue ordering, plus a discrete-event simulator over job traces.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ClusterError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadBalance {
    RoundRobin,
    QueueAware,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueOrder {
    Fcfs,
    Sjf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchedulerPolicy {
    pub lb: LoadBalance,
    pub order: QueueOrder,
}

impl SchedulerPolicy {
    pub const RR_FCFS: Self = Self { lb: LoadBalance::RoundRobin, order: QueueOrder::Fcfs };
    pub const RR_SJF: Self = Self { lb: LoadBalance::RoundRobin, order: QueueOrder::Sjf };
    pub const QA_SJF: Self = Self { lb: LoadBalance::QueueAware, order: QueueOrder::Sjf };
    pub const QA_FCFS: Self = Self { lb: LoadBalance::QueueAware, order: QueueOrder::Fcfs };

    /// The baseline first; speedups are reported against it.
    pub const STUDIED: [Self; 3] = [Self::RR_FCFS, Self::RR_SJF, Self::QA_SJF];
}

impl Default for SchedulerPolicy {
    fn default() -> Self {
        Self::QA_SJF
    }
}

impl fmt::Display for SchedulerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lb = match self.lb {
            LoadBalance::RoundRobin => "rr",
            LoadBalance::QueueAware => "qa",
        };
        let order = match self.order {
            QueueOrder::Fcfs => "fcfs",
            QueueOrder::Sjf => "sjf",
        };
        write!(f, "{lb}+{order}")
    }
}

impl FromStr for SchedulerPolicy {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (lb, order) = lower
            .split_once('+')
            .ok_or_else(|| ClusterError::User(format!("policy `{s}` must look like qa+sjf")))?;
        let lb = match lb {
            "rr" | "round_robin" | "round-robin" => LoadBalance::RoundRobin,
            "qa" | "queue_aware" | "queue-aware" => LoadBalance::QueueAware,
            other => return Err(ClusterError::User(format!("unknown load balancer `{other}`"))),
        };
        let order = match order {
            "fcfs" => QueueOrder::Fcfs,
            "sjf" => QueueOrder::Sjf,
            other => return Err(ClusterError::User(format!("unknown queue order `{other}`"))),
        };
        Ok(Self { lb, order })
    }
}

/// Scheduler view of a benchmark job. Times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub job_id: String,
    pub t_proc: f64,
    pub submit_time: f64,
}

impl Job {
    pub fn new(job_id: impl Into<String>, t_proc: f64, submit_time: f64) -> Self {
        Self { job_id: job_id.into(), t_proc, submit_time }
    }
}

/// Round-robin cursor. Survives across placements.
#[derive(Debug, Clone, Default)]
pub struct RoundRobin {
    next: usize,
}

impl RoundRobin {
    pub fn pick(&mut self, n: usize) -> usize {
        let i = self.next % n;
        self.next = (i + 1) % n;
        i
    }
}

/// Picks a worker index for one job. `queue_seconds` is indexed by worker
/// in ascending worker-id order, so the lowest index wins ties.
pub fn place_job(queue_seconds: &[f64], lb: LoadBalance, rr: &mut RoundRobin) -> Option<usize> {
    if queue_seconds.is_empty() {
        return None;
    }
    Some(match lb {
        LoadBalance::RoundRobin => rr.pick(queue_seconds.len()),
        LoadBalance::QueueAware => {
            let mut best = 0;
            for (i, q) in queue_seconds.iter().enumerate().skip(1) {
                if *q < queue_seconds[best] {
                    best = i;
                }
            }
            best
        }
    })
}

/// Key used by queue ordering: anything with a processing time, submit time and id.
pub trait Queued {
    fn t_proc(&self) -> f64;
    fn submit_time(&self) -> f64;
    fn job_id(&self) -> &str;
}

impl Queued for Job {
    fn t_proc(&self) -> f64 {
        self.t_proc
    }
    fn submit_time(&self) -> f64 {
        self.submit_time
    }
    fn job_id(&self) -> &str {
        &self.job_id
    }
}

fn fcfs_cmp<T: Queued>(a: &T, b: &T) -> Ordering {
    a.submit_time()
        .total_cmp(&b.submit_time())
        .then_with(|| a.job_id().cmp(b.job_id()))
}

/// Reorders unstarted jobs in place. Stable, with deterministic ties.
pub fn order_queue<T: Queued>(queue: &mut [T], order: QueueOrder) {
    match order {
        QueueOrder::Fcfs => queue.sort_by(fcfs_cmp),
        QueueOrder::Sjf => queue.sort_by(|a, b| a.t_proc().total_cmp(&b.t_proc()).then_with(|| fcfs_cmp(a, b))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Submit,
    Place,
    Start,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: f64,
    pub kind: TraceKind,
    pub job_id: String,
    pub worker: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobOutcome {
    pub job_id: String,
    pub worker: usize,
    pub submit_time: f64,
    pub start_time: f64,
    pub completion_time: f64,
    pub t_proc: f64,
}

impl JobOutcome {
    pub fn jct(&self) -> f64 {
        self.completion_time - self.submit_time
    }

    pub fn waiting(&self) -> f64 {
        self.start_time - self.submit_time
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub policy: SchedulerPolicy,
    pub workers: usize,
    pub interval: f64,
    pub total_jct: f64,
    pub mean_jct: f64,
    pub makespan: f64,
    /// In input order.
    pub jobs: Vec<JobOutcome>,
    pub trace: Vec<TraceEvent>,
    /// Scheduling boundaries at which some worker sat idle while another
    /// held an unstarted job.
    pub idle_with_backlog: u64,
}

impl SimReport {
    pub fn jcts(&self) -> Vec<f64> {
        self.jobs.iter().map(JobOutcome::jct).collect()
    }
}

struct SimWorker {
    queue: Vec<usize>,
    running: Option<(usize, f64)>,
}

impl SimWorker {
    fn queue_seconds(&self, jobs: &[Job], now: f64) -> f64 {
        let running = self.running.map_or(0.0, |(_, end)| (end - now).max(0.0));
        running + self.queue.iter().map(|&j| jobs[j].t_proc).sum::<f64>()
    }
}

/// Non-preemptive discrete-event simulation of `jobs` on `k` workers.
///
/// Pending jobs are placed at multiples of `interval` seconds (or on
/// arrival when `interval` is 0) in submit order. Each worker reorders its
/// own unstarted jobs whenever it is about to start one.
pub fn schedule_simulate(jobs: &[Job], k: usize, policy: SchedulerPolicy, interval: f64) -> Result<SimReport> {
    if k == 0 {
        return Err(ClusterError::User("at least one worker is required".into()));
    }
    if !(interval >= 0.0 && interval.is_finite()) {
        return Err(ClusterError::User("scheduling interval must be finite and >= 0".into()));
    }
    for j in jobs {
        if !(j.t_proc >= 0.0 && j.t_proc.is_finite() && j.submit_time >= 0.0 && j.submit_time.is_finite()) {
            return Err(ClusterError::User(format!("job {} has invalid times", j.job_id)));
        }
    }

    let mut arrival_order: Vec<usize> = (0..jobs.len()).collect();
    arrival_order.sort_by(|&a, &b| fcfs_cmp(&jobs[a], &jobs[b]));

    let mut workers: Vec<SimWorker> = (0..k).map(|_| SimWorker { queue: Vec::new(), running: None }).collect();
    let mut rr = RoundRobin::default();
    let mut pending: Vec<usize> = Vec::new();
    let mut outcomes: Vec<Option<JobOutcome>> = vec![None; jobs.len()];
    let mut trace = Vec::new();
    let mut next_arrival = 0usize;
    let mut boundary_k: u64 = 0;
    let mut idle_with_backlog = 0u64;
    let mut done = 0usize;
    let mut now = 0.0f64;

    while done < jobs.len() {
        let t_arrival = arrival_order.get(next_arrival).map(|&j| jobs[j].submit_time);
        let t_complete = workers.iter().filter_map(|w| w.running.map(|(_, end)| end)).min_by(f64::total_cmp);
        let t_boundary = if interval > 0.0 && !pending.is_empty() {
            Some(boundary_k as f64 * interval)
        } else {
            None
        };
        let Some(t) = [t_arrival, t_complete, t_boundary].into_iter().flatten().min_by(f64::total_cmp) else {
            break;
        };
        now = t.max(now);

        for (w, worker) in workers.iter_mut().enumerate() {
            if let Some((j, end)) = worker.running {
                if end <= now {
                    worker.running = None;
                    done += 1;
                    trace.push(TraceEvent { t: end, kind: TraceKind::Complete, job_id: jobs[j].job_id.clone(), worker: Some(w) });
                }
            }
        }

        while let Some(&j) = arrival_order.get(next_arrival) {
            if jobs[j].submit_time > now {
                break;
            }
            pending.push(j);
            next_arrival += 1;
            trace.push(TraceEvent { t: jobs[j].submit_time, kind: TraceKind::Submit, job_id: jobs[j].job_id.clone(), worker: None });
        }

        let at_boundary = if interval > 0.0 {
            while (boundary_k as f64) * interval < now {
                boundary_k += 1;
            }
            (boundary_k as f64) * interval == now
        } else {
            true
        };

        if at_boundary {
            for j in pending.drain(..) {
                let qs: Vec<f64> = workers.iter().map(|w| w.queue_seconds(jobs, now)).collect();
                let w = place_job(&qs, policy.lb, &mut rr).expect("k >= 1");
                workers[w].queue.push(j);
                trace.push(TraceEvent { t: now, kind: TraceKind::Place, job_id: jobs[j].job_id.clone(), worker: Some(w) });
            }
        }

        for (w, worker) in workers.iter_mut().enumerate() {
            if worker.running.is_some() || worker.queue.is_empty() {
                continue;
            }
            let mut view: Vec<&Job> = worker.queue.iter().map(|&j| &jobs[j]).collect();
            order_queue(&mut view, policy.order);
            let first = view[0].job_id.clone();
            let pos = worker.queue.iter().position(|&j| jobs[j].job_id == first).expect("present");
            let j = worker.queue.remove(pos);
            let end = now + jobs[j].t_proc;
            worker.running = Some((j, end));
            outcomes[j] = Some(JobOutcome {
                job_id: jobs[j].job_id.clone(),
                worker: w,
                submit_time: jobs[j].submit_time,
                start_time: now,
                completion_time: end,
                t_proc: jobs[j].t_proc,
            });
            trace.push(TraceEvent { t: now, kind: TraceKind::Start, job_id: jobs[j].job_id.clone(), worker: Some(w) });
        }

        if at_boundary {
            let idle = workers.iter().any(|w| w.running.is_none());
            let backlog = workers.iter().any(|w| !w.queue.is_empty());
            if idle && backlog {
                idle_with_backlog += 1;
            }
            if interval > 0.0 {
                boundary_k += 1;
            }
        }
    }

    let jobs_out: Vec<JobOutcome> = outcomes.into_iter().map(|o| o.expect("every job completes")).collect();
    let total_jct: f64 = jobs_out.iter().map(JobOutcome::jct).sum();
    let makespan = jobs_out.iter().map(|o| o.completion_time).fold(0.0, f64::max);
    let mean_jct = if jobs_out.is_empty() { 0.0 } else { total_jct / jobs_out.len() as f64 };
    Ok(SimReport {
        policy,
        workers: k,
        interval,
        total_jct,
        mean_jct,
        makespan,
        jobs: jobs_out,
        trace,
        idle_with_backlog,
    })
}

impl<T: Queued + ?Sized> Queued for &T {
    fn t_proc(&self) -> f64 {
        (**self).t_proc()
    }
    fn submit_time(&self) -> f64 {
        (**self).submit_time()
    }
    fn job_id(&self) -> &str {
        (**self).job_id()
    }
}

/// Policy comparison on one trace: one report per policy and the mean-JCT
/// speedup of each over the first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub reports: Vec<SimReport>,
    pub speedups: Vec<f64>,
}

pub fn compare_policies(jobs: &[Job], k: usize, policies: &[SchedulerPolicy], interval: f64) -> Result<Comparison> {
    let reports = policies
        .iter()
        .map(|p| schedule_simulate(jobs, k, *p, interval))
        .collect::<Result<Vec<_>>>()?;
    let base = reports.first().map_or(0.0, |r| r.mean_jct);
    let speedups = reports
        .iter()
        .map(|r| if r.mean_jct > 0.0 { base / r.mean_jct } else { 1.0 })
        .collect();
    Ok(Comparison { reports, speedups })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> Vec<Job> {
        vec![Job::new("a", 3.0, 0.0), Job::new("b", 1.0, 0.0), Job::new("c", 2.0, 0.0)]
    }

    #[test]
    fn queue_aware_picks_argmin_with_low_id_ties() {
        let mut rr = RoundRobin::default();
        assert_eq!(place_job(&[5.0, 2.0, 7.0], LoadBalance::QueueAware, &mut rr), Some(1));
        assert_eq!(place_job(&[3.0, 3.0], LoadBalance::QueueAware, &mut rr), Some(0));
        assert_eq!(place_job(&[], LoadBalance::QueueAware, &mut rr), None);
    }

    #[test]
    fn round_robin_cycles() {
        let mut rr = RoundRobin::default();
        let picks: Vec<_> = (0..4).map(|_| place_job(&[0.0; 3], LoadBalance::RoundRobin, &mut rr).unwrap()).collect();
        assert_eq!(picks, vec![0, 1, 2, 0]);
    }

    #[test]
    fn sjf_ties_by_submit_then_id() {
        let mut q = vec![Job::new("z", 2.0, 1.0), Job::new("y", 2.0, 0.0), Job::new("x", 2.0, 0.0), Job::new("w", 1.0, 5.0)];
        order_queue(&mut q, QueueOrder::Sjf);
        let ids: Vec<_> = q.iter().map(|j| j.job_id.as_str()).collect();
        assert_eq!(ids, vec!["w", "x", "y", "z"]);
        order_queue(&mut q, QueueOrder::Fcfs);
        let ids: Vec<_> = q.iter().map(|j| j.job_id.as_str()).collect();
        assert_eq!(ids, vec!["x", "y", "z", "w"]);
    }

    #[test]
    fn three_job_example() {
        let sjf = schedule_simulate(&three(), 1, SchedulerPolicy::QA_SJF, 0.0).unwrap();
        let mut done: Vec<f64> = sjf.jobs.iter().map(|o| o.completion_time).collect();
        done.sort_by(f64::total_cmp);
        assert_eq!(done, vec![1.0, 3.0, 6.0]);
        assert_eq!(sjf.total_jct, 10.0);

        let fcfs = schedule_simulate(&three(), 1, SchedulerPolicy::QA_FCFS, 0.0).unwrap();
        let done: Vec<f64> = fcfs.jobs.iter().map(|o| o.completion_time).collect();
        assert_eq!(done, vec![3.0, 4.0, 6.0]);
        assert_eq!(fcfs.total_jct, 13.0);
        assert!((fcfs.mean_jct / sjf.mean_jct - 1.3).abs() < 1e-12);
    }

    #[test]
    fn single_job() {
        let jobs = [Job::new("only", 5.0, 0.0)];
        for p in SchedulerPolicy::STUDIED {
            let r = schedule_simulate(&jobs, 1, p, 1.0).unwrap();
            assert_eq!(r.mean_jct, 5.0);
        }
    }

    #[test]
    fn placement_waits_for_boundary() {
        let jobs = [Job::new("a", 1.0, 0.25)];
        let r = schedule_simulate(&jobs, 2, SchedulerPolicy::QA_SJF, 1.0).unwrap();
        assert_eq!(r.jobs[0].start_time, 1.0);
        assert_eq!(r.jobs[0].jct(), 1.75);
    }

    #[test]
    fn policy_round_trip() {
        for p in [SchedulerPolicy::RR_FCFS, SchedulerPolicy::RR_SJF, SchedulerPolicy::QA_SJF, SchedulerPolicy::QA_FCFS] {
            assert_eq!(p.to_string().parse::<SchedulerPolicy>().unwrap(), p);
        }
        assert!("qa".parse::<SchedulerPolicy>().is_err());
        assert!("lifo+sjf".parse::<SchedulerPolicy>().is_err());
    }
}
