use proptest::prelude::*;
use servbench_cluster::sched::{compare_policies, schedule_simulate, Job, SchedulerPolicy, SimReport, TraceKind};
use servbench_cluster::trace::{parse_trace, random_trace, write_trace, JobArrivals, ProcDist};

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Minimum total completion time over every service order on one worker.
fn brute_force_total(t: &[f64]) -> f64 {
    permutations(t.len())
        .into_iter()
        .map(|order| {
            let mut clock = 0.0;
            order
                .iter()
                .map(|&i| {
                    clock += t[i];
                    clock
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

fn assert_consistent(report: &SimReport, jobs: &[Job]) {
    for (o, j) in report.jobs.iter().zip(jobs) {
        assert_eq!(o.job_id, j.job_id);
        assert!(o.start_time >= j.submit_time);
        assert_eq!(o.completion_time, o.start_time + j.t_proc);
        assert!((o.jct() - (o.waiting() + j.t_proc)).abs() < 1e-9);
    }
    // One running job per worker.
    for w in 0..report.workers {
        let mut spans: Vec<(f64, f64)> = report
            .jobs
            .iter()
            .filter(|o| o.worker == w)
            .map(|o| (o.start_time, o.completion_time))
            .collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        for pair in spans.windows(2) {
            assert!(pair[1].0 >= pair[0].1, "overlap on worker {w}: {pair:?}");
        }
    }
    let total: f64 = report.jobs.iter().map(|o| o.jct()).sum();
    assert!((report.total_jct - total).abs() < 1e-9);
    let starts = report.trace.iter().filter(|e| e.kind == TraceKind::Start).count();
    let completes = report.trace.iter().filter(|e| e.kind == TraceKind::Complete).count();
    assert_eq!((starts, completes), (jobs.len(), jobs.len()));
}

fn job_set() -> impl Strategy<Value = Vec<Job>> {
    prop::collection::vec(1u32..100, 1..=8).prop_map(|ts| {
        ts.into_iter()
            .enumerate()
            .map(|(i, t)| Job::new(format!("j{i}"), t as f64, 0.0))
            .collect()
    })
}

fn open_trace() -> impl Strategy<Value = (Vec<Job>, usize)> {
    (prop::collection::vec((0u32..400, 1u32..120), 1..60), 1usize..6).prop_map(|(raw, k)| {
        let jobs = raw
            .into_iter()
            .enumerate()
            .map(|(i, (submit, t))| Job::new(format!("j{i:02}"), t as f64, submit as f64 * 0.5))
            .collect();
        (jobs, k)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sjf_matches_brute_force(jobs in job_set()) {
        let t: Vec<f64> = jobs.iter().map(|j| j.t_proc).collect();
        let r = schedule_simulate(&jobs, 1, SchedulerPolicy::QA_SJF, 0.0).unwrap();
        prop_assert_eq!(r.total_jct, brute_force_total(&t));
        let rr = schedule_simulate(&jobs, 1, SchedulerPolicy::RR_SJF, 1.0).unwrap();
        prop_assert_eq!(rr.total_jct, r.total_jct);
    }

    #[test]
    fn simulation_is_consistent((jobs, k) in open_trace()) {
        for p in SchedulerPolicy::STUDIED {
            for interval in [0.0, 1.0] {
                let r = schedule_simulate(&jobs, k, p, interval).unwrap();
                assert_consistent(&r, &jobs);
                prop_assert_eq!(&r, &schedule_simulate(&jobs, k, p, interval).unwrap());
            }
        }
    }

    #[test]
    fn queue_aware_is_work_conserving((jobs, k) in open_trace()) {
        for interval in [0.0, 1.0] {
            let r = schedule_simulate(&jobs, k, SchedulerPolicy::QA_SJF, interval).unwrap();
            prop_assert_eq!(r.idle_with_backlog, 0);
        }
    }

    #[test]
    fn trace_files_replay(seed in 0u64..1000) {
        let jobs = random_trace(30, ProcDist::Pareto { alpha: 1.5, xm: 5.0 }, JobArrivals::Poisson { rate: 0.2 }, seed);
        let back = parse_trace(&write_trace(&jobs)).unwrap();
        let a = schedule_simulate(&jobs, 3, SchedulerPolicy::QA_SJF, 1.0).unwrap();
        let b = schedule_simulate(&back, 3, SchedulerPolicy::QA_SJF, 1.0).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn round_robin_can_idle_a_worker() {
    // Two long jobs land on one worker under RR with k = 2 when a short one sits between them.
    let jobs = vec![Job::new("a", 10.0, 0.0), Job::new("b", 1.0, 0.0), Job::new("c", 10.0, 0.0)];
    let r = schedule_simulate(&jobs, 2, SchedulerPolicy::RR_FCFS, 1.0).unwrap();
    assert!(r.idle_with_backlog > 0);
    let qa = schedule_simulate(&jobs, 2, SchedulerPolicy::QA_SJF, 1.0).unwrap();
    assert_eq!(qa.idle_with_backlog, 0);
    assert!(qa.mean_jct < r.mean_jct);
}

#[test]
fn queue_aware_beats_baseline_on_paired_traces() {
    let mut log_sum = 0.0;
    for seed in 1..=100 {
        let jobs = random_trace(100, "exp:60".parse().unwrap(), "poisson:0.05".parse().unwrap(), seed);
        let c = compare_policies(&jobs, 4, &SchedulerPolicy::STUDIED, 1.0).unwrap();
        assert!(c.speedups[2] >= 1.0, "seed {seed}: {:?}", c.speedups);
        log_sum += c.speedups[2].ln();
    }
    assert!((log_sum / 100.0).exp() > 1.2);
}
