use std::io::Write;
use std::time::Duration;

use servbench_cluster::client::{query, submit, wait_terminal};
use servbench_cluster::{Follower, FollowerConfig, Leader, LeaderConfig, SchedulerPolicy};
use servbench_core::spec::{JobState, JobStatus};

use crate::args::{Format, FollowerServeArgs, LeaderServeArgs, StatusArgs, SubmitArgs};
use crate::output::{print_json, read_file, CliError, CmdResult, Table};
use crate::Context;

fn seconds(name: &str, v: f64) -> CmdResult<Duration> {
    Duration::try_from_secs_f64(v)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| CliError::user(format!("--{name} must be a positive number of seconds")))
}

pub fn leader_serve(ctx: &Context, a: &LeaderServeArgs) -> CmdResult {
    let policy: SchedulerPolicy = a.policy.parse()?;
    let leader = Leader::start(LeaderConfig {
        bind: a.bind.clone(),
        policy,
        sched_interval: seconds("sched-interval", a.sched_interval)?,
        heartbeat_interval: seconds("heartbeat-interval", a.heartbeat_interval)?,
        missed_heartbeats: a.missed_heartbeats.max(1),
        min_workers: a.min_workers,
        perfdb: Some(ctx.perfdb.clone()),
        catalog: ctx.catalog.clone(),
    })?;
    println!("leader listening on {}", leader.addr());
    std::io::stdout().flush()?;
    leader.wait();
    Ok(())
}

pub fn follower_serve(ctx: &Context, a: &FollowerServeArgs) -> CmdResult {
    let worker_id = a.worker_id.clone().unwrap_or_else(|| format!("worker-{}", std::process::id()));
    let follower = Follower::start(FollowerConfig {
        leader: a.leader.clone(),
        worker_id,
        pace: a.pace,
        models: a.models.is_dir().then(|| a.models.clone()),
        catalog: ctx.catalog.clone(),
    })?;
    println!("follower {} connected to {}", follower.worker_id(), a.leader);
    std::io::stdout().flush()?;
    follower.wait();
    Ok(())
}

pub fn submit_jobs(ctx: &Context, a: &SubmitArgs) -> CmdResult {
    let mut ids = Vec::new();
    for path in &a.specs {
        let text = read_file(path)?;
        let id = submit(&a.leader, &text)?;
        ids.push((path.display().to_string(), id));
    }
    if a.wait {
        let job_ids: Vec<String> = ids.iter().map(|(_, id)| id.clone()).collect();
        let statuses = wait_terminal(&a.leader, &job_ids, Duration::from_secs_f64(a.timeout))?;
        return show_statuses(ctx, &statuses);
    }
    match ctx.format {
        Format::Json => {
            let v: Vec<_> = ids
                .iter()
                .map(|(file, id)| serde_json::json!({ "spec": file, "job_id": id }))
                .collect();
            print_json(&v)
        }
        Format::Table => {
            let mut t = Table::new(&["spec", "job_id"]);
            for (file, id) in ids {
                t.row(vec![file, id]);
            }
            t.print();
            Ok(())
        }
    }
}

pub fn status(ctx: &Context, a: &StatusArgs) -> CmdResult {
    let statuses = if a.wait {
        let ids: Vec<String> = match &a.job_id {
            Some(id) => vec![id.clone()],
            None => query(&a.leader, None)?.into_iter().map(|s| s.job_id).collect(),
        };
        wait_terminal(&a.leader, &ids, Duration::from_secs_f64(a.timeout))?
    } else {
        query(&a.leader, a.job_id.as_deref())?
    };
    show_statuses(ctx, &statuses)
}

fn show_statuses(ctx: &Context, statuses: &[JobStatus]) -> CmdResult {
    if ctx.format == Format::Json {
        return print_json(&statuses);
    }
    let mut t = Table::new(&["job_id", "name", "state", "worker", "jct_s", "reason"]);
    for s in statuses {
        t.row(vec![
            s.job_id.clone(),
            s.job_name.clone(),
            s.state.to_string(),
            s.worker_id.clone().unwrap_or_else(|| "-".into()),
            s.jct().map_or_else(|| "-".into(), |j| format!("{j:.3}")),
            s.reason.clone().unwrap_or_default(),
        ]);
    }
    t.print();
    let done: Vec<f64> = statuses.iter().filter(|s| s.state == JobState::Done).filter_map(JobStatus::jct).collect();
    if !done.is_empty() {
        println!("mean JCT over {} finished jobs: {:.3} s", done.len(), done.iter().sum::<f64>() / done.len() as f64);
    }
    Ok(())
}
