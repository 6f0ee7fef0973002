use serde::Serialize;
use servbench_cluster::sched::{compare_policies, SchedulerPolicy, TraceKind};
use servbench_cluster::trace::{parse_trace, random_trace, write_trace, JobArrivals, ProcDist};

use crate::args::{Format, SchedSimArgs};
use crate::output::{create_file, print_json, read_file, CliError, CmdResult, Table};
use crate::Context;

#[derive(Serialize)]
struct PolicyRow {
    policy: String,
    mean_jct: f64,
    total_jct: f64,
    makespan: f64,
    speedup: f64,
}

#[derive(Serialize)]
struct SimOutput {
    jobs: usize,
    workers: usize,
    interval: f64,
    baseline: String,
    policies: Vec<PolicyRow>,
}

pub fn sched_sim(ctx: &Context, a: &SchedSimArgs) -> CmdResult {
    let (jobs, workers) = match (&a.random, &a.trace) {
        (Some(r), _) => {
            let n: usize = r[0]
                .parse()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| CliError::user(format!("--random N must be a positive integer, got `{}`", r[0])))?;
            let k: usize = r[1]
                .parse()
                .ok()
                .filter(|k| *k > 0)
                .ok_or_else(|| CliError::user(format!("--random K must be a positive integer, got `{}`", r[1])))?;
            let dist: ProcDist = r[2].parse()?;
            let arrivals: JobArrivals = a.arrivals.parse()?;
            (random_trace(n, dist, arrivals, a.seed), k)
        }
        (None, Some(path)) => (parse_trace(&read_file(path)?)?, a.workers),
        (None, None) => return Err(CliError::user("give a trace file or --random N K DIST")),
    };
    if workers == 0 {
        return Err(CliError::user("--workers must be >= 1"));
    }
    let policies = a
        .policies
        .iter()
        .map(|p| p.parse::<SchedulerPolicy>())
        .collect::<Result<Vec<_>, _>>()?;
    if policies.is_empty() {
        return Err(CliError::user("no policies given"));
    }
    if let Some(path) = &a.write_trace {
        use std::io::Write;
        create_file(path)?.write_all(write_trace(&jobs).as_bytes())?;
    }

    let cmp = compare_policies(&jobs, workers, &policies, a.interval)?;

    if let Some(path) = &a.cdf {
        let mut w = csv::Writer::from_writer(create_file(path)?);
        w.write_record(["policy", "job_id", "jct", "fraction"])?;
        for r in &cmp.reports {
            let mut rows: Vec<(f64, &str)> = r.jobs.iter().map(|o| (o.jct(), o.job_id.as_str())).collect();
            rows.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.cmp(y.1)));
            let n = rows.len();
            for (i, (jct, id)) in rows.into_iter().enumerate() {
                w.write_record([r.policy.to_string(), id.to_string(), jct.to_string(), ((i + 1) as f64 / n as f64).to_string()])?;
            }
        }
        w.flush()?;
    }
    if let Some(path) = &a.events {
        let mut w = csv::Writer::from_writer(create_file(path)?);
        w.write_record(["policy", "t", "event", "job_id", "worker"])?;
        for r in &cmp.reports {
            for e in &r.trace {
                let kind = match e.kind {
                    TraceKind::Submit => "submit",
                    TraceKind::Place => "place",
                    TraceKind::Start => "start",
                    TraceKind::Complete => "complete",
                };
                w.write_record([
                    r.policy.to_string(),
                    e.t.to_string(),
                    kind.to_string(),
                    e.job_id.clone(),
                    e.worker.map_or_else(String::new, |w| w.to_string()),
                ])?;
            }
        }
        w.flush()?;
    }

    let out = SimOutput {
        jobs: jobs.len(),
        workers,
        interval: a.interval,
        baseline: policies[0].to_string(),
        policies: cmp
            .reports
            .iter()
            .zip(&cmp.speedups)
            .map(|(r, s)| PolicyRow {
                policy: r.policy.to_string(),
                mean_jct: r.mean_jct,
                total_jct: r.total_jct,
                makespan: r.makespan,
                speedup: *s,
            })
            .collect(),
    };
    if ctx.format == Format::Json {
        return print_json(&out);
    }
    println!("{} jobs on {} workers, scheduling interval {} s", out.jobs, out.workers, out.interval);
    let mut t = Table::new(&["policy", "mean_jct_s", "total_jct_s", "makespan_s", &format!("speedup_vs_{}", out.baseline)]);
    for p in &out.policies {
        t.row(vec![
            p.policy.clone(),
            format!("{:.3}", p.mean_jct),
            format!("{:.3}", p.total_jct),
            format!("{:.3}", p.makespan),
            format!("{:.4}", p.speedup),
        ]);
    }
    t.print();
    Ok(())
}
