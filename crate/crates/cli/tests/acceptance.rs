#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Acceptance runner. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitCode, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use servbench_cluster::client::{query, submit, wait_terminal};
use servbench_cluster::sched::{schedule_simulate, Job, SchedulerPolicy};
use servbench_core::analysis::{roofline_attainable, roofline_points, Bound};
use servbench_core::catalog::{Catalog, Precision};
use servbench_core::harness::{execute, execute_with_records, replay, JobInputs, LatencyDigest, PerfRecord, Stage};
use servbench_core::modelgen::{BlockKind, GeneratorParams};
use servbench_core::spec::{
    BackendKind, BatchingMode, BatchingSpec, DigestKind, JobSpec, JobState, ModelSource, NetworkSpec,
};
use servbench_core::workload::{gen_arrivals, PayloadSpec, WorkloadSpec};

type Check = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_servbench"));
    c.env_remove("RUST_LOG");
    c
}

fn bin_json(args: &[&str]) -> Result<Value, String> {
    let out = bin().arg("--format").arg("json").args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("servbench {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())
}

fn speedup_of(v: &Value, policy: &str) -> Result<f64, String> {
    v["policies"]
        .as_array()
        .and_then(|ps| ps.iter().find(|p| p["policy"] == policy))
        .and_then(|p| p["speedup"].as_f64())
        .ok_or_else(|| format!("no {policy} row in {v}"))
}

fn run(spec: &JobSpec) -> PerfRecord {
    run_with(spec, &Catalog::bundled())
}

fn run_with(spec: &JobSpec, catalog: &Catalog) -> PerfRecord {
    execute("acc", &JobInputs::resolve(spec, catalog, None).unwrap()).unwrap()
}

fn fc(layers: u32, width: u32) -> ModelSource {
    ModelSource::Generate(GeneratorParams::new(BlockKind::Fc, layers, width).with_input(vec![width]))
}

fn ac1_scheduler_case_study() -> Check {
    let start = Instant::now();
    let mut speedups = Vec::new();
    for seed in 1..=20 {
        let seed = seed.to_string();
        let v = bin_json(&[
            "sched-sim", "--random", "100", "4", "exp:60", "--arrivals", "poisson:0.05", "--seed", &seed, "--policies",
            "rr+fcfs,qa+sjf",
        ])?;
        speedups.push(speedup_of(&v, "qa+sjf")?);
    }
    let trace = repo("traces/pareto-a1.5.csv");
    let v = bin_json(&["sched-sim", trace.to_str().unwrap(), "--workers", "4", "--policies", "rr+fcfs,qa+sjf"])?;
    let heavy = speedup_of(&v, "qa+sjf")?;
    let elapsed = start.elapsed().as_secs_f64();

    let worst = speedups.iter().copied().fold(f64::INFINITY, f64::min);
    let geomean = (speedups.iter().map(|s| s.ln()).sum::<f64>() / speedups.len() as f64).exp();
    let detail = format!("min {worst:.3}, geomean {geomean:.3}, pareto trace {heavy:.3}, {elapsed:.2} s");
    ensure!(worst >= 1.0, "a paired trace regressed: {detail}");
    ensure!(geomean >= 1.2, "geomean below 1.2: {detail}");
    ensure!(heavy >= 1.4, "heavy-tailed trace below 1.4: {detail}");
    ensure!(elapsed < 5.0, "too slow: {detail}");
    Ok(detail)
}

fn brute_force_total(t: &[f64]) -> f64 {
    fn go(rest: &mut Vec<f64>, clock: f64, acc: f64, best: &mut f64) {
        if rest.is_empty() {
            *best = best.min(acc);
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            let done = clock + x;
            go(rest, done, acc + done, best);
            rest.insert(i, x);
        }
    }
    let mut best = f64::INFINITY;
    go(&mut t.to_vec(), 0.0, 0.0, &mut best);
    best
}

fn ac2_sjf_optimality() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let n = rng.random_range(1..=8usize);
        // Multiples of 1/8 keep every partial sum exact.
        let t: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(1..=800u32)) / 8.0).collect();
        let jobs: Vec<Job> = t.iter().enumerate().map(|(i, &p)| Job::new(format!("j{i}"), p, 0.0)).collect();
        let report = schedule_simulate(&jobs, 1, SchedulerPolicy::QA_SJF, 0.0).map_err(|e| e.to_string())?;
        let oracle = brute_force_total(&t);
        ensure!(report.total_jct == oracle, "case {case}: simulated {} vs brute force {oracle} for {t:?}", report.total_jct);
        ensure!(report.mean_jct == oracle / n as f64, "case {case}: mean JCT mismatch");
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(elapsed < 10.0, "took {elapsed:.2} s");
    Ok(format!("200 job sets, n <= 8, {elapsed:.2} s"))
}

fn ac3_poisson_generator() -> Check {
    let start = Instant::now();
    let w = WorkloadSpec::poisson(30.0, 10_000, 17);
    let a = gen_arrivals(&w).map_err(|e| e.to_string())?;
    let b = gen_arrivals(&w).map_err(|e| e.to_string())?;
    ensure!(a == b, "same seed produced different schedules");
    ensure!(a.len() == 10_000, "{} arrivals", a.len());
    let mut gaps = Vec::with_capacity(a.len());
    let mut prev = 0.0;
    for &t in &a.offsets {
        gaps.push(t - prev);
        prev = t;
    }
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let sd = (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let rate = n / prev;
    let cv = sd / mean;
    let elapsed = start.elapsed().as_secs_f64();
    let detail = format!("rate {rate:.3}/s, CV {cv:.4}, {elapsed:.3} s");
    ensure!((rate - 30.0).abs() <= 0.05 * 30.0, "rate off: {detail}");
    ensure!((0.95..=1.05).contains(&cv), "CV off: {detail}");
    ensure!(elapsed < 1.0, "too slow: {detail}");
    Ok(detail)
}

fn ac4_roofline_exactness() -> Check {
    let cat = Catalog::bundled();
    let v100 = cat.resolve("G1").map_err(|e| e.to_string())?;
    let t4 = cat.resolve("G3").map_err(|e| e.to_string())?;
    let r1 = v100.ridge_point(Precision::Fp32);
    let r3 = t4.ridge_point(Precision::Fp32);
    let want1 = 15.7 / 0.9;
    ensure!((r1 - want1).abs() / want1 <= 1e-9, "V100 ridge {r1} vs {want1}");
    ensure!((r3 - 27.0).abs() / 27.0 <= 1e-9, "T4 ridge {r3}");

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for h in cat.profiles() {
        for p in [Precision::Fp32, Precision::Fp16] {
            let peak = h.peak_flops(p);
            let mut last = 0.0;
            let mut xs: Vec<f64> = (0..500).map(|_| 10f64.powf(rng.random_range(-3.0..4.0))).collect();
            xs.sort_by(f64::total_cmp);
            for i in xs {
                let got = roofline_attainable(h, i, p);
                let want = peak.min(h.mem_bandwidth * i);
                ensure!((got - want).abs() <= 1e-12 * want, "{} I={i}: {got} vs {want}", h.id);
                ensure!(got >= last && got <= peak, "{} not monotone/capped at I={i}", h.id);
                last = got;
            }
        }
    }
    Ok(format!("V100 {r1:.6}, T4 {r3:.6} FLOP/byte"))
}

fn ac5_sim_self_consistency() -> Check {
    let start = Instant::now();
    let mut records = Vec::new();
    for k in 0..=9 {
        let b = 1u32 << k;
        let mut spec = JobSpec::new(format!("b{b}"), fc(4, 1024), WorkloadSpec::closed_loop(b, 4 * u64::from(b)));
        spec.backend.hardware_id = Some("G1".into());
        spec.backend.batching.batch_size = b;
        spec.backend.sim.fixed_overhead = 0.0;
        let mut r = run(&spec);
        r.job_id = format!("b{b:03}");
        records.push(r);
    }
    let (points, warnings) = roofline_points(&records);
    ensure!(warnings.is_empty(), "{warnings:?}");
    let cfg = records[0].env_log.sim_config.clone().ok_or("no sim config")?;
    let mut worst = 0f64;
    for p in &points {
        let roof = (cfg.compute_efficiency * 15.7e12).min(cfg.mem_efficiency * 900e9 * p.intensity);
        worst = worst.max((p.achieved - roof).abs() / roof);
    }
    ensure!(worst <= 1e-6, "max relative deviation {worst:e}");

    let m = &cfg.model;
    let (pc, bw) = (cfg.compute_efficiency * 15.7e12, cfg.mem_efficiency * 900e9);
    // b·f/P' = (W + b·a)/B'  =>  b* = W / (f·B'/P' − a)
    let b_star = m.weight_bytes as f64 / (m.flops_per_sample as f64 * bw / pc - m.activation_bytes_per_sample as f64);
    let first_compute = points
        .iter()
        .find(|p| p.bound == Bound::Compute)
        .map(|p| p.batch)
        .ok_or("never compute-bound")?;
    ensure!(points.iter().any(|p| p.bound == Bound::Memory), "never memory-bound");
    ensure!(
        first_compute >= b_star && first_compute / 2.0 < b_star,
        "scan flips at b={first_compute}, closed form b*={b_star:.3}"
    );
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(elapsed < 5.0, "took {elapsed:.2} s");
    Ok(format!("max deviation {worst:.1e}, b* {b_star:.2}, scan flips at {first_compute}, {elapsed:.2} s"))
}

fn non_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0])
}

fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

const PRICED_G1: &str = r#"
schema_version = 1
[[hardware]]
id = "G1"
name = "Tesla V100 (Volta)"
peak_flops_fp32 = 15.7e12
peak_flops_fp16 = 31.4e12
mem_bandwidth = 900e9
mem_capacity = 32_000_000_000
tdp_power = 300.0
[[hardware.cloud_offers]]
provider_label = "P1"
instance_label = "gpu-1x"
hourly_rate = 3.06
"#;

fn ac6_qualitative_shapes() -> Check {
    let start = Instant::now();
    let batches = [1u32, 2, 4, 8, 16, 32];
    let model = || fc(4, 1024);

    // (a) static batching at a fixed arrival rate
    let p99: Vec<f64> = batches
        .iter()
        .map(|&b| {
            let mut s = JobSpec::new("a", model(), WorkloadSpec::poisson(30.0, 2000, 3));
            s.backend.batching.batch_size = b;
            run(&s).percentile(0.99).unwrap()
        })
        .collect();
    ensure!(non_decreasing(&p99), "(a) p99 vs batch {p99:?}");

    // (b) closed loop, dynamic batching, C = 64 >= B_max
    let tput: Vec<f64> = batches
        .iter()
        .map(|&b| {
            let mut s = JobSpec::new("b", model(), WorkloadSpec::closed_loop(64, 3000));
            s.backend.batching = BatchingSpec { mode: BatchingMode::Dynamic, batch_size: b, max_queue_delay: Some(0.002) };
            run(&s).throughput
        })
        .collect();
    ensure!(non_decreasing(&tput), "(b) throughput vs B_max {tput:?}");

    // (c) cloud cost per request
    let priced = Catalog::bundled().merged_with(Catalog::parse(PRICED_G1).map_err(|e| e.to_string())?);
    let (mut tp, mut cost) = (Vec::new(), Vec::new());
    for &b in &batches {
        let mut s = JobSpec::new("c", model(), WorkloadSpec::closed_loop(b, 64 * u64::from(b)));
        s.backend.batching.batch_size = b;
        let r = run_with(&s, &priced);
        tp.push(r.throughput);
        cost.push(r.costs.cloud_cost_per_req().ok_or("no cloud cost")?);
    }
    ensure!(non_decreasing(&tp), "(c) precondition: throughput {tp:?}");
    ensure!(non_increasing(&cost), "(c) cost per request {cost:?}");

    // (d) network presets
    let e2e = |net: NetworkSpec| {
        let mut s = JobSpec::new("d", model(), WorkloadSpec::constant(20.0, 200));
        s.backend.network = net;
        run(&s).summary.unwrap().mean
    };
    let (lan, wifi, lte) = (e2e(NetworkSpec::Lan), e2e(NetworkSpec::Wifi), e2e(NetworkSpec::Lte));
    ensure!(lte > wifi && wifi > lan, "(d) lan {lan} wifi {wifi} lte {lte}");

    // (e) inference share of end-to-end time
    let share = |b: u32| {
        let mut s = JobSpec::new("e", model(), WorkloadSpec::closed_loop(b, 32 * u64::from(b)));
        s.backend.batching.batch_size = b;
        run(&s).stages.iter().find(|st| st.stage == Stage::Inference).unwrap().fraction
    };
    let (s1, s32) = (share(1), share(32));
    ensure!(s32 > s1, "(e) inference fraction b1 {s1} b32 {s32}");

    let elapsed = start.elapsed().as_secs_f64();
    ensure!(elapsed < 30.0, "took {elapsed:.2} s");
    Ok(format!(
        "p99 {:.1}->{:.1} ms, tput {:.0}->{:.0}/s, cost x{:.3}, lte/wifi/lan {:.1}/{:.1}/{:.1} ms, infer {s1:.3}->{s32:.3}, {elapsed:.2} s",
        p99[0] * 1e3,
        p99[5] * 1e3,
        tput[0],
        tput[5],
        cost[5] / cost[0],
        lte * 1e3,
        wifi * 1e3,
        lan * 1e3,
    ))
}

/// Serves HTTP on an ephemeral port. Every third request gets a 500 and
/// every seventh connection is dropped without a response.
fn faulty_server() -> String {
    let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
    let port = server.server_addr().to_ip().unwrap().port();
    let counter = Arc::new(AtomicU64::new(0));
    for _ in 0..4 {
        let server = Arc::clone(&server);
        let counter = Arc::clone(&counter);
        thread::spawn(move || {
            for mut req in server.incoming_requests() {
                let mut body = Vec::new();
                let _ = req.as_reader().read_to_end(&mut body);
                let n = counter.fetch_add(1, Ordering::SeqCst) + 1;
                if n.is_multiple_of(7) {
                    drop(req.into_writer());
                } else if n.is_multiple_of(3) {
                    let _ = req.respond(tiny_http::Response::from_string("boom").with_status_code(500));
                } else {
                    let _ = req.respond(tiny_http::Response::from_string("ok"));
                }
            }
        });
    }
    format!("http://127.0.0.1:{port}")
}

fn http_inputs(endpoint: &str, workload: WorkloadSpec) -> JobInputs {
    let mut spec = JobSpec::new("http", fc(1, 16), workload);
    spec.backend.kind = BackendKind::Http;
    spec.backend.hardware_id = None;
    spec.backend.endpoint = Some(endpoint.to_string());
    spec.backend.timeout = 1.0;
    spec.workload.payload = PayloadSpec::SyntheticBytes(256);
    JobInputs::resolve(&spec, &Catalog::bundled(), None).unwrap()
}

fn ac7_measurement_oracles() -> Check {
    // percentiles against a sort-based oracle
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let samples: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.0..1.0f64).powi(3) * 2.0).collect();
    let digest = LatencyDigest::from_samples(DigestKind::Exact, samples.iter().copied());
    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (num, den) in [(1u64, 100u64), (25, 100), (50, 100), (90, 100), (95, 100), (99, 100), (999, 1000)] {
        let n = sorted.len() as u64;
        let rank = (num * n).div_ceil(den).max(1);
        let want = sorted[(rank - 1) as usize];
        let got = digest.percentile(num as f64 / den as f64).map_err(|e| e.to_string())?;
        ensure!(got == want, "q={num}/{den}: digest {got} vs oracle {want}");
    }
    ensure!(digest.min().unwrap() == sorted[0] && digest.max().unwrap() == sorted[9999], "min/max");

    let check_run = |what: &str, rec: &PerfRecord, records: &[servbench_core::harness::RequestRecord]| -> Check {
        ensure!(rec.ok + rec.failed == rec.scheduled, "{what}: {}+{} != {}", rec.ok, rec.failed, rec.scheduled);
        for r in records {
            let parts: u64 = r.stage_durations().iter().sum();
            ensure!(parts == r.t_response - r.t_send, "{what}: request {} stages {parts} vs e2e", r.req_id);
        }
        Ok(String::new())
    };

    let mut spec = JobSpec::new("stages", fc(2, 512), WorkloadSpec::poisson(400.0, 2000, 11));
    spec.backend.batching = BatchingSpec { mode: BatchingMode::Dynamic, batch_size: 8, max_queue_delay: Some(0.002) };
    spec.backend.network = NetworkSpec::Wifi;
    let (rec, records) = execute_with_records("s", &JobInputs::resolve(&spec, &Catalog::bundled(), None).unwrap())
        .map_err(|e| e.to_string())?;
    check_run("sim", &rec, &records)?;

    let url = faulty_server();
    let (rec, records) =
        execute_with_records("h", &http_inputs(&url, WorkloadSpec::constant(100.0, 60))).map_err(|e| e.to_string())?;
    check_run("http faults", &rec, &records)?;
    ensure!(rec.failed > 0 && rec.ok > 0, "fault injection had no effect: ok {} failed {}", rec.ok, rec.failed);
    let http_detail = format!("{}/{}/{}", rec.ok, rec.failed, rec.scheduled);

    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let (rec, records) =
        execute_with_records("u", &http_inputs(&format!("http://127.0.0.1:{port}"), WorkloadSpec::closed_loop(2, 10)))
            .map_err(|e| e.to_string())?;
    check_run("unreachable", &rec, &records)?;
    ensure!(rec.failed == 10, "unreachable endpoint: {} failed", rec.failed);

    Ok(format!("7 quantiles exact, faulty http ok/failed/scheduled {http_detail}"))
}

fn random_spec(rng: &mut ChaCha8Rng, i: usize) -> JobSpec {
    let model = match rng.random_range(0..4) {
        0 => fc(rng.random_range(1..=4), 1 << rng.random_range(6..=10)),
        1 => ModelSource::Generate(GeneratorParams::new(BlockKind::Cnn, rng.random_range(1..=3), 32).with_input(vec![3, 32, 32])),
        2 => ModelSource::Generate(
            GeneratorParams::new(BlockKind::Rnn, rng.random_range(1..=2), 128).with_input(vec![64]).with_seq_len(16),
        ),
        _ => ModelSource::Generate(GeneratorParams::new(BlockKind::Transformer, 2, 256).with_seq_len(32)),
    };
    let n = rng.random_range(50..400);
    let workload = match rng.random_range(0..3) {
        0 => WorkloadSpec::poisson(rng.random_range(20.0..400.0), n, rng.random_range(0..1u64 << 62)),
        1 => WorkloadSpec::constant(rng.random_range(20.0..200.0), n),
        _ => WorkloadSpec::closed_loop(rng.random_range(1..=16), n),
    };
    let mut spec = JobSpec::new(format!("replay-{i}"), model, workload).with_seed(rng.random_range(0..1u64 << 62));
    spec.backend.hardware_id = Some(["G1", "G2", "G3", "G4"][rng.random_range(0..4)].into());
    let b = 1 << rng.random_range(0..=4);
    spec.backend.batching = if rng.random_bool(0.5) {
        BatchingSpec { mode: BatchingMode::Dynamic, batch_size: b, max_queue_delay: Some(rng.random_range(0.0..0.01)) }
    } else {
        BatchingSpec { mode: BatchingMode::Static, batch_size: b, max_queue_delay: None }
    };
    spec.backend.network = [NetworkSpec::Lan, NetworkSpec::Wifi, NetworkSpec::Lte][rng.random_range(0..3)];
    if rng.random_bool(0.5) {
        spec.collect.digest = DigestKind::Histogram;
    }
    spec
}

fn ac8_replay() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for i in 0..10 {
        let spec = random_spec(&mut rng, i);
        spec.validate(&Catalog::bundled()).map_err(|e| format!("spec {i}: {e}"))?;
        let rec = run(&spec);
        let again = replay(&rec).map_err(|e| format!("spec {i}: {e}"))?;
        ensure!(again.e2e == rec.e2e && again.stages == rec.stages, "spec {i}: digests differ");
        ensure!(again.ok == rec.ok && again.failed == rec.failed, "spec {i}: counts differ");
        if i == 0 {
            // once through the binary with a record file
            let path = dir.path().join("record.json");
            std::fs::write(&path, serde_json::to_vec(&rec).unwrap()).map_err(|e| e.to_string())?;
            let v = bin_json(&["--perfdb", dir.path().join("db").to_str().unwrap(), "replay", path.to_str().unwrap()])?;
            ensure!(v["identical"] == true, "cli replay: {v}");
        }
    }
    Ok("10 random sim specs replayed bit-identically".into())
}

/// Child processes killed on drop.
struct Procs(Vec<Child>);

impl Drop for Procs {
    fn drop(&mut self) {
        for c in &mut self.0 {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

struct Cluster {
    addr: String,
    procs: Procs,
    _db: tempfile::TempDir,
}

fn start_cluster(policy: &str, pace: f64) -> Result<Cluster, String> {
    let db = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut leader = bin()
        .args(["--perfdb", db.path().to_str().unwrap(), "leader", "serve", "--bind", "127.0.0.1:0"])
        .args(["--policy", policy, "--min-workers", "2", "--sched-interval", "0.05", "--heartbeat-interval", "0.1"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut line = String::new();
    BufReader::new(leader.stdout.take().unwrap()).read_line(&mut line).map_err(|e| e.to_string())?;
    let mut procs = Procs(vec![leader]);
    let addr = line.trim().strip_prefix("leader listening on ").ok_or(format!("leader said `{line}`"))?.to_string();
    for w in ["w1", "w2"] {
        let f = bin()
            .args(["follower", "serve", "--leader", &addr, "--worker-id", w, "--pace", &pace.to_string()])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        procs.0.push(f);
    }
    Ok(Cluster { addr, procs, _db: db })
}

fn job_toml(name: &str, requests: u32) -> String {
    format!(
        r#"
job_name = "{name}"
estimated_duration = {}

[model.generate]
block = "fc"
num_layers = 2
width = 256
input_dims = [256]

[workload]
pattern = "constant"
rate = 10
num_requests = {requests}
"#,
        0.5 + f64::from(requests - 1) / 10.0
    )
}

const SIZES: [u32; 10] = [40, 5, 30, 2, 20, 8, 50, 3, 15, 10];

fn run_trace(policy: &str) -> Result<f64, String> {
    let c = start_cluster(policy, 0.2)?;
    let ids = SIZES
        .iter()
        .enumerate()
        .map(|(i, &n)| submit(&c.addr, &job_toml(&format!("{policy}-{i}"), n)).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let done = wait_terminal(&c.addr, &ids, Duration::from_secs(60)).map_err(|e| e.to_string())?;
    ensure!(done.iter().all(|s| s.state == JobState::Done), "{policy}: not all DONE: {done:?}");
    let jcts: Vec<f64> = done.iter().filter_map(|s| s.jct()).collect();
    Ok(jcts.iter().sum::<f64>() / jcts.len() as f64)
}

fn ac9_cluster_integration() -> Check {
    let start = Instant::now();
    let qa = run_trace("qa+sjf")?;
    let rr = run_trace("rr+fcfs")?;
    ensure!(qa <= rr, "mean JCT qa+sjf {qa:.3} s > rr+fcfs {rr:.3} s");

    let mut c = start_cluster("qa+sjf", 0.3)?;
    let ids = (0..10)
        .map(|i| submit(&c.addr, &job_toml(&format!("kill-{i}"), 8)).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let deadline = Instant::now() + Duration::from_secs(20);
    let (running, queued) = loop {
        let all = query(&c.addr, None).map_err(|e| e.to_string())?;
        let on_w2 = |st: JobState| -> Vec<String> {
            all.iter()
                .filter(|s| s.worker_id.as_deref() == Some("w2") && s.state == st)
                .map(|s| s.job_id.clone())
                .collect()
        };
        let (r, q) = (on_w2(JobState::Running), on_w2(JobState::Queued));
        if r.len() == 1 && !q.is_empty() {
            break (r, q);
        }
        ensure!(Instant::now() < deadline, "w2 never had a running and a queued job");
        thread::sleep(Duration::from_millis(10));
    };
    let w2 = &mut c.procs.0[2];
    w2.kill().map_err(|e| e.to_string())?;
    let _ = w2.wait();

    let done = wait_terminal(&c.addr, &ids, Duration::from_secs(60)).map_err(|e| e.to_string())?;
    let failed: Vec<&str> = done.iter().filter(|s| s.state == JobState::Failed).map(|s| s.job_id.as_str()).collect();
    // The running job may have finished just before the kill landed.
    ensure!(failed.len() <= 1 && failed.iter().all(|id| running.iter().any(|r| r == id)), "failed jobs: {failed:?}");
    for id in &queued {
        let s = done.iter().find(|s| &s.job_id == id).ok_or("missing job")?;
        ensure!(s.state == JobState::Done && s.worker_id.as_deref() == Some("w1"), "requeued job {id}: {s:?}");
    }
    ensure!(done.len() - failed.len() == 9 || failed.is_empty(), "unexpected terminal states");
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(elapsed < 120.0, "took {elapsed:.1} s");
    Ok(format!(
        "mean JCT qa+sjf {qa:.3} s vs rr+fcfs {rr:.3} s; kill: {} failed, {} requeued and done; {elapsed:.1} s",
        failed.len(),
        queued.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("AC1", "scheduler case study", ac1_scheduler_case_study),
        ("AC2", "SJF optimality oracle", ac2_sjf_optimality),
        ("AC3", "Poisson generator", ac3_poisson_generator),
        ("AC4", "roofline exactness", ac4_roofline_exactness),
        ("AC5", "sim self-consistency", ac5_sim_self_consistency),
        ("AC6", "qualitative shapes", ac6_qualitative_shapes),
        ("AC7", "measurement oracles", ac7_measurement_oracles),
        ("AC8", "reproducibility", ac8_replay),
        ("AC9", "cluster integration", ac9_cluster_integration),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {id} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id} {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
