use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn servbench(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_servbench"))
        .current_dir(dir)
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(dir: &Path, args: &[&str]) -> Value {
    let mut full = vec!["--format", "json"];
    full.extend_from_slice(args);
    let o = servbench(dir, &full);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    serde_json::from_slice(&o.stdout).unwrap()
}

const SMALL_JOB: &str = r#"
job_name = "small"

[model.generate]
block = "fc"
num_layers = 2
width = 256
input_dims = [256]

[workload]
pattern = "poisson"
rate = 100
num_requests = 200
"#;

#[test]
fn help_and_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    for sub in [
        "leader", "follower", "submit", "status", "run-local", "modelgen", "sweep", "sched-sim", "query", "roofline",
        "heatmap", "recommend", "leaderboard", "replay",
    ] {
        let o = servbench(dir.path(), &[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
    }
    assert_eq!(servbench(dir.path(), &["no-such-command"]).status.code(), Some(1));
    assert_eq!(servbench(dir.path(), &["run-local", "missing.toml"]).status.code(), Some(1));
}

#[test]
fn sched_sim_three_job_example() {
    let dir = tempfile::tempdir().unwrap();
    let trace = repo("traces/three-jobs.csv");
    let cdf = dir.path().join("cdf.csv");
    let v = json(
        dir.path(),
        &[
            "sched-sim",
            trace.to_str().unwrap(),
            "--workers",
            "1",
            "--policies",
            "qa+fcfs,qa+sjf",
            "--cdf",
            cdf.to_str().unwrap(),
        ],
    );
    let p = &v["policies"];
    assert_eq!(p[0]["total_jct"], 13.0);
    assert_eq!(p[1]["total_jct"], 10.0);
    assert!((p[1]["speedup"].as_f64().unwrap() - 1.3).abs() < 1e-12);
    let rows = std::fs::read_to_string(cdf).unwrap();
    assert_eq!(rows.lines().next().unwrap(), "policy,job_id,jct,fraction");
    assert_eq!(rows.lines().count(), 7);
}

#[test]
fn sched_sim_random_is_paired() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(dir.path(), &["sched-sim", "--random", "100", "4", "exp:60", "--seed", "7"]);
    let policies = v["policies"].as_array().unwrap();
    assert_eq!(v["baseline"], "rr+fcfs");
    let qa = policies.iter().find(|p| p["policy"] == "qa+sjf").unwrap();
    assert!(qa["speedup"].as_f64().unwrap() >= 1.0);
}

#[test]
fn bad_traces_are_user_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "job_id,submit_time,t_proc\n").unwrap();
    let o = servbench(dir.path(), &["sched-sim", "empty.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no jobs"), "{}", stderr(&o));

    std::fs::write(dir.path().join("bad.csv"), "job_id,submit_time,t_proc\na,0,1\nb,0,oops\n").unwrap();
    let o = servbench(dir.path(), &["sched-sim", "bad.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn run_local_is_deterministic_and_logs_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("job.toml"), SMALL_JOB).unwrap();
    let a = json(dir.path(), &["run-local", "job.toml", "--seed", "42", "--job-id", "a"]);
    let b = json(dir.path(), &["run-local", "job.toml", "--seed", "42", "--job-id", "b"]);
    let c = json(dir.path(), &["run-local", "job.toml", "--seed", "43", "--job-id", "c"]);
    assert_eq!(a["e2e"], b["e2e"]);
    assert_ne!(a["e2e"], c["e2e"]);
    assert_eq!(a["env_log"]["overrides"], serde_json::json!(["seed=42"]));
    assert_eq!(a["env_log"]["job_spec"]["seed"], 42);

    let hashes: Vec<String> = ["a", "b"]
        .iter()
        .map(|id| {
            let mut r = json(dir.path(), &["replay", id]);
            r["content_hash"].take().as_str().unwrap().to_string()
        })
        .collect();
    assert_eq!(hashes[0], hashes[1]);

    let table = stdout(&servbench(dir.path(), &["run-local", "job.toml", "--no-store"]));
    for field in ["p50 (ms)", "p95 (ms)", "p99 (ms)", "throughput (req/s)", "energy per req (J)"] {
        assert!(table.contains(field), "{field} missing:\n{table}");
    }
}

#[test]
fn bundled_config_runs_against_repository_model() {
    let dir = tempfile::tempdir().unwrap();
    let models = repo("models");
    let v = json(
        dir.path(),
        &["run-local", repo("configs/resnet50-sim.toml").to_str().unwrap(), "--models", models.to_str().unwrap()],
    );
    assert_eq!(v["state"], "DONE");
    assert_eq!(v["env_log"]["model"]["model_id"], "resnet50");
}

#[test]
fn analysis_commands_read_the_perfdb() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("job.toml"), SMALL_JOB.replace("pattern = \"poisson\"", "pattern = \"constant\""))
        .unwrap();
    let swept = json(dir.path(), &["sweep", "job.toml", "--axis", "batch=1,4", "--axis", "layers=1,2"]);
    assert_eq!(swept.as_array().unwrap().len(), 4);
    assert_eq!(swept[1]["job_name"], "small[batch=1,layers=2]");

    let rows = json(dir.path(), &["query", "--hardware", "G1"]);
    assert_eq!(rows.as_array().unwrap().len(), 4);
    assert!(json(dir.path(), &["query", "--hardware", "G3"]).as_array().unwrap().is_empty());

    let roof = json(dir.path(), &["roofline", "--out", "roof"]);
    assert_eq!(roof["points"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("roof/points.csv").is_file());
    assert!(dir.path().join("roof/roof-G1.csv").is_file());

    let grid = json(
        dir.path(),
        &["heatmap", "--axis1", "layers", "--axis2", "batch", "--metric", "throughput", "--out", "grid.csv"],
    );
    assert_eq!(grid["matrix"].as_array().unwrap().len(), 2);

    let rec = json(dir.path(), &["recommend", "--slo-p99", "10", "--rank-by", "throughput"]);
    assert_eq!(rec["top"].as_array().unwrap().len(), 3);
    let miss = json(dir.path(), &["recommend", "--slo-p99", "1e-9"]);
    assert!(miss["top"].as_array().unwrap().is_empty());
    assert!(miss["nearest_miss"].is_object());

    let board = json(dir.path(), &["leaderboard", "--group-by", "hardware", "--sort", "throughput", "--out", "board"]);
    assert_eq!(board["rows"].as_array().unwrap().len(), 1);

    let o = servbench(dir.path(), &["leaderboard", "--sort", "nonsense"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn replay_of_unknown_record_is_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = servbench(dir.path(), &["replay", "job-nope"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}
