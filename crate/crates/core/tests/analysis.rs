use servbench_core::analysis::leaderboard::{emit_files, write_cdf_csv};
use servbench_core::analysis::{
    build_heatgrid, leaderboard, recommend, roofline_points, speedup_table, Bound, GridAxis, GroupBy, Metric,
    PerfDb, RecordQuery,
};
use servbench_core::catalog::Catalog;
use servbench_core::harness::{execute, JobInputs, LatencyDigest, PerfRecord};
use servbench_core::modelgen::{BlockKind, GeneratorParams, ModelFamily};
use servbench_core::spec::{DigestKind, JobSpec, ModelSource, Slo};
use servbench_core::workload::WorkloadSpec;
use servbench_core::Error;

fn run(id: &str, spec: &JobSpec) -> PerfRecord {
    execute(id, &JobInputs::resolve(spec, &Catalog::bundled(), None).unwrap()).unwrap()
}

fn fc(layers: u32, width: u32) -> ModelSource {
    ModelSource::Generate(GeneratorParams::new(BlockKind::Fc, layers, width).with_input(vec![width]))
}

fn closed(model: ModelSource, hw: &str, batch: u32) -> JobSpec {
    let mut spec = JobSpec::new(format!("{hw}-b{batch}"), model, WorkloadSpec::closed_loop(batch, 4 * u64::from(batch)));
    spec.backend.hardware_id = Some(hw.into());
    spec.backend.batching.batch_size = batch;
    spec
}

/// A record with the given latency samples and throughput.
fn fake(id: &str, latencies: &[f64], throughput: f64) -> PerfRecord {
    let mut r = run(id, &closed(fc(1, 64), "G1", 1));
    r.job_id = id.to_string();
    r.e2e = LatencyDigest::from_samples(DigestKind::Exact, latencies.iter().copied());
    r.throughput = throughput;
    r
}

#[test]
fn perfdb_round_trip_and_append_only() {
    let dir = tempfile::tempdir().unwrap();
    let db = PerfDb::open(dir.path()).unwrap();
    let a = run("job-a", &closed(fc(2, 256), "G1", 4));
    let b = run("job-b", &closed(fc(2, 256), "G3", 4));
    db.append(&b).unwrap();
    db.append(&a).unwrap();
    let back = db.get("job-a").unwrap();
    assert_eq!(back, a);
    assert_eq!(back.content_hash(), a.content_hash());
    assert!(matches!(db.append(&a), Err(Error::Duplicate { .. })));
    // index kept sorted and survives reopen / rebuild
    let ids: Vec<_> = db.entries().into_iter().map(|e| e.job_id).collect();
    assert_eq!(ids, ["job-a", "job-b"]);
    std::fs::remove_file(dir.path().join("index.json")).unwrap();
    let reopened = PerfDb::open(dir.path()).unwrap();
    assert_eq!(reopened.len(), 2);
    reopened.rebuild_index().unwrap();
    let q = RecordQuery {
        hardware: Some("G3".into()),
        ..Default::default()
    };
    assert_eq!(reopened.load(&q).unwrap(), vec![b]);
    let q = RecordQuery {
        model_family: Some(ModelFamily::Cnn),
        ..Default::default()
    };
    assert!(reopened.query(&q).is_empty());
    assert!(matches!(reopened.get("nope"), Err(Error::NotFound { .. })));
}

#[test]
fn fc_batch_sweep_sits_on_the_roofline() {
    let mut records = Vec::new();
    for k in 0..=9 {
        let b = 1u32 << k;
        let mut spec = closed(fc(4, 1024), "G1", b);
        spec.backend.sim.fixed_overhead = 0.0;
        records.push(run(&format!("b{b:03}"), &spec));
    }
    let (points, warnings) = roofline_points(&records);
    assert!(warnings.is_empty(), "{warnings:?}");
    assert_eq!(points.len(), 10);
    let cfg = records[0].env_log.sim_config.clone().unwrap();
    let b_star = cfg.crossover_batch();
    for w in points.windows(2) {
        assert!(w[1].intensity > w[0].intensity);
    }
    for p in &points {
        let roof = cfg.compute_roof().min(cfg.memory_roof() * p.intensity);
        assert!((p.achieved - roof).abs() / roof < 1e-6, "{p:?}");
        assert!(p.valid);
        let expected = if p.batch < b_star { Bound::Memory } else { Bound::Compute };
        assert_eq!(p.bound, expected, "b={} b*={b_star}", p.batch);
    }
    assert!(points.iter().any(|p| p.bound == Bound::Memory));
    assert!(points.iter().any(|p| p.bound == Bound::Compute));
}

#[test]
fn cnn_utilization_grid_is_monotone() {
    let mut records = Vec::new();
    for layers in [1u32, 2, 4] {
        for b in [1u32, 4, 16] {
            let model = ModelSource::Generate(GeneratorParams::new(BlockKind::Cnn, layers, 32).with_input(vec![3, 32, 32]));
            records.push(run(&format!("l{layers}-b{b}"), &closed(model, "G3", b)));
        }
    }
    let grid = build_heatgrid(&records, GridAxis::Batch, None, GridAxis::Layers, None, Metric::Utilization).unwrap();
    assert_eq!(grid.values1, [1, 4, 16]);
    assert_eq!(grid.values2, [1, 2, 4]);
    for i in 0..3 {
        for j in 0..3 {
            if i + 1 < 3 {
                assert!(grid.matrix[i + 1][j] >= grid.matrix[i][j]);
            }
            if j + 1 < 3 {
                assert!(grid.matrix[i][j + 1] >= grid.matrix[i][j]);
            }
        }
    }
    let mut csv = Vec::new();
    grid.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("batch\\layers,layers=1,layers=2,layers=4\n"), "{text}");
    assert_eq!(text.lines().count(), 4);

    let err = build_heatgrid(
        &records,
        GridAxis::Batch,
        Some(vec![1, 8]),
        GridAxis::Layers,
        Some(vec![4]),
        Metric::Utilization,
    )
    .unwrap_err();
    assert!(err.to_string().contains("(batch=8, layers=4)"), "{err}");
}

#[test]
fn recommender_filters_and_ranks() {
    // p99 of n equal samples is the sample itself
    let recs = vec![
        fake("r1", &[0.010; 10], 100.0),
        fake("r2", &[0.050; 10], 300.0),
        fake("r3", &[0.020; 10], 200.0),
        fake("r4", &[0.200; 10], 900.0),
        fake("r5", &[0.030; 10], 200.0),
    ];
    let slo = Slo {
        latency_p99: 0.06,
        budget_per_1k_requests: None,
    };
    let rec = recommend(&recs, &slo, Metric::Throughput);
    let ids: Vec<_> = rec.top.iter().map(|c| c.job_id.as_str()).collect();
    // r3 and r5 tie on throughput; lower p99 first
    assert_eq!(ids, ["r2", "r3", "r5"]);
    assert!(rec.top.iter().all(|c| c.p99 <= slo.latency_p99));
    assert!(rec.nearest_miss.is_none());

    let strict = Slo {
        latency_p99: 0.001,
        budget_per_1k_requests: None,
    };
    let none = recommend(&recs, &strict, Metric::Throughput);
    assert!(none.top.is_empty());
    assert_eq!(none.nearest_miss.unwrap().job_id, "r1");
}

#[test]
fn leaderboard_cdf_and_speedup() {
    let recs = vec![
        run("g1", &closed(fc(2, 512), "G1", 8)),
        run("g3", &closed(fc(2, 512), "G3", 8)),
        run("g3-b1", &closed(fc(2, 512), "G3", 1)),
        run("g4", &closed(fc(2, 512), "G4", 8)),
    ];
    let rows = leaderboard(&recs, GroupBy::Hardware, Metric::Throughput);
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[0].value >= w[1].value));
    assert_eq!(rows.iter().filter(|r| r.group == "G3").count(), 1);
    assert_eq!(rows.iter().find(|r| r.group == "G3").unwrap().job_id, "g3");

    let mut out = Vec::new();
    let n = write_cdf_csv(&mut out, &recs[0]).unwrap();
    assert_eq!(n as u64, recs[0].e2e.count());
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), n + 1);

    let table = speedup_table(&recs, "g4", Metric::Percentile(0.99)).unwrap();
    for row in &table {
        let base = recs[3].percentile(0.99).unwrap();
        assert_eq!(row.speedup, base / row.latency);
    }
    assert!(speedup_table(&recs, "missing", Metric::Percentile(0.99)).is_err());
}

#[test]
fn emitted_files_are_pure_functions_of_records() {
    let recs = vec![run("x1", &closed(fc(1, 128), "G1", 2)), run("x2", &closed(fc(1, 128), "G2", 2))];
    let emit = || {
        let dir = tempfile::tempdir().unwrap();
        let rows = leaderboard(&recs, GroupBy::Hardware, Metric::Percentile(0.99));
        let files = emit_files(dir.path(), &recs, &rows, Metric::Percentile(0.99), Some("x1")).unwrap();
        files
            .iter()
            .map(|p| (p.file_name().unwrap().to_owned(), std::fs::read(p).unwrap()))
            .collect::<Vec<_>>()
    };
    assert_eq!(emit(), emit());
}
