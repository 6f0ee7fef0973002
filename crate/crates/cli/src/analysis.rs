use std::collections::BTreeMap;

use servbench_core::analysis::leaderboard::emit_files;
use servbench_core::analysis::roofline::{write_points_csv, write_roof_csv};
use servbench_core::analysis::{
    build_heatgrid, leaderboard, recommend, roofline_points, speedup_table, GridAxis, GroupBy, Metric, PerfDb,
    RecordQuery,
};
use servbench_core::harness::PerfRecord;
use servbench_core::modelgen::ModelFamily;
use servbench_core::spec::Slo;

use crate::args::{FilterArgs, Format, HeatmapArgs, LeaderboardArgs, RecommendArgs, RooflineArgs};
use crate::output::{create_file, ms, num, print_json, CliError, CmdResult, Table};
use crate::Context;

fn record_query(f: &FilterArgs) -> CmdResult<RecordQuery> {
    Ok(RecordQuery {
        model_family: f.model_family.as_deref().map(str::parse::<ModelFamily>).transpose()?,
        hardware: f.hardware.clone(),
        backend: f.backend.clone(),
        since: f.since,
        job_name_prefix: f.job_name.clone(),
    })
}

fn load(ctx: &Context, f: &FilterArgs) -> CmdResult<Vec<PerfRecord>> {
    let db = PerfDb::open(&ctx.perfdb)?;
    Ok(db.load(&record_query(f)?)?)
}

pub fn query(ctx: &Context, f: &FilterArgs) -> CmdResult {
    let db = PerfDb::open(&ctx.perfdb)?;
    let entries = db.query(&record_query(f)?);
    if ctx.format == Format::Json {
        return print_json(&entries);
    }
    let mut t = Table::new(&["job_id", "job_name", "model", "family", "hardware", "backend", "finished_at"]);
    for e in entries {
        t.row(vec![
            e.job_id,
            e.job_name,
            e.model_id,
            e.model_family.to_string(),
            e.hardware_id.unwrap_or_else(|| "-".into()),
            e.backend,
            format!("{:.3}", e.finished_at),
        ]);
    }
    t.print();
    Ok(())
}

pub fn roofline(ctx: &Context, a: &RooflineArgs) -> CmdResult {
    let records = load(ctx, &a.filter)?;
    let (points, warnings) = roofline_points(&records);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    std::fs::create_dir_all(&a.out)?;
    write_points_csv(create_file(&a.out.join("points.csv"))?, &points)?;

    // One roof per hardware profile, spanning the observed intensities.
    let mut span: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for p in &points {
        let e = span.entry(p.hardware_id.clone()).or_insert((p.intensity, p.intensity));
        e.0 = e.0.min(p.intensity);
        e.1 = e.1.max(p.intensity);
    }
    for (hw, (lo, hi)) in &span {
        let Some(r) = records.iter().find(|r| r.hardware_id() == Some(hw.as_str())) else { continue };
        let Some(h) = &r.env_log.hardware else { continue };
        let precision = r.env_log.job_spec.backend.numeric_precision;
        let ridge = h.ridge_point(precision);
        let lo = (lo / 4.0).min(ridge / 4.0);
        let hi = (hi * 4.0).max(ridge * 4.0);
        write_roof_csv(create_file(&a.out.join(format!("roof-{hw}.csv")))?, h, precision, lo, hi, 64)?;
    }

    if ctx.format == Format::Json {
        return print_json(&serde_json::json!({ "points": points, "warnings": warnings }));
    }
    let mut t = Table::new(&["job_id", "hardware", "batch", "intensity", "achieved_flops", "roof_flops", "bound", "valid"]);
    for p in &points {
        t.row(vec![
            p.job_id.clone(),
            p.hardware_id.clone(),
            format!("{:.2}", p.batch),
            format!("{:.4}", p.intensity),
            format!("{:.4e}", p.achieved),
            format!("{:.4e}", p.roof),
            p.bound.to_string(),
            p.valid.to_string(),
        ]);
    }
    t.print();
    println!("wrote {}", a.out.display());
    Ok(())
}

pub fn heatmap(ctx: &Context, a: &HeatmapArgs) -> CmdResult {
    let records = load(ctx, &a.filter)?;
    let axis1: GridAxis = a.axis1.parse()?;
    let axis2: GridAxis = a.axis2.parse()?;
    let metric: Metric = a.metric.parse()?;
    let values = |v: &Vec<u32>| (!v.is_empty()).then(|| v.clone());
    let grid = build_heatgrid(&records, axis1, values(&a.values1), axis2, values(&a.values2), metric)?;
    if let Some(out) = &a.out {
        grid.write_csv(create_file(out)?)?;
    }
    if ctx.format == Format::Json {
        return print_json(&grid);
    }
    let mut headers = vec![format!("{}\\{}", axis1.name(), axis2.name())];
    headers.extend(grid.values2.iter().map(|v| v.to_string()));
    let header_refs: Vec<&str> = headers.iter().map(String::as_str).collect();
    let mut t = Table::new(&header_refs);
    for (v1, row) in grid.values1.iter().zip(&grid.matrix) {
        let mut cells = vec![v1.to_string()];
        cells.extend(row.iter().map(|x| num(Some(*x))));
        t.row(cells);
    }
    println!("{}", grid.metric);
    t.print();
    Ok(())
}

pub fn recommend_cmd(ctx: &Context, a: &RecommendArgs) -> CmdResult {
    if !(a.slo_p99 > 0.0 && a.slo_p99.is_finite()) {
        return Err(CliError::user("--slo-p99 must be a positive number of seconds"));
    }
    let records = load(ctx, &a.filter)?;
    if records.is_empty() {
        return Err(CliError::user(format!("no records in {}", ctx.perfdb.display())));
    }
    let metric: Metric = a.rank_by.parse()?;
    let slo = Slo { latency_p99: a.slo_p99, budget_per_1k_requests: a.budget };
    let rec = recommend(&records, &slo, metric);
    if ctx.format == Format::Json {
        return print_json(&rec);
    }
    if rec.top.is_empty() {
        match &rec.nearest_miss {
            Some(m) => println!(
                "no configuration meets p99 <= {} ms; nearest miss {} at {} ms",
                ms(Some(a.slo_p99)),
                m.job_id,
                ms(Some(m.p99))
            ),
            None => println!("no finished records to rank"),
        }
        return Ok(());
    }
    let mut t = Table::new(&["rank", "job_id", "hardware", "batch", "p99_ms", &rec.metric]);
    for (i, c) in rec.top.iter().enumerate() {
        t.row(vec![
            (i + 1).to_string(),
            c.job_id.clone(),
            c.record.hardware_id().unwrap_or("-").to_string(),
            c.record.batch_size().to_string(),
            ms(Some(c.p99)),
            num(c.value),
        ]);
    }
    t.print();
    Ok(())
}

pub fn leaderboard_cmd(ctx: &Context, a: &LeaderboardArgs) -> CmdResult {
    let records = load(ctx, &a.filter)?;
    if records.is_empty() {
        return Err(CliError::user(format!("no records in {}", ctx.perfdb.display())));
    }
    let group_by: GroupBy = a.group_by.parse()?;
    let metric: Metric = a.sort.parse()?;
    let rows = leaderboard(&records, group_by, metric);
    let speedups = match &a.baseline {
        Some(b) => Some(speedup_table(&records, b, Metric::Percentile(0.99))?),
        None => None,
    };
    if let Some(dir) = &a.out {
        emit_files(dir, &records, &rows, metric, a.baseline.as_deref())?;
    }
    if ctx.format == Format::Json {
        return print_json(&serde_json::json!({ "metric": metric.to_string(), "rows": rows, "speedups": speedups }));
    }
    let metric_name = metric.to_string();
    let mut t = Table::new(&["rank", "group", "job_id", &metric_name, "p99_ms", "throughput"]);
    for (i, r) in rows.iter().enumerate() {
        t.row(vec![
            (i + 1).to_string(),
            r.group.clone(),
            r.job_id.clone(),
            num(Some(r.value)),
            ms(r.p99),
            num(Some(r.throughput)),
        ]);
    }
    t.print();
    if let Some(rows) = speedups {
        println!();
        let mut s = Table::new(&["job_id", "p99_ms", "speedup"]);
        for r in &rows {
            s.row(vec![r.job_id.clone(), ms(Some(r.latency)), format!("{:.3}", r.speedup)]);
        }
        s.print();
    }
    Ok(())
}
