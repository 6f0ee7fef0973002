use std::path::Path;

use log::info;
use serde::Serialize;
use servbench_core::analysis::{read_perf_record, PerfDb};
use servbench_core::harness::{execute, execute_with_records, replay, write_records, JobInputs, PerfRecord};
use servbench_core::modelgen::{
    generate_model, read_model_file, BlockKind, GeneratorParams, ModelDescriptor, ModelFamily, ModelQuery,
    ModelRepository, SweepAxis,
};
use servbench_core::spec::{parse_job_spec_with, JobSpec, ModelSource};

use crate::args::{Format, GenerateArgs, ModelgenAction, ReplayArgs, RunLocalArgs, SweepArgs};
use crate::output::{ms, num, print_json, read_file, CliError, CmdResult, Table};
use crate::Context;

fn new_id(prefix: &str) -> String {
    let id = uuid::Uuid::new_v4().simple().to_string();
    format!("{prefix}-{}", &id[..12])
}

fn open_models(dir: &Path) -> CmdResult<Option<ModelRepository>> {
    if dir.is_dir() {
        Ok(Some(ModelRepository::open(dir)?))
    } else {
        Ok(None)
    }
}

fn load_spec(ctx: &Context, path: &Path) -> CmdResult<JobSpec> {
    let text = read_file(path)?;
    parse_job_spec_with(&text, &ctx.catalog).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

pub fn run_local(ctx: &Context, a: &RunLocalArgs) -> CmdResult {
    let mut spec = load_spec(ctx, &a.spec)?;
    let mut overrides = Vec::new();
    if let Some(seed) = a.seed {
        spec = spec.with_seed(seed);
        overrides.push(format!("seed={seed}"));
    }
    let repo = open_models(&a.models)?;
    let mut inputs = JobInputs::resolve(&spec, &ctx.catalog, repo.as_ref())?;
    inputs.overrides = overrides;
    info!("effective job spec:\n{}", inputs.spec.to_toml());
    let job_id = a.job_id.clone().unwrap_or_else(|| new_id("local"));
    let record = match &a.requests_out {
        Some(path) => {
            let (record, requests) = execute_with_records(&job_id, &inputs)?;
            write_records(path, &requests)?;
            record
        }
        None => execute(&job_id, &inputs)?,
    };
    if !a.no_store {
        PerfDb::open(&ctx.perfdb)?.append(&record)?;
    }
    match ctx.format {
        Format::Json => print_json(&record),
        Format::Table => {
            print_summary(&record);
            Ok(())
        }
    }
}

pub fn print_summary(r: &PerfRecord) {
    let mut t = Table::new(&["field", "value"]);
    let mut kv = |k: &str, v: String| t.row(vec![k.to_string(), v]);
    kv("job_id", r.job_id.clone());
    kv("job_name", r.job_name.clone());
    kv("state", r.state.to_string());
    if let Some(f) = &r.failure {
        kv("failure", f.clone());
    }
    kv("model", r.env_log.model.model_id.clone());
    kv("hardware", r.hardware_id().unwrap_or("-").to_string());
    kv("backend", r.env_log.backend.kind.clone());
    kv("requests ok/failed/scheduled", format!("{}/{}/{}", r.ok, r.failed, r.scheduled));
    kv("throughput (req/s)", num(Some(r.throughput)));
    kv("cold start (s)", num(Some(r.cold_start)));
    kv("p50 (ms)", ms(r.percentile(0.5)));
    kv("p95 (ms)", ms(r.percentile(0.95)));
    kv("p99 (ms)", ms(r.percentile(0.99)));
    kv("mean (ms)", ms(r.summary.as_ref().map(|s| s.mean)));
    kv("mean batch", num(Some(r.batches.mean_size)));
    kv("utilization", num(r.device.as_ref().map(|d| d.mean_utilization)));
    kv("energy per req (J)", num(r.costs.energy_per_req));
    kv("CO2 per req (g)", num(r.costs.co2_per_req));
    kv("cloud cost per req (USD)", num(r.costs.cloud_cost_per_req()));
    t.print();
    if !r.stages.is_empty() {
        println!();
        let mut s = Table::new(&["stage", "mean_ms", "p99_ms", "fraction"]);
        for st in &r.stages {
            s.row(vec![
                st.stage.name().to_string(),
                ms(Some(st.summary.mean)),
                ms(st.summary.percentile(0.99)),
                format!("{:.4}", st.fraction),
            ]);
        }
        s.print();
    }
}

#[derive(Serialize)]
struct ModelRow<'a> {
    #[serde(flatten)]
    model: &'a ModelDescriptor,
    intensity_b1: f64,
    intensity_limit: f64,
}

fn show_models(ctx: &Context, models: &[ModelDescriptor]) -> CmdResult {
    if ctx.format == Format::Json {
        let rows: Vec<ModelRow> = models
            .iter()
            .map(|m| ModelRow { model: m, intensity_b1: m.intensity(1.0), intensity_limit: m.intensity_limit() })
            .collect();
        return print_json(&rows);
    }
    let mut t = Table::new(&["model_id", "family", "version", "flops_per_sample", "weight_bytes", "act_bytes", "I(1)", "I_max"]);
    for m in models {
        t.row(vec![
            m.model_id.clone(),
            m.family.to_string(),
            m.version.to_string(),
            m.flops_per_sample.to_string(),
            m.weight_bytes.to_string(),
            m.activation_bytes_per_sample.to_string(),
            format!("{:.4}", m.intensity(1.0)),
            format!("{:.4}", m.intensity_limit()),
        ]);
    }
    t.print();
    Ok(())
}

pub fn modelgen(ctx: &Context, action: &ModelgenAction) -> CmdResult {
    match action {
        ModelgenAction::Generate(a) => generate(ctx, a),
        ModelgenAction::Register { file, models } => {
            let m = read_model_file(file)?;
            let stored = ModelRepository::open(models)?.register(m)?;
            show_models(ctx, &[stored])
        }
        ModelgenAction::List { family, models } => {
            let repo = ModelRepository::open(models)?;
            let query = match family {
                Some(f) => ModelQuery::family(f.parse::<ModelFamily>()?),
                None => ModelQuery::default(),
            };
            show_models(ctx, &repo.search(&query))
        }
        ModelgenAction::Delete { model_id, models } => {
            let removed = ModelRepository::open(models)?.delete(model_id)?;
            show_models(ctx, &[removed])
        }
    }
}

fn generate(ctx: &Context, a: &GenerateArgs) -> CmdResult {
    let block: BlockKind = a.block.parse()?;
    let mut p = GeneratorParams::new(block, a.layers, a.width)
        .with_input(a.input.clone())
        .with_precision_bytes(a.precision_bytes);
    if let Some(s) = a.seq_len {
        p = p.with_seq_len(s);
    }
    let mut m = generate_model(&p)?;
    if a.register {
        m = ModelRepository::open(&a.models)?.register(m)?;
    }
    show_models(ctx, &[m])
}

fn parse_axis(s: &str) -> CmdResult<(SweepAxis, Vec<u32>)> {
    let (name, values) = s
        .split_once('=')
        .ok_or_else(|| CliError::user(format!("axis `{s}` must look like NAME=V1,V2")))?;
    let axis: SweepAxis = name.trim().parse()?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<u32>().ok().filter(|v| *v > 0))
        .collect::<Option<Vec<u32>>>()
        .filter(|v| !v.is_empty())
        .ok_or_else(|| CliError::user(format!("axis `{s}` needs positive integer values")))?;
    Ok((axis, values))
}

fn apply_axis(spec: &mut JobSpec, axis: SweepAxis, value: u32) -> CmdResult {
    if axis == SweepAxis::Batch {
        spec.backend.batching.batch_size = value;
        return Ok(());
    }
    let ModelSource::Generate(p) = &mut spec.model else {
        return Err(CliError::user(format!("axis `{axis}` needs a generated model ([model.generate])")));
    };
    match axis {
        SweepAxis::Layers => p.num_layers = value,
        SweepAxis::Width => p.width = value,
        SweepAxis::SeqLen => p.seq_len = Some(value),
        SweepAxis::Batch => unreachable!(),
    }
    Ok(())
}

pub fn sweep(ctx: &Context, a: &SweepArgs) -> CmdResult {
    let base = load_spec(ctx, &a.spec)?;
    let axes = a.axes.iter().map(|s| parse_axis(s)).collect::<CmdResult<Vec<_>>>()?;
    let repo = open_models(&a.models)?;
    let db = PerfDb::open(&ctx.perfdb)?;
    let sweep_id = new_id("sweep");

    // Row-major product; the last axis varies fastest.
    let mut combos: Vec<Vec<u32>> = vec![vec![]];
    for (_, values) in &axes {
        combos = combos
            .into_iter()
            .flat_map(|c| values.iter().map(move |v| [c.clone(), vec![*v]].concat()))
            .collect();
    }

    let mut records = Vec::new();
    for (i, combo) in combos.iter().enumerate() {
        let mut spec = base.clone();
        let mut label = Vec::new();
        for ((axis, _), v) in axes.iter().zip(combo) {
            apply_axis(&mut spec, *axis, *v)?;
            label.push(format!("{axis}={v}"));
        }
        spec.job_name = format!("{}[{}]", base.job_name, label.join(","));
        spec.validate(&ctx.catalog)?;
        let mut inputs = JobInputs::resolve(&spec, &ctx.catalog, repo.as_ref())?;
        inputs.overrides = label.clone();
        let record = execute(&format!("{sweep_id}-{:03}", i + 1), &inputs)?;
        db.append(&record)?;
        info!("{} {}: p99 {:?}", record.job_id, label.join(","), record.percentile(0.99));
        records.push((label.join(","), record));
    }

    if ctx.format == Format::Json {
        let rows: Vec<_> = records.iter().map(|(_, r)| r).collect();
        return print_json(&rows);
    }
    let mut t = Table::new(&["job_id", "point", "state", "p99_ms", "throughput", "utilization"]);
    for (label, r) in &records {
        t.row(vec![
            r.job_id.clone(),
            label.clone(),
            r.state.to_string(),
            ms(r.percentile(0.99)),
            num(Some(r.throughput)),
            num(r.device.as_ref().map(|d| d.mean_utilization)),
        ]);
    }
    t.print();
    Ok(())
}

pub fn replay_cmd(ctx: &Context, a: &ReplayArgs) -> CmdResult {
    let path = Path::new(&a.record);
    let original = if path.is_file() {
        read_perf_record(path)?
    } else {
        PerfDb::open(&ctx.perfdb)?.get(&a.record)?
    };
    let again = replay(&original)?;
    if a.store {
        PerfDb::open(&ctx.perfdb)?.append(&again)?;
    }
    match ctx.format {
        Format::Json => print_json(&serde_json::json!({
            "job_id": original.job_id,
            "replay_job_id": again.job_id,
            "identical": true,
            "content_hash": again.content_hash(),
        })),
        Format::Table => {
            println!(
                "replay of {} matches: e2e digest, stage digests, counts and throughput are bit-identical",
                original.job_id
            );
            Ok(())
        }
    }
}
