use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use servbench_cluster::client::{DEFAULT_LEADER, LEADER_ENV};

#[derive(Debug, Parser)]
#[command(name = "servbench", version, about = "Inference-serving benchmark toolkit")]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,

    /// PerfDB directory.
    #[arg(long, global = true, default_value = "perfdb")]
    pub perfdb: PathBuf,

    /// Extra hardware catalog merged over the bundled one.
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,

    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the cluster leader.
    Leader {
        #[command(subcommand)]
        action: LeaderAction,
    },
    /// Run a follower worker.
    Follower {
        #[command(subcommand)]
        action: FollowerAction,
    },
    /// Submit job spec files to the leader.
    Submit(SubmitArgs),
    /// Show job status from the leader.
    Status(StatusArgs),
    /// Run one job in-process and store its record.
    RunLocal(RunLocalArgs),
    /// Generate canonical models and manage the model repository.
    Modelgen {
        #[command(subcommand)]
        action: ModelgenAction,
    },
    /// Run a job over a grid of batch sizes and model hyper-parameters.
    Sweep(SweepArgs),
    /// Simulate job schedulers over a trace.
    SchedSim(SchedSimArgs),
    /// List stored records.
    Query(FilterArgs),
    /// Emit roofline points and roofs.
    Roofline(RooflineArgs),
    /// Build a two-axis metric grid from sweep records.
    Heatmap(HeatmapArgs),
    /// Top configurations meeting a latency SLO.
    Recommend(RecommendArgs),
    /// Best record per group, plus plot-ready files.
    Leaderboard(LeaderboardArgs),
    /// Re-run a simulated job and check its digests are identical.
    Replay(ReplayArgs),
}

#[derive(Debug, Subcommand)]
pub enum LeaderAction {
    Serve(LeaderServeArgs),
}

#[derive(Debug, Args)]
pub struct LeaderServeArgs {
    #[arg(long, default_value = DEFAULT_LEADER)]
    pub bind: String,
    /// Load balancer and queue order, e.g. qa+sjf, rr+fcfs, rr+sjf.
    #[arg(long, default_value = "qa+sjf")]
    pub policy: String,
    /// Seconds between placement rounds.
    #[arg(long, default_value_t = 1.0)]
    pub sched_interval: f64,
    /// Seconds between follower heartbeats.
    #[arg(long, default_value_t = 2.0)]
    pub heartbeat_interval: f64,
    #[arg(long, default_value_t = 3)]
    pub missed_heartbeats: u32,
    /// Hold placement until this many followers are registered.
    #[arg(long, default_value_t = 1)]
    pub min_workers: usize,
}

#[derive(Debug, Subcommand)]
pub enum FollowerAction {
    Serve(FollowerServeArgs),
}

#[derive(Debug, Args)]
pub struct FollowerServeArgs {
    #[arg(long, env = LEADER_ENV, default_value = DEFAULT_LEADER)]
    pub leader: String,
    /// Defaults to worker-<pid>.
    #[arg(long)]
    pub worker_id: Option<String>,
    /// Hold the worker for this multiple of each job's simulated duration.
    #[arg(long, default_value_t = 0.0)]
    pub pace: f64,
    /// Model repository directory.
    #[arg(long, default_value = "models")]
    pub models: PathBuf,
}

#[derive(Debug, Args)]
pub struct SubmitArgs {
    #[arg(required = true)]
    pub specs: Vec<PathBuf>,
    #[arg(long, env = LEADER_ENV, default_value = DEFAULT_LEADER)]
    pub leader: String,
    /// Wait until the submitted jobs finish.
    #[arg(long)]
    pub wait: bool,
    /// Seconds to wait with --wait.
    #[arg(long, default_value_t = 3600.0)]
    pub timeout: f64,
}

#[derive(Debug, Args)]
pub struct StatusArgs {
    /// Omit to list every job.
    pub job_id: Option<String>,
    #[arg(long, env = LEADER_ENV, default_value = DEFAULT_LEADER)]
    pub leader: String,
    /// Wait until the listed jobs finish.
    #[arg(long)]
    pub wait: bool,
    #[arg(long, default_value_t = 3600.0)]
    pub timeout: f64,
}

#[derive(Debug, Args)]
pub struct RunLocalArgs {
    pub spec: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defaults to local-<random>.
    #[arg(long)]
    pub job_id: Option<String>,
    #[arg(long, default_value = "models")]
    pub models: PathBuf,
    /// Also write per-request records as JSON lines.
    #[arg(long)]
    pub requests_out: Option<PathBuf>,
    /// Do not store the record in the PerfDB.
    #[arg(long)]
    pub no_store: bool,
}

#[derive(Debug, Subcommand)]
pub enum ModelgenAction {
    /// Generate a canonical model descriptor.
    Generate(GenerateArgs),
    /// Register a model metadata file.
    Register {
        file: PathBuf,
        #[arg(long, default_value = "models")]
        models: PathBuf,
    },
    /// List repository models.
    List {
        #[arg(long)]
        family: Option<String>,
        #[arg(long, default_value = "models")]
        models: PathBuf,
    },
    /// Delete a repository model.
    Delete {
        model_id: String,
        #[arg(long, default_value = "models")]
        models: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// fc, cnn, rnn or transformer.
    #[arg(long)]
    pub block: String,
    #[arg(long)]
    pub layers: u32,
    #[arg(long)]
    pub width: u32,
    /// Comma-separated input dimensions.
    #[arg(long, value_delimiter = ',')]
    pub input: Vec<u32>,
    #[arg(long)]
    pub seq_len: Option<u32>,
    /// 4 (fp32) or 2 (fp16).
    #[arg(long, default_value_t = 4)]
    pub precision_bytes: u8,
    /// Store the descriptor in the repository.
    #[arg(long)]
    pub register: bool,
    #[arg(long, default_value = "models")]
    pub models: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub spec: PathBuf,
    /// NAME=V1,V2,... with NAME one of batch, layers, width, seq_len. Repeatable;
    /// the last axis varies fastest.
    #[arg(long = "axis", required = true)]
    pub axes: Vec<String>,
    #[arg(long, default_value = "models")]
    pub models: PathBuf,
}

#[derive(Debug, Args)]
pub struct SchedSimArgs {
    /// Trace file (job_id,submit_time,t_proc).
    #[arg(conflicts_with = "random", required_unless_present = "random")]
    pub trace: Option<PathBuf>,
    /// Random trace: N jobs, K workers, processing-time distribution
    /// (exp:MEAN, pareto:ALPHA:XM, const:V, uniform:LO:HI).
    #[arg(long, num_args = 3, value_names = ["N", "K", "DIST"])]
    pub random: Option<Vec<String>>,
    /// Submission process for --random: poisson:RATE or batch.
    #[arg(long, default_value = "poisson:0.05")]
    pub arrivals: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Workers when replaying a trace file.
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    /// Policies to compare; speedups are against the first.
    #[arg(long, value_delimiter = ',', default_value = "rr+fcfs,rr+sjf,qa+sjf")]
    pub policies: Vec<String>,
    /// Seconds between placement rounds; 0 places on arrival.
    #[arg(long, default_value_t = 1.0)]
    pub interval: f64,
    /// Per-job JCT CDF output (policy,job_id,jct,fraction).
    #[arg(long)]
    pub cdf: Option<PathBuf>,
    /// Event trace output (policy,t,event,job_id,worker).
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Save the job trace that was simulated.
    #[arg(long)]
    pub write_trace: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct FilterArgs {
    #[arg(long)]
    pub model_family: Option<String>,
    #[arg(long)]
    pub hardware: Option<String>,
    #[arg(long)]
    pub backend: Option<String>,
    /// Unix seconds.
    #[arg(long)]
    pub since: Option<f64>,
    /// Job name prefix.
    #[arg(long)]
    pub job_name: Option<String>,
}

#[derive(Debug, Args)]
pub struct RooflineArgs {
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Directory for points.csv and roof-<hardware>.csv.
    #[arg(long, default_value = "roofline")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[command(flatten)]
    pub filter: FilterArgs,
    #[arg(long)]
    pub axis1: String,
    /// Expected values; missing cells are an error.
    #[arg(long, value_delimiter = ',')]
    pub values1: Vec<u32>,
    #[arg(long)]
    pub axis2: String,
    #[arg(long, value_delimiter = ',')]
    pub values2: Vec<u32>,
    /// utilization, p99, throughput, cost_per_req, ...
    #[arg(long, default_value = "utilization")]
    pub metric: String,
    /// CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[command(flatten)]
    pub filter: FilterArgs,
    /// p99 bound, seconds.
    #[arg(long)]
    pub slo_p99: f64,
    /// USD per 1000 requests.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long, default_value = "cloud_cost_per_req")]
    pub rank_by: String,
}

#[derive(Debug, Args)]
pub struct LeaderboardArgs {
    #[command(flatten)]
    pub filter: FilterArgs,
    /// hardware, model, family, backend or job.
    #[arg(long, default_value = "hardware")]
    pub group_by: String,
    #[arg(long, default_value = "throughput")]
    pub sort: String,
    /// Directory for leaderboard, bar, CDF and speedup files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Job id used as the speedup baseline.
    #[arg(long)]
    pub baseline: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A record file or a job id in the PerfDB.
    pub record: String,
    /// Store the replayed record in the PerfDB.
    #[arg(long)]
    pub store: bool,
}
