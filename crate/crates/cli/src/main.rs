mod analysis;
mod args;
mod cluster;
mod local;
mod output;
mod sched;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use servbench_core::catalog::{load_hardware_catalog, Catalog};

use args::{Cli, Command, FollowerAction, Format, LeaderAction};
use output::CmdResult;

pub struct Context {
    pub format: Format,
    pub perfdb: PathBuf,
    pub catalog: Catalog,
}

fn main() -> ExitCode {
    // Die quietly when piped into `head` instead of panicking in println!.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    let serving = matches!(cli.command, Command::Leader { .. } | Command::Follower { .. });
    let level = match (cli.verbose, serving) {
        (0, false) => "warn",
        (0, true) | (1, _) => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp_millis()
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let mut catalog = Catalog::bundled();
    if let Some(path) = &cli.catalog {
        catalog = catalog.merged_with(load_hardware_catalog(path)?);
    }
    let ctx = Context { format: cli.format, perfdb: cli.perfdb, catalog };
    match &cli.command {
        Command::Leader { action: LeaderAction::Serve(a) } => cluster::leader_serve(&ctx, a),
        Command::Follower { action: FollowerAction::Serve(a) } => cluster::follower_serve(&ctx, a),
        Command::Submit(a) => cluster::submit_jobs(&ctx, a),
        Command::Status(a) => cluster::status(&ctx, a),
        Command::RunLocal(a) => local::run_local(&ctx, a),
        Command::Modelgen { action } => local::modelgen(&ctx, action),
        Command::Sweep(a) => local::sweep(&ctx, a),
        Command::SchedSim(a) => sched::sched_sim(&ctx, a),
        Command::Query(f) => analysis::query(&ctx, f),
        Command::Roofline(a) => analysis::roofline(&ctx, a),
        Command::Heatmap(a) => analysis::heatmap(&ctx, a),
        Command::Recommend(a) => analysis::recommend_cmd(&ctx, a),
        Command::Leaderboard(a) => analysis::leaderboard_cmd(&ctx, a),
        Command::Replay(a) => local::replay_cmd(&ctx, a),
    }
}
