use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, bail};
use clap::{Parser, Subcommand};
use gtt::aggregate::{aggregate_run, write_aggregate};
use gtt::arena::{Arena, ArenaConfig};
use gtt::backends::{Registry, ThreadSleeper, load_models};
use gtt::core::analytics::{ProbeRules, SelfPool};
use gtt::report::{write_graph, write_probes, write_scores};
use gtt::runner::{CampaignPlan, RunOptions, run_campaign};
use gtt::theory_lab::{SuiteOptions, parse_theorem, run_oracle, run_suite};
use tracing_subscriber::EnvFilter;

/// Generalized Turing test runner, analyses and arena.
#[derive(Parser)]
#[command(name = "gtt", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a campaign plan into an output directory.
    Run {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue a partial run.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Count outcomes per cell into aggregate.csv.
    Aggregate { dir: PathBuf },
    /// Advantage matrix and score tables.
    Scores {
        dir: PathBuf,
        /// Pool every target branch where the model is target.
        #[arg(long)]
        self_pool: bool,
    },
    /// Comparator graph at a threshold.
    Graph {
        dir: PathBuf,
        #[arg(long)]
        epsilon: f64,
    },
    /// Distinguisher question-category report.
    Probes { dir: PathBuf },
    /// Check a theorem bound on seeded random instances.
    Theory {
        #[arg(long)]
        theorem: String,
        #[arg(long, default_value_t = 200)]
        instances: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        zeta: Option<f64>,
    },
    /// Compare simulated protocol outcomes with exact enumeration.
    Oracle {
        #[arg(long, default_value_t = 50)]
        instances: u64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve the arena HTTP API.
    Serve {
        #[arg(long)]
        models: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value = "arena.jsonl")]
        store: PathBuf,
        #[arg(long, default_value_t = 40)]
        max_turns: u32,
        /// Idle minutes before a session expires.
        #[arg(long, default_value_t = 30)]
        ttl_minutes: u64,
    },
}

fn print_json<T: serde::Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("GTT_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.cmd {
        Cmd::Run { plan, out, resume, parallel } => {
            let plan = CampaignPlan::load(&plan)?;
            let registry = Registry::build(&plan.agents, Arc::new(ThreadSleeper))?;
            let opts = RunOptions { resume, parallelism: parallel, env: None };
            let summary = run_campaign(&plan, &registry, &out, &opts)?;
            print_json(&summary)?;
            Ok(summary.is_complete())
        }
        Cmd::Aggregate { dir } => {
            let agg = aggregate_run(&dir)?;
            let path = write_aggregate(&dir, &agg)?;
            for w in &agg.warnings {
                tracing::warn!("{w}");
            }
            println!("{}", path.display());
            Ok(agg.is_clean())
        }
        Cmd::Scores { dir, self_pool } => {
            let agg = aggregate_run(&dir)?;
            let pool = if self_pool { SelfPool::AllTargetBranches } else { SelfPool::SelfPairCell };
            let out = write_scores(&dir, &agg, pool)?;
            for f in &out.files {
                println!("{}", f.display());
            }
            for e in &out.errors {
                eprintln!("{e}");
            }
            Ok(out.errors.is_empty() && agg.is_clean())
        }
        Cmd::Graph { dir, epsilon } => {
            if !(0.0..=1.0).contains(&epsilon) {
                bail!("epsilon must lie in [0, 1]");
            }
            let agg = aggregate_run(&dir)?;
            let (g, files) = write_graph(&dir, &agg, epsilon)?;
            for f in &files {
                println!("{}", f.display());
            }
            if g.violations > 0 {
                eprintln!("{} transitivity violations", g.violations);
            }
            Ok(true)
        }
        Cmd::Probes { dir } => {
            let (_, path) = write_probes(&dir, &ProbeRules::default())?;
            println!("{}", path.display());
            Ok(true)
        }
        Cmd::Theory { theorem, instances, seed, epsilon, zeta } => {
            let theorem = parse_theorem(&theorem).with_context(|| format!("unknown theorem {theorem:?}"))?;
            let mut opts = SuiteOptions::new(theorem, instances, seed);
            opts.epsilon = epsilon;
            opts.zeta = zeta;
            let r = run_suite(&opts);
            print_json(&r)?;
            Ok(r.all_hold())
        }
        Cmd::Oracle { instances, trials, seed } => {
            let r = run_oracle(instances, trials, seed).map_err(anyhow::Error::msg)?;
            println!("{}/{} instances within 3 SE", r.within, r.instances);
            Ok(r.within * 100 >= r.instances * 95)
        }
        Cmd::Serve { models, addr, store, max_turns, ttl_minutes } => {
            let entries = load_models(&models)?;
            let registry = Registry::build(&entries, Arc::new(ThreadSleeper))?;
            let mut cfg = ArenaConfig::new(registry, store);
            cfg.max_turns = max_turns;
            cfg.ttl = Duration::from_secs(ttl_minutes * 60);
            cfg.env = gtt::env::capture(&std::env::current_dir()?);
            let arena = Arena::new(cfg)?;
            tokio::runtime::Runtime::new()?.block_on(gtt::arena::serve(arena, addr))?;
            Ok(true)
        }
    }
}
