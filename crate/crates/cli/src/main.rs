use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rtdp_core::agent::{evaluate, AgentConfig, BudgetSpec};
use rtdp_core::envs::{Env, EnvKind};
use rtdp_core::harness::csv::{entropy_csv, tradeoff_csv};
use rtdp_core::harness::sweep::TRADEOFF_FILE;
use rtdp_core::harness::{
    entropy_map, load_document, reaggregate, run_sweep, train_with_snapshots, verify, write_run_artifacts,
    EntropySnapshots, SweepConfig,
};
use rtdp_core::mcts::{SelectionVariant, UnvisitedValue};
use rtdp_core::net::checkpoint;
use rtdp_core::oracle::{q_value_iteration, TabularMdp};
use rtdp_core::Error;

/// Planning-budget experiments for network-guided tree search.
#[derive(Parser, Debug)]
#[command(name = "rtdp-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a single agent and write run.csv, checkpoint.bin and summary.json.
    Train(TrainArgs),
    /// Sweep the per-step search budget under a fixed total budget.
    Sweep(SweepArgs),
    /// Greedy rollouts from a checkpoint.
    Eval(EvalArgs),
    /// Exact Q-value iteration on a tabular MDP file; prints the Q table as CSV.
    Oracle(OracleArgs),
    /// Policy-entropy map of a checkpoint over a planar state space.
    EntropyMap(EntropyArgs),
    /// Check a sweep directory against its manifest and re-derive tradeoff.csv.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Variant {
    StandardPuct,
    LiteralEq7,
}

impl From<Variant> for SelectionVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::StandardPuct => SelectionVariant::StandardPuct,
            Variant::LiteralEq7 => SelectionVariant::LiteralEq7,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Unvisited {
    Zero,
    NodeValue,
    TryAllFirst,
}

impl From<Unvisited> for UnvisitedValue {
    fn from(v: Unvisited) -> Self {
        match v {
            Unvisited::Zero => UnvisitedValue::Zero,
            Unvisited::NodeValue => UnvisitedValue::NodeValue,
            Unvisited::TryAllFirst => UnvisitedValue::TryAllFirst,
        }
    }
}

/// Agent settings shared by `train` and `sweep`. Flags override values read
/// from `--config`.
#[derive(Args, Debug)]
struct AgentArgs {
    /// Task: cartpole, mountaincar or racegrid.
    #[arg(long)]
    env: Option<EnvKind>,
    /// Total search-trace budget (deterministic mode).
    #[arg(long, conflicts_with = "budget_seconds")]
    budget_traces: Option<u64>,
    /// Wall-clock budget in seconds covering planning, training and acting.
    #[arg(long)]
    budget_seconds: Option<f64>,
    /// Selection rule exploration term.
    #[arg(long, value_enum)]
    variant: Option<Variant>,
    /// Value assumed for actions not yet tried in a node.
    #[arg(long, value_enum)]
    unvisited: Option<Unvisited>,
    /// Discount factor for the task.
    #[arg(long)]
    gamma: Option<f64>,
    /// Gradient steps per real step.
    #[arg(long)]
    train_steps: Option<u32>,
    /// Snapshot policy entropy every N episodes (planar tasks only).
    #[arg(long)]
    entropy_every: Option<u64>,
    /// Grid points per axis for entropy snapshots.
    #[arg(long, default_value_t = 21)]
    entropy_resolution: usize,
}

impl AgentArgs {
    fn apply(&self, cfg: &mut AgentConfig) {
        if let Some(env) = self.env {
            cfg.env = env;
            cfg.c_schedule = None;
        }
        if let Some(n) = self.budget_traces {
            cfg.budget = BudgetSpec::traces(n);
        }
        if let Some(s) = self.budget_seconds {
            cfg.budget = BudgetSpec::seconds(s);
        }
        if let Some(v) = self.variant {
            cfg.variant = v.into();
        }
        if let Some(u) = self.unvisited {
            cfg.unvisited = u.into();
        }
        if let Some(g) = self.gamma {
            cfg.env_params.cartpole.gamma = g;
            cfg.env_params.mountaincar.gamma = g;
            cfg.env_params.racegrid.gamma = g;
        }
        if let Some(k) = self.train_steps {
            cfg.train_steps_per_real_step = k;
        }
    }

    fn snapshots(&self) -> Option<EntropySnapshots> {
        self.entropy_every.map(|every_episodes| EntropySnapshots {
            every_episodes,
            resolution: self.entropy_resolution,
        })
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Agent config file (.json or .toml).
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    agent: AgentArgs,
    /// Search traces per real step.
    #[arg(long)]
    n_mcts: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Sweep config file (.json or .toml).
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    agent: AgentArgs,
    /// Comma-separated per-step budgets.
    #[arg(long, value_delimiter = ',')]
    n_mcts: Option<Vec<u32>>,
    /// Repetitions per budget.
    #[arg(long)]
    seeds: Option<u32>,
    /// Seed of the first repetition.
    #[arg(long)]
    base_seed: Option<u64>,
    /// Fraction of the consumed budget averaged for the trade-off table.
    #[arg(long)]
    fraction: Option<f64>,
    /// Parallel runs (default: RTDP_LAB_WORKERS, then available cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Agent config used for training (sets the task and its parameters).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    /// Traces per step; 0 acts on the policy head alone.
    #[arg(long, default_value_t = 0)]
    n_mcts: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// MDP file in the documented JSON schema.
    #[arg(long)]
    mdp: PathBuf,
    /// Override the discount stored in the file.
    #[arg(long)]
    gamma: Option<f64>,
    /// Sup-norm stopping tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args, Debug)]
struct EntropyArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Agent config used for training.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long, default_value_t = 21)]
    resolution: usize,
    /// Episode label written to the CSV.
    #[arg(long, default_value_t = 0)]
    episode: u64,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Sweep output directory.
    #[arg(long)]
    dir: PathBuf,
}

fn agent_config(path: Option<&Path>) -> rtdp_core::Result<AgentConfig> {
    path.map_or_else(|| Ok(AgentConfig::default()), load_document)
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let mut cfg = agent_config(args.config.as_deref())?;
    args.agent.apply(&mut cfg);
    if let Some(n) = args.n_mcts {
        cfg.n_mcts = n;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let (record, maps) = train_with_snapshots(&cfg, args.seed, args.agent.snapshots())?;
    write_run_artifacts(&args.out, "", &record, &maps)?;
    std::fs::write(args.out.join("config.json"), serde_json::to_string_pretty(&cfg)? + "\n")?;
    println!(
        "{} episodes, {} real steps, {} traces -> {}",
        record.episodes.len(),
        record.total_real_steps,
        record.total_traces,
        args.out.display()
    );
    Ok(())
}

fn sweep(args: SweepArgs) -> anyhow::Result<bool> {
    let mut cfg: SweepConfig = match &args.config {
        Some(p) => load_document(p)?,
        None => SweepConfig::default(),
    };
    args.agent.apply(&mut cfg.agent);
    if let Some(s) = args.agent.snapshots() {
        cfg.entropy = Some(s);
    }
    if let Some(v) = args.n_mcts {
        cfg.n_mcts_values = v;
    }
    if let Some(r) = args.seeds {
        cfg.repetitions = r;
    }
    if let Some(b) = args.base_seed {
        cfg.base_seed = b;
    }
    if let Some(f) = args.fraction {
        cfg.aggregation_fraction = f;
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    if let Some(o) = args.out {
        cfg.out_dir = o;
    }
    let outcome = run_sweep(&cfg)?;
    print!("{}", tradeoff_csv(&outcome.tradeoff));
    let failed: Vec<_> = outcome.runs.iter().filter(|r| r.result.is_err()).collect();
    for r in &failed {
        eprintln!("run n_mcts={} seed={} failed: {}", r.n_mcts, r.seed, r.result.as_ref().unwrap_err());
    }
    eprintln!("wrote {} files to {}", outcome.manifest.files.len() + 1, cfg.out_dir.display());
    Ok(failed.is_empty())
}

fn checkpoint_env(config: Option<&Path>, env: Option<EnvKind>) -> rtdp_core::Result<AgentConfig> {
    let mut cfg = agent_config(config)?;
    if let Some(e) = env {
        cfg.env = e;
        cfg.c_schedule = None;
    }
    Ok(cfg)
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let cfg = checkpoint_env(args.config.as_deref(), args.env)?;
    let params = checkpoint::load(&args.checkpoint)?;
    let returns = evaluate(&cfg, &params, args.n_mcts, args.episodes, args.seed)?;
    println!("episode,return");
    for (i, r) in returns.iter().enumerate() {
        println!("{i},{r}");
    }
    let mean = returns.iter().sum::<f64>() / returns.len().max(1) as f64;
    eprintln!("mean return {mean:.3} over {} episodes", returns.len());
    Ok(())
}

fn oracle(args: OracleArgs) -> anyhow::Result<()> {
    let mut mdp = TabularMdp::from_json_file(&args.mdp)?;
    if let Some(g) = args.gamma {
        mdp = mdp.with_gamma(g)?;
    }
    let q = q_value_iteration(&mdp, args.tol)?;
    print!("{}", q.to_csv());
    Ok(())
}

fn entropy(args: EntropyArgs) -> anyhow::Result<()> {
    let mut cfg = checkpoint_env(args.config.as_deref(), args.env)?;
    if args.config.is_none() && args.env.is_none() {
        cfg.env = EnvKind::RaceGrid;
    }
    let env = Env::new(cfg.env, &cfg.env_params)?;
    let params = checkpoint::load(&args.checkpoint)?;
    if params.shape() != &cfg.net_shape(&env)? {
        return Err(Error::Config("checkpoint does not match the task's network shape".into()).into());
    }
    let map = entropy_map(&params, &env, args.resolution, args.episode)?;
    let text = entropy_csv(&[map]);
    match args.out {
        Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn verify_dir(args: VerifyArgs) -> anyhow::Result<bool> {
    let report = verify(&args.dir)?;
    for (path, why) in &report.problems {
        eprintln!("{path}: {why}");
    }
    let stored = std::fs::read_to_string(args.dir.join(TRADEOFF_FILE))
        .with_context(|| format!("reading {TRADEOFF_FILE}"))?;
    let rebuilt = tradeoff_csv(&reaggregate(&args.dir)?);
    let consistent = stored == rebuilt;
    if !consistent {
        eprintln!("{TRADEOFF_FILE} differs from re-aggregated run.csv files");
    }
    println!("{} files checked, {} problems", report.checked, report.problems.len());
    Ok(report.is_ok() && consistent)
}

/// Configuration problems are usage errors; everything else is a runtime
/// failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::Parse { .. } | Error::UnsupportedEnv(_)) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Train(a) => train(a).map(|_| true),
        Command::Sweep(a) => sweep(a),
        Command::Eval(a) => eval(a).map(|_| true),
        Command::Oracle(a) => oracle(a).map(|_| true),
        Command::EntropyMap(a) => entropy(a).map(|_| true),
        Command::Verify(a) => verify_dir(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
