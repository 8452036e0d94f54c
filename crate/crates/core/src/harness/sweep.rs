//! Fixed-budget sweep over the per-step planning budget.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate_tradeoff, BudgetAxis, RunCurve, TradeoffRow};
use super::csv::{entropy_csv, read_run_csv, run_csv, tradeoff_csv};
use super::entropy::{entropy_map, EntropyMap};
use super::manifest::{sha256_hex, write_tracked, FileEntry, Manifest, RunEntry, RunStatus, MANIFEST_VERSION};
use crate::agent::{run_training_observed, AgentConfig, PartialEpisode, RunRecord};
use crate::envs::Env;
use crate::error::{config, Error, Result};
use crate::mdp::Environment;
use crate::net::checkpoint;

/// Worker-pool size override.
pub const WORKERS_ENV: &str = "RTDP_LAB_WORKERS";
pub const TRADEOFF_FILE: &str = "tradeoff.csv";

/// Snapshot the policy entropy every `every_episodes` completed episodes
/// (planar environments only), plus once at the end of the run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySnapshots {
    pub every_episodes: u64,
    pub resolution: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Base agent settings; `n_mcts` is overridden per run.
    pub agent: AgentConfig,
    pub n_mcts_values: Vec<u32>,
    pub repetitions: u32,
    pub base_seed: u64,
    pub aggregation_fraction: f64,
    pub entropy: Option<EntropySnapshots>,
    /// Not part of the config hash.
    pub out_dir: PathBuf,
    /// Not part of the config hash; `None` reads `RTDP_LAB_WORKERS`, then
    /// falls back to the available parallelism.
    pub workers: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            agent: AgentConfig::default(),
            n_mcts_values: vec![4, 8, 16, 32, 64, 128],
            repetitions: 3,
            base_seed: 0,
            aggregation_fraction: 0.15,
            entropy: None,
            out_dir: PathBuf::from("results"),
            workers: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        if self.n_mcts_values.is_empty() || self.n_mcts_values.contains(&0) {
            return Err(config("n_mcts values must be positive"));
        }
        let mut sorted = self.n_mcts_values.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.n_mcts_values.len() {
            return Err(config("n_mcts values must be distinct"));
        }
        if self.repetitions == 0 {
            return Err(config("repetitions must be at least 1"));
        }
        if !(self.aggregation_fraction > 0.0 && self.aggregation_fraction < 1.0) {
            return Err(config("aggregation_fraction must lie in (0, 1)"));
        }
        if let Some(e) = self.entropy {
            if e.every_episodes == 0 || e.resolution < 2 {
                return Err(config("entropy snapshots need every_episodes >= 1 and resolution >= 2"));
            }
            if Env::new(self.agent.env, &self.agent.env_params)?.planar_bounds().is_none() {
                return Err(Error::UnsupportedEnv(format!(
                    "entropy maps need a planar state space; {} has none",
                    self.agent.env
                )));
            }
        }
        Ok(())
    }

    /// Seeds are `base_seed + repetition index`, shared across budgets.
    pub fn seeds(&self) -> Vec<u64> {
        (0..u64::from(self.repetitions)).map(|r| self.base_seed + r).collect()
    }

    /// Everything that determines results, as canonical JSON.
    pub fn hashed_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("out_dir");
            obj.remove("workers");
        }
        v
    }

    pub fn config_hash(&self) -> String {
        sha256_hex(self.hashed_json().to_string().as_bytes())
    }

    pub fn axis(&self) -> BudgetAxis {
        self.agent.budget.mode.into()
    }
}

/// Result of one sweep job.
#[derive(Debug)]
pub struct RunOutcome {
    pub n_mcts: u32,
    pub seed: u64,
    pub dir: String,
    pub result: std::result::Result<RunRecord, String>,
    pub entropy_maps: Vec<EntropyMap>,
    pub files: Vec<FileEntry>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub runs: Vec<RunOutcome>,
    pub tradeoff: Vec<TradeoffRow>,
    pub manifest: Manifest,
}

pub fn run_dir_name(n_mcts: u32, seed: u64) -> String {
    format!("runs/n{n_mcts}_seed{seed}")
}

/// Deterministic per-run summary written next to `run.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_mcts: u32,
    pub seed: u64,
    pub completed_episodes: usize,
    pub total_traces: u64,
    pub total_real_steps: u64,
    pub gradient_steps: u64,
    pub truncated_episode: Option<PartialEpisode>,
}

fn check_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"")?;
    std::fs::remove_file(probe)?;
    Ok(())
}

fn worker_count(cfg: &SweepConfig) -> usize {
    cfg.workers
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Run every `(n_mcts, seed)` combination, write per-run artifacts, the
/// trade-off table and the manifest.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    check_writable(&cfg.out_dir)?;

    let jobs: Vec<(u32, u64)> = cfg
        .n_mcts_values
        .iter()
        .flat_map(|&n| cfg.seeds().into_iter().map(move |s| (n, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(cfg))
        .build()
        .map_err(|e| config(e.to_string()))?;
    let runs: Vec<RunOutcome> = pool.install(|| {
        jobs.par_iter()
            .map(|&(n, seed)| run_job(cfg, n, seed))
            .collect()
    });

    let curves: Vec<RunCurve> = runs
        .iter()
        .filter_map(|r| {
            r.result.as_ref().ok().map(|rec| RunCurve {
                n_mcts: r.n_mcts,
                seed: r.seed,
                episodes: rec.episodes.clone(),
            })
        })
        .collect();
    let tradeoff = aggregate_tradeoff(&curves, cfg.aggregation_fraction, cfg.axis());

    let mut files: Vec<FileEntry> = runs.iter().flat_map(|r| r.files.iter().cloned()).collect();
    files.push(write_tracked(&cfg.out_dir, TRADEOFF_FILE, tradeoff_csv(&tradeoff).as_bytes())?);
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        config_hash: cfg.config_hash(),
        config: cfg.hashed_json(),
        runs: runs
            .iter()
            .map(|r| RunEntry {
                n_mcts: r.n_mcts,
                seed: r.seed,
                dir: r.dir.clone(),
                status: if r.result.is_ok() { RunStatus::Ok } else { RunStatus::Failed },
                error: r.result.as_ref().err().cloned(),
                episodes: r.result.as_ref().map_or(0, |rec| rec.episodes.len()),
                elapsed_seconds: r.result.as_ref().map_or(0.0, |rec| rec.elapsed_seconds),
            })
            .collect(),
        files,
    };
    manifest.save(&cfg.out_dir)?;
    Ok(SweepOutcome {
        runs,
        tradeoff,
        manifest,
    })
}

fn run_job(cfg: &SweepConfig, n_mcts: u32, seed: u64) -> RunOutcome {
    let dir = run_dir_name(n_mcts, seed);
    let attempt = catch_unwind(AssertUnwindSafe(|| train_and_write(cfg, n_mcts, seed, &dir)));
    let (result, entropy_maps, files) = match attempt {
        Ok(Ok((rec, maps, files))) => (Ok(rec), maps, files),
        Ok(Err(e)) => (Err(e.to_string()), Vec::new(), Vec::new()),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "run panicked".into());
            (Err(msg), Vec::new(), Vec::new())
        }
    };
    RunOutcome {
        n_mcts,
        seed,
        dir,
        result,
        entropy_maps,
        files,
    }
}

type JobArtifacts = (RunRecord, Vec<EntropyMap>, Vec<FileEntry>);

fn train_and_write(cfg: &SweepConfig, n_mcts: u32, seed: u64, dir: &str) -> Result<JobArtifacts> {
    let agent = AgentConfig {
        n_mcts,
        ..cfg.agent.clone()
    };
    let (record, maps) = train_with_snapshots(&agent, seed, cfg.entropy)?;
    let files = write_run_artifacts(&cfg.out_dir, dir, &record, &maps)?;
    Ok((record, maps, files))
}

/// Write `run.csv`, `checkpoint.bin`, `summary.json` and (when maps exist)
/// `entropy_map.csv` into `root/dir`.
pub fn write_run_artifacts(
    root: &Path,
    dir: &str,
    record: &RunRecord,
    maps: &[EntropyMap],
) -> Result<Vec<FileEntry>> {
    let rel = |name: &str| {
        if dir.is_empty() {
            name.to_string()
        } else {
            format!("{dir}/{name}")
        }
    };
    let mut files = vec![
        write_tracked(root, &rel("run.csv"), run_csv(&record.episodes, record.budget.mode).as_bytes())?,
        write_tracked(root, &rel("checkpoint.bin"), &checkpoint::to_bytes(&record.final_params))?,
    ];
    let summary = RunSummary {
        n_mcts: record.n_mcts,
        seed: record.seed,
        completed_episodes: record.episodes.len(),
        total_traces: record.total_traces,
        total_real_steps: record.total_real_steps,
        gradient_steps: record.gradient_steps,
        truncated_episode: record.truncated,
    };
    let summary = serde_json::to_string_pretty(&summary)? + "\n";
    files.push(write_tracked(root, &rel("summary.json"), summary.as_bytes())?);
    if !maps.is_empty() {
        files.push(write_tracked(root, &rel("entropy_map.csv"), entropy_csv(maps).as_bytes())?);
    }
    Ok(files)
}

/// Train once, collecting entropy maps if requested.
pub fn train_with_snapshots(
    agent: &AgentConfig,
    seed: u64,
    snapshots: Option<EntropySnapshots>,
) -> Result<(RunRecord, Vec<EntropyMap>)> {
    let env = Env::new(agent.env, &agent.env_params)?;
    let mut maps = Vec::new();
    let mut snapshot_err = None;
    let record = run_training_observed(agent, seed, |row, net| {
        if let Some(s) = snapshots {
            if row.episode % s.every_episodes == 0 {
                match entropy_map(net, &env, s.resolution, row.episode) {
                    Ok(m) => maps.push(m),
                    Err(e) => snapshot_err = Some(e),
                }
            }
        }
    })?;
    if let Some(e) = snapshot_err {
        return Err(e);
    }
    if let Some(s) = snapshots {
        maps.push(entropy_map(&record.final_params, &env, s.resolution, record.episodes.len() as u64)?);
    }
    Ok((record, maps))
}

/// Recompute the trade-off table from the `run.csv` files listed in a
/// sweep's manifest.
pub fn reaggregate(dir: &Path) -> Result<Vec<TradeoffRow>> {
    let manifest = Manifest::load(dir)?;
    let cfg: SweepConfig = serde_json::from_value(manifest.config.clone())?;
    let curves = manifest
        .runs
        .iter()
        .filter(|r| r.status == RunStatus::Ok)
        .map(|r| {
            Ok(RunCurve {
                n_mcts: r.n_mcts,
                seed: r.seed,
                episodes: read_run_csv(&dir.join(&r.dir).join("run.csv"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_tradeoff(&curves, cfg.aggregation_fraction, cfg.axis()))
}
