//! The plan / learn / act loop.
//!
//! At every real state the agent (1) runs a fresh search with the current
//! network, (2) stores the search's policy/value target and takes gradient
//! steps on replayed minibatches, and (3) commits to an action and steps
//! the real environment. The run stops when the compute budget is spent.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::envs::{Env, EnvKind, EnvParams};
use crate::error::{config, Result};
use crate::mcts::{run_search, SearchConfig, SearchResult, SelectionVariant, UnvisitedValue};
use crate::mdp::{EnvState, Environment};
use crate::net::{adam_step, AdamConfig, NetParams, NetShape, OptState, ReplayBuffer, TrainingTarget};
use crate::oracle::argmax_lowest;
use crate::rng::RngStream;

/// Linear decay of the exploration constant over real steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CSchedule {
    pub c_start: f64,
    pub c_end: f64,
    pub decay_steps: u64,
}

impl CSchedule {
    /// Per-task schedules used in the reference experiments.
    pub fn for_env(kind: EnvKind) -> Self {
        let (c_start, c_end, decay_steps) = match kind {
            EnvKind::CartPole => (0.8, 0.05, 500),
            EnvKind::MountainCar => (5.0, 0.5, 5000),
            EnvKind::RaceGrid => (1.0, 0.05, 1500),
        };
        Self {
            c_start,
            c_end,
            decay_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_start >= self.c_end && self.c_end >= 0.0) || self.decay_steps == 0 {
            return Err(config("c schedule needs c_start >= c_end >= 0 and decay_steps >= 1"));
        }
        Ok(())
    }
}

/// Exploration constant for the given global real-step index.
pub fn c_schedule(real_step: u64, schedule: &CSchedule) -> f64 {
    if real_step >= schedule.decay_steps {
        return schedule.c_end;
    }
    let frac = real_step as f64 / schedule.decay_steps as f64;
    schedule.c_start + (schedule.c_end - schedule.c_start) * frac
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionCommit {
    /// Sample from the normalized visit counts.
    #[default]
    SampleCounts,
    /// Most visited action, lowest index on ties.
    ArgmaxCounts,
}

pub fn commit_action(result: &SearchResult, mode: ActionCommit, rng: &mut RngStream) -> usize {
    match mode {
        ActionCommit::ArgmaxCounts => {
            let counts: Vec<f64> = result.root_counts.iter().map(|&n| n as f64).collect();
            argmax_lowest(&counts)
        }
        ActionCommit::SampleCounts => {
            let u = rng.uniform();
            let mut acc = 0.0;
            let last = result.policy_target.iter().rposition(|p| *p > 0.0).unwrap_or(0);
            for (a, p) in result.policy_target.iter().enumerate() {
                acc += p;
                if u < acc && *p > 0.0 {
                    return a;
                }
            }
            last
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    WallClockSeconds,
    TotalTraces,
}

/// Total compute for one run, counted over planning, learning and acting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    pub mode: BudgetMode,
    pub amount: f64,
}

impl BudgetSpec {
    pub fn traces(amount: u64) -> Self {
        Self {
            mode: BudgetMode::TotalTraces,
            amount: amount as f64,
        }
    }

    pub fn seconds(amount: f64) -> Self {
        Self {
            mode: BudgetMode::WallClockSeconds,
            amount,
        }
    }

    /// Wall-clock budgets of the reference experiments.
    pub fn reference_wall_clock(kind: EnvKind) -> Self {
        Self::seconds(match kind {
            EnvKind::CartPole => 500.0,
            EnvKind::MountainCar => 150.0 * 60.0,
            EnvKind::RaceGrid => 270.0 * 60.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amount > 0.0 && self.amount.is_finite()) {
            return Err(config("budget amount must be positive"));
        }
        Ok(())
    }

    /// Whether another real step (costing `n_mcts` traces) is affordable.
    fn allows_step(&self, traces_used: u64, n_mcts: u32, elapsed: f64) -> bool {
        match self.mode {
            BudgetMode::TotalTraces => (traces_used + u64::from(n_mcts)) as f64 <= self.amount,
            BudgetMode::WallClockSeconds => elapsed < self.amount,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub adam: AdamConfig,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            batch_size: crate::net::buffer::DEFAULT_BATCH_SIZE,
            buffer_capacity: crate::net::buffer::DEFAULT_CAPACITY,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub env: EnvKind,
    pub env_params: EnvParams,
    pub n_mcts: u32,
    pub variant: SelectionVariant,
    pub unvisited: UnvisitedValue,
    /// `None` selects the task's reference schedule.
    pub c_schedule: Option<CSchedule>,
    pub train_steps_per_real_step: u32,
    pub action_commit: ActionCommit,
    pub budget: BudgetSpec,
    pub net: NetConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self::for_env(EnvKind::CartPole)
    }
}

impl AgentConfig {
    pub fn for_env(env: EnvKind) -> Self {
        Self {
            env,
            env_params: EnvParams::default(),
            n_mcts: 8,
            variant: SelectionVariant::StandardPuct,
            unvisited: UnvisitedValue::NodeValue,
            c_schedule: None,
            train_steps_per_real_step: 1,
            action_commit: ActionCommit::SampleCounts,
            budget: BudgetSpec::traces(200_000),
            net: NetConfig::default(),
        }
    }

    pub fn schedule(&self) -> CSchedule {
        self.c_schedule.unwrap_or_else(|| CSchedule::for_env(self.env))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_mcts == 0 {
            return Err(config("n_mcts must be at least 1"));
        }
        self.schedule().validate()?;
        self.budget.validate()?;
        if self.net.batch_size == 0 || self.net.buffer_capacity < self.net.batch_size {
            return Err(config("need 0 < batch_size <= buffer_capacity"));
        }
        if self.net.hidden.is_empty() || self.net.hidden.contains(&0) {
            return Err(config("hidden layer sizes must be positive"));
        }
        Env::new(self.env, &self.env_params)?;
        Ok(())
    }

    pub fn net_shape(&self, env: &Env) -> Result<NetShape> {
        let spec = env.spec();
        let input_dim = env.features(&EnvState::initial(vec![0.0; spec.obs_dim])).len();
        NetShape::new(input_dim, self.net.hidden.clone(), spec.action_count)
    }
}

/// One completed episode. Cumulative columns count from the start of the run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: u64,
    pub real_steps: u64,
    pub traces: u64,
    pub seconds: f64,
    #[serde(rename = "return")]
    pub ret: f64,
}

/// Episode cut short by the end of the budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialEpisode {
    pub steps: u64,
    #[serde(rename = "return")]
    pub ret: f64,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub seed: u64,
    pub n_mcts: u32,
    pub budget: BudgetSpec,
    pub episodes: Vec<EpisodeRow>,
    pub truncated: Option<PartialEpisode>,
    pub total_traces: u64,
    pub total_real_steps: u64,
    pub gradient_steps: u64,
    pub elapsed_seconds: f64,
    pub final_params: NetParams,
}

impl RunRecord {
    pub fn returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.ret).collect()
    }
}

/// Run one training job.
pub fn run_training(config: &AgentConfig, seed: u64) -> Result<RunRecord> {
    run_training_observed(config, seed, |_, _| {})
}

/// [`run_training`], calling `on_episode` with the network after every
/// completed episode.
pub fn run_training_observed<F>(config: &AgentConfig, seed: u64, mut on_episode: F) -> Result<RunRecord>
where
    F: FnMut(&EpisodeRow, &NetParams),
{
    config.validate()?;
    let env = Env::new(config.env, &config.env_params)?;
    let schedule = config.schedule();
    let root = RngStream::new(seed);
    let mut env_rng = root.substream("env");
    let mut mcts_rng = root.substream("mcts");
    let mut buffer_rng = root.substream("buffer");
    let mut action_rng = root.substream("action");

    let mut net = NetParams::init(config.net_shape(&env)?, &mut root.substream("net-init"));
    let mut opt = OptState::new(config.net.adam, net.flat().len());
    let mut buffer = ReplayBuffer::new(config.net.buffer_capacity);

    let mut search = SearchConfig {
        n_mcts: config.n_mcts,
        c: schedule.c_start,
        gamma: env.spec().gamma,
        variant: config.variant,
        unvisited: config.unvisited,
    };

    let start = Instant::now();
    let mut episodes = Vec::new();
    let mut traces = 0u64;
    let mut real_steps = 0u64;
    let mut gradient_steps = 0u64;
    let mut state = env.reset(&mut env_rng);
    let mut ep_return = 0.0;
    let mut ep_steps = 0u64;

    while config
        .budget
        .allows_step(traces, config.n_mcts, start.elapsed().as_secs_f64())
    {
        // Plan.
        search.c = c_schedule(real_steps, &schedule);
        let result = run_search(&state, &net, &env, &search, &mut mcts_rng)?;
        traces += u64::from(result.traces_used);

        // Learn.
        let target = TrainingTarget {
            state_obs: result.root_features.clone(),
            policy_target: result.policy_target.clone(),
            value_target: result.value_target,
        };
        target.validate()?;
        buffer.push(target);
        for _ in 0..config.train_steps_per_real_step {
            if let Some(batch) = buffer.sample(&mut buffer_rng, config.net.batch_size) {
                let (grads, _) = net.gradients(&batch)?;
                adam_step(&mut net, &grads, &mut opt)?;
                gradient_steps += 1;
            }
        }

        // Act.
        let action = commit_action(&result, config.action_commit, &mut action_rng);
        let t = env.step(&state, action, &mut env_rng)?;
        real_steps += 1;
        ep_steps += 1;
        ep_return += t.reward;
        if t.terminal {
            let row = EpisodeRow {
                episode: episodes.len() as u64,
                real_steps,
                traces,
                seconds: start.elapsed().as_secs_f64(),
                ret: ep_return,
            };
            on_episode(&row, &net);
            episodes.push(row);
            state = env.reset(&mut env_rng);
            ep_return = 0.0;
            ep_steps = 0;
        } else {
            state = t.next_state;
        }
    }

    Ok(RunRecord {
        seed,
        n_mcts: config.n_mcts,
        budget: config.budget,
        episodes,
        truncated: (ep_steps > 0).then_some(PartialEpisode {
            steps: ep_steps,
            ret: ep_return,
        }),
        total_traces: traces,
        total_real_steps: real_steps,
        gradient_steps,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        final_params: net,
    })
}

/// Greedy evaluation episodes with a fixed network. With `n_mcts == 0` the
/// agent acts on the policy head alone; otherwise it searches with the
/// final exploration constant and plays the most visited action.
pub fn evaluate(
    config: &AgentConfig,
    params: &NetParams,
    n_mcts: u32,
    episodes: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let env = Env::new(config.env, &config.env_params)?;
    if params.shape() != &config.net_shape(&env)? {
        return Err(config_err_shape());
    }
    let root = RngStream::new(seed);
    let mut env_rng = root.substream("env");
    let mut mcts_rng = root.substream("mcts");
    let search = SearchConfig {
        n_mcts: n_mcts.max(1),
        c: config.schedule().c_end,
        gamma: env.spec().gamma,
        variant: config.variant,
        unvisited: config.unvisited,
    };
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut state = env.reset(&mut env_rng);
        let mut ret = 0.0;
        while !state.terminal {
            let action = if n_mcts == 0 {
                argmax_lowest(&params.forward(&env.features(&state))?.0)
            } else {
                let r = run_search(&state, params, &env, &search, &mut mcts_rng)?;
                commit_action(&r, ActionCommit::ArgmaxCounts, &mut mcts_rng)
            };
            let t = env.step(&state, action, &mut env_rng)?;
            ret += t.reward;
            state = t.next_state;
        }
        returns.push(ret);
    }
    Ok(returns)
}

fn config_err_shape() -> crate::Error {
    config("checkpoint shape does not match the environment and network config")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result_with_counts(counts: Vec<u32>) -> SearchResult {
        SearchResult {
            policy_target: crate::mcts::policy_target(&counts),
            root_mean_q: vec![None; counts.len()],
            root_counts: counts,
            value_target: 0.0,
            traces_used: 0,
            root_features: Vec::new(),
        }
    }

    #[test]
    fn cartpole_schedule() {
        let s = CSchedule::for_env(EnvKind::CartPole);
        assert_eq!(c_schedule(0, &s), 0.8);
        assert!((c_schedule(250, &s) - 0.425).abs() < 1e-15);
        assert_eq!(c_schedule(500, &s), 0.05);
        assert_eq!(c_schedule(10_000, &s), 0.05);
    }

    #[test]
    fn schedule_validation() {
        let bad = CSchedule {
            c_start: 0.1,
            c_end: 0.5,
            decay_steps: 10,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn one_hot_commit_either_mode() {
        let r = result_with_counts(vec![0, 5, 0]);
        let mut rng = RngStream::new(0);
        for _ in 0..100 {
            assert_eq!(commit_action(&r, ActionCommit::SampleCounts, &mut rng), 1);
        }
        assert_eq!(commit_action(&r, ActionCommit::ArgmaxCounts, &mut rng), 1);
    }

    #[test]
    fn argmax_commit_lowest_tie() {
        let mut rng = RngStream::new(0);
        assert_eq!(commit_action(&result_with_counts(vec![3, 1]), ActionCommit::ArgmaxCounts, &mut rng), 0);
        assert_eq!(commit_action(&result_with_counts(vec![2, 2]), ActionCommit::ArgmaxCounts, &mut rng), 0);
    }

    #[test]
    fn sample_commit_frequency() {
        // Binomial(10_000, 0.75): sd ~ 0.0043, so +-0.02 is over 4.6 sd.
        let r = result_with_counts(vec![3, 1]);
        let mut rng = RngStream::new(77);
        let zeros = (0..10_000)
            .filter(|_| commit_action(&r, ActionCommit::SampleCounts, &mut rng) == 0)
            .count();
        assert!((zeros as f64 / 10_000.0 - 0.75).abs() < 0.02);
    }

    fn tiny(env: EnvKind, n_mcts: u32, traces: u64) -> AgentConfig {
        AgentConfig {
            n_mcts,
            budget: BudgetSpec::traces(traces),
            net: NetConfig {
                hidden: vec![16, 16],
                ..NetConfig::default()
            },
            ..AgentConfig::for_env(env)
        }
    }

    #[test]
    fn trace_budget_gives_exact_real_steps() {
        let rec = run_training(&tiny(EnvKind::CartPole, 4, 40), 1).unwrap();
        assert_eq!(rec.total_real_steps, 10);
        assert_eq!(rec.total_traces, 40);
    }

    #[test]
    fn budget_bounds_hold() {
        let rec = run_training(&tiny(EnvKind::MountainCar, 7, 500), 2).unwrap();
        assert!(rec.total_traces <= 500 && rec.total_traces > 500 - 7);
        assert!(rec.truncated.is_some());
    }

    #[test]
    fn rows_are_cumulative() {
        let rec = run_training(&tiny(EnvKind::CartPole, 2, 4000), 3).unwrap();
        assert!(rec.episodes.len() > 3);
        for w in rec.episodes.windows(2) {
            assert!(w[1].real_steps > w[0].real_steps);
            assert!(w[1].traces > w[0].traces);
            assert!(w[1].seconds >= w[0].seconds);
            assert_eq!(w[1].episode, w[0].episode + 1);
        }
    }

    #[test]
    fn trace_mode_is_deterministic() {
        let cfg = tiny(EnvKind::RaceGrid, 4, 2000);
        let a = run_training(&cfg, 9).unwrap();
        let b = run_training(&cfg, 9).unwrap();
        assert_eq!(a.episodes.iter().map(|e| (e.real_steps, e.traces, e.ret.to_bits())).collect::<Vec<_>>(),
                   b.episodes.iter().map(|e| (e.real_steps, e.traces, e.ret.to_bits())).collect::<Vec<_>>());
        assert_eq!(a.final_params, b.final_params);
    }

    #[test]
    fn wall_clock_budget_stops() {
        let mut cfg = tiny(EnvKind::CartPole, 4, 1);
        cfg.budget = BudgetSpec::seconds(0.2);
        let rec = run_training(&cfg, 0).unwrap();
        assert!(rec.total_real_steps > 0);
        assert!(rec.elapsed_seconds < 5.0);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = AgentConfig::for_env(EnvKind::MountainCar);
        let text = toml::to_string(&cfg).unwrap();
        let back: AgentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.schedule(), CSchedule::for_env(EnvKind::MountainCar));
    }
}
