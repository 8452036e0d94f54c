//! Exact baselines: synchronous Q-value iteration over a tabular MDP and
//! exhaustive depth-limited search over a deterministic environment.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::mdp::{check_step, EnvSpec, EnvState, Environment, Transition};
use crate::rng::RngStream;

pub const DEFAULT_MAX_SWEEPS: usize = 1_000_000;
pub const DEFAULT_NODE_CAP: usize = 5_000_000;

/// Finite MDP with dense `(s, a, s')` tables.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transition_probs: Vec<f64>,
    rewards: Vec<f64>,
    gamma: f64,
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition_probs: Vec<f64>,
        rewards: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(contract("tabular MDP needs at least one state and one action"));
        }
        let len = n_states * n_actions * n_states;
        if transition_probs.len() != len || rewards.len() != len {
            return Err(contract(format!("tables must have {len} entries")));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(contract("gamma must lie in [0, 1]"));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(contract("rewards must be finite"));
        }
        for (row_ix, row) in transition_probs.chunks(n_states).enumerate() {
            if row.iter().any(|p| !(*p >= 0.0)) {
                return Err(contract("transition probabilities must be nonnegative"));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                let (s, a) = (row_ix / n_actions, row_ix % n_actions);
                return Err(contract(format!(
                    "transition row (s={s}, a={a}) sums to {total}, expected 1"
                )));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            transition_probs,
            rewards,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(contract("gamma must lie in [0, 1]"));
        }
        self.gamma = gamma;
        Ok(self)
    }

    fn offset(&self, s: usize, a: usize) -> usize {
        (s * self.n_actions + a) * self.n_states
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition_probs[self.offset(s, a) + next]
    }

    pub fn reward(&self, s: usize, a: usize, next: usize) -> f64 {
        self.rewards[self.offset(s, a) + next]
    }

    /// Expected immediate reward of `(s, a)`.
    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        let o = self.offset(s, a);
        (0..self.n_states)
            .map(|n| self.transition_probs[o + n] * self.rewards[o + n])
            .sum()
    }

    /// Load from the JSON transition-list schema (see [`MdpFile`]).
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: MdpFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        file.into_mdp()
    }
}

/// On-disk MDP description.
///
/// ```json
/// {
///   "n_states": 2, "n_actions": 1, "gamma": 0.9,
///   "transitions": [
///     {"state": 0, "action": 0, "next_state": 1, "prob": 1.0, "reward": 1.0},
///     {"state": 1, "action": 0, "next_state": 1, "prob": 1.0, "reward": 0.0}
///   ]
/// }
/// ```
///
/// Every `(state, action)` pair needs outgoing probabilities summing to 1.
/// Repeated `(state, action, next_state)` entries add their probabilities;
/// their rewards must agree.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    pub n_states: usize,
    pub n_actions: usize,
    #[serde(default = "one")]
    pub gamma: f64,
    pub transitions: Vec<MdpFileTransition>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFileTransition {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub prob: f64,
    #[serde(default)]
    pub reward: f64,
}

fn one() -> f64 {
    1.0
}

impl MdpFile {
    pub fn into_mdp(self) -> Result<TabularMdp> {
        let (ns, na) = (self.n_states, self.n_actions);
        let mut probs = vec![0.0; ns * na * ns];
        let mut rewards = vec![0.0; ns * na * ns];
        let mut seen = vec![false; ns * na * ns];
        for t in &self.transitions {
            if t.state >= ns || t.next_state >= ns || t.action >= na {
                return Err(contract(format!(
                    "transition ({}, {}, {}) indexes outside the declared sizes",
                    t.state, t.action, t.next_state
                )));
            }
            let ix = (t.state * na + t.action) * ns + t.next_state;
            if seen[ix] && rewards[ix] != t.reward {
                return Err(contract("conflicting rewards for a repeated transition"));
            }
            seen[ix] = true;
            probs[ix] += t.prob;
            rewards[ix] = t.reward;
        }
        TabularMdp::new(ns, na, probs, rewards, self.gamma)
    }
}

/// State-action value table.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if n_actions == 0 || rows.iter().any(|r| r.len() != n_actions) {
            return Err(contract("Q rows must be nonempty and of equal length"));
        }
        Ok(Self {
            n_actions,
            values: rows.concat(),
        })
    }

    pub fn n_states(&self) -> usize {
        self.values.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn state_value(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_distance(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with header `state,q_0,...,q_{n-1},greedy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state");
        for a in 0..self.n_actions {
            out.push_str(&format!(",q_{a}"));
        }
        out.push_str(",greedy\n");
        for (s, a_star) in greedy_policy(self).into_iter().enumerate() {
            out.push_str(&s.to_string());
            for q in self.row(s) {
                out.push_str(&format!(",{q}"));
            }
            out.push_str(&format!(",{a_star}\n"));
        }
        out
    }
}

/// One synchronous Bellman optimality sweep.
pub fn bellman_sweep(mdp: &TabularMdp, q: &QTable) -> QTable {
    let v: Vec<f64> = (0..mdp.n_states).map(|s| q.state_value(s)).collect();
    let mut next = QTable::zeros(mdp.n_states, mdp.n_actions);
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let o = mdp.offset(s, a);
            next.values[s * mdp.n_actions + a] = (0..mdp.n_states)
                .filter(|&n| mdp.transition_probs[o + n] != 0.0)
                .map(|n| mdp.transition_probs[o + n] * (mdp.rewards[o + n] + mdp.gamma * v[n]))
                .sum();
        }
    }
    next
}

/// Synchronous Q-value iteration until the sup-norm change of a sweep is at
/// most `tolerance`.
pub fn q_value_iteration(mdp: &TabularMdp, tolerance: f64) -> Result<QTable> {
    q_value_iteration_capped(mdp, tolerance, DEFAULT_MAX_SWEEPS)
}

pub fn q_value_iteration_capped(
    mdp: &TabularMdp,
    tolerance: f64,
    max_sweeps: usize,
) -> Result<QTable> {
    if !(tolerance > 0.0) {
        return Err(contract("tolerance must be positive"));
    }
    let mut q = QTable::zeros(mdp.n_states, mdp.n_actions);
    let mut residual = f64::INFINITY;
    for _ in 0..max_sweeps {
        let next = bellman_sweep(mdp, &q);
        residual = next.sup_distance(&q);
        q = next;
        if !residual.is_finite() {
            break;
        }
        if residual <= tolerance {
            return Ok(q);
        }
    }
    Err(Error::NonConvergence {
        iterations: max_sweeps,
        residual,
    })
}

/// Argmax action per state, lowest index on ties.
pub fn greedy_policy(q: &QTable) -> Vec<usize> {
    (0..q.n_states()).map(|s| argmax_lowest(q.row(s))).collect()
}

pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Exact depth-limited expectimax value of every root action on a
/// deterministic environment. States reached at the horizon are valued by
/// `leaf_value`; terminal states are worth 0.
pub fn exhaustive_search<E, F>(
    env: &E,
    state: &EnvState,
    depth: usize,
    gamma: f64,
    leaf_value: F,
) -> Result<Vec<f64>>
where
    E: Environment + ?Sized,
    F: Fn(&EnvState) -> f64,
{
    exhaustive_search_capped(env, state, depth, gamma, &leaf_value, DEFAULT_NODE_CAP)
}

pub fn exhaustive_search_capped<E, F>(
    env: &E,
    state: &EnvState,
    depth: usize,
    gamma: f64,
    leaf_value: F,
    node_cap: usize,
) -> Result<Vec<f64>>
where
    E: Environment + ?Sized,
    F: Fn(&EnvState) -> f64,
{
    if depth == 0 {
        return Err(contract("exhaustive search depth must be at least 1"));
    }
    if state.terminal {
        return Err(contract("exhaustive search from a terminal state"));
    }
    let mut search = Exhaustive {
        env,
        gamma,
        leaf_value: &leaf_value,
        rng: RngStream::new(0),
        nodes: 0,
        cap: node_cap,
    };
    search.action_values(state, depth)
}

struct Exhaustive<'a, E: ?Sized, F> {
    env: &'a E,
    gamma: f64,
    leaf_value: &'a F,
    rng: RngStream,
    nodes: usize,
    cap: usize,
}

impl<E, F> Exhaustive<'_, E, F>
where
    E: Environment + ?Sized,
    F: Fn(&EnvState) -> f64,
{
    fn action_values(&mut self, state: &EnvState, depth: usize) -> Result<Vec<f64>> {
        (0..self.env.spec().action_count)
            .map(|a| {
                self.nodes += 1;
                if self.nodes > self.cap {
                    return Err(Error::SearchExplosion { cap: self.cap });
                }
                let t = self.env.step(state, a, &mut self.rng)?;
                Ok(t.reward + self.gamma * self.state_value(&t, depth - 1)?)
            })
            .collect()
    }

    fn state_value(&mut self, t: &Transition, depth: usize) -> Result<f64> {
        if t.terminal {
            Ok(0.0)
        } else if depth == 0 {
            Ok((self.leaf_value)(&t.next_state))
        } else {
            let values = self.action_values(&t.next_state, depth)?;
            Ok(values.into_iter().fold(f64::NEG_INFINITY, f64::max))
        }
    }
}

/// Unroll a deterministic environment from `root` into a tabular MDP of the
/// given horizon. State 0 is the root; the last state is an absorbing sink
/// reached from terminal transitions and from the horizon.
pub fn unroll_to_tabular<E: Environment + ?Sized>(
    env: &E,
    root: &EnvState,
    depth: usize,
    gamma: f64,
) -> Result<TabularMdp> {
    let na = env.spec().action_count;
    let mut rng = RngStream::new(0);
    // (state, remaining depth); children filled per action.
    let mut states: Vec<(EnvState, usize)> = vec![(root.clone(), depth)];
    let mut edges: Vec<Vec<(Option<usize>, f64)>> = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let (state, remaining) = states[i].clone();
        let mut out = Vec::with_capacity(na);
        for a in 0..na {
            if remaining == 0 || state.terminal {
                out.push((None, 0.0));
                continue;
            }
            let t = env.step(&state, a, &mut rng)?;
            if t.terminal || remaining == 1 {
                out.push((None, t.reward));
            } else {
                states.push((t.next_state, remaining - 1));
                out.push((Some(states.len() - 1), t.reward));
            }
            if states.len() > DEFAULT_NODE_CAP {
                return Err(Error::SearchExplosion { cap: DEFAULT_NODE_CAP });
            }
        }
        edges.push(out);
        i += 1;
    }
    let sink = states.len();
    let ns = sink + 1;
    let mut probs = vec![0.0; ns * na * ns];
    let mut rewards = vec![0.0; ns * na * ns];
    for (s, out) in edges.iter().enumerate() {
        for (a, (child, r)) in out.iter().enumerate() {
            let next = child.unwrap_or(sink);
            let ix = (s * na + a) * ns + next;
            probs[ix] = 1.0;
            rewards[ix] = *r;
        }
    }
    for a in 0..na {
        probs[(sink * na + a) * ns + sink] = 1.0;
    }
    TabularMdp::new(ns, na, probs, rewards, gamma)
}

/// A deterministic finite-horizon tree MDP. Observation is `[node id]`;
/// transitions out of depth-`depth - 1` nodes are terminal.
#[derive(Clone, Debug)]
pub struct DeterministicTree {
    spec: EnvSpec,
    depth: usize,
    /// `children[node][action] = (child id, reward)`.
    children: Vec<Vec<(usize, f64)>>,
    node_depth: Vec<usize>,
}

impl DeterministicTree {
    /// Full `branching`-ary tree with explicit per-edge rewards listed in
    /// breadth-first edge order.
    pub fn from_rewards(depth: usize, branching: usize, rewards: &[f64], gamma: f64) -> Result<Self> {
        if depth == 0 || branching < 2 {
            return Err(contract("tree needs depth >= 1 and branching >= 2"));
        }
        let edge_count: usize = (1..=depth).map(|d| branching.pow(d as u32)).sum();
        if rewards.len() != edge_count {
            return Err(contract(format!("tree expects {edge_count} edge rewards")));
        }
        let mut children = Vec::new();
        let mut node_depth = vec![0];
        let mut next_id = 1;
        let mut edge = 0;
        let mut node = 0;
        while node < node_depth.len() {
            if node_depth[node] < depth {
                let mut out = Vec::with_capacity(branching);
                for _ in 0..branching {
                    out.push((next_id, rewards[edge]));
                    node_depth.push(node_depth[node] + 1);
                    next_id += 1;
                    edge += 1;
                }
                children.push(out);
            } else {
                children.push(Vec::new());
            }
            node += 1;
        }
        Ok(Self {
            spec: EnvSpec {
                name: "tree".into(),
                action_count: branching,
                obs_dim: 1,
                max_episode_steps: depth as u32,
                gamma,
            },
            depth,
            children,
            node_depth,
        })
    }

    /// Random tree with edge rewards uniform in `[low, high)`.
    pub fn random(
        depth: usize,
        branching: usize,
        (low, high): (f64, f64),
        gamma: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let edge_count: usize = (1..=depth).map(|d| branching.pow(d as u32)).sum();
        let rewards: Vec<f64> = (0..edge_count).map(|_| rng.uniform_range(low, high)).collect();
        Self::from_rewards(depth, branching, &rewards, gamma)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn root(&self) -> EnvState {
        EnvState::initial(vec![0.0])
    }
}

impl Environment for DeterministicTree {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, _rng: &mut RngStream) -> EnvState {
        self.root()
    }

    fn step(&self, state: &EnvState, action: usize, _rng: &mut RngStream) -> Result<Transition> {
        check_step(&self.spec, state, action)?;
        let node = state.obs[0] as usize;
        let (child, reward) = *self
            .children
            .get(node)
            .and_then(|c| c.get(action))
            .ok_or_else(|| contract(format!("tree node {node} has no children")))?;
        let terminal = self.node_depth[child] >= self.depth;
        Ok(Transition {
            next_state: EnvState {
                obs: vec![child as f64],
                steps_taken: state.steps_taken + 1,
                terminal,
            },
            reward,
            terminal,
        })
    }
}
