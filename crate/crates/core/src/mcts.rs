//! Network-guided Monte Carlo tree search.
//!
//! Each trace selects edges from the root until it leaves the tree, expands
//! one new node (priors from the policy head, leaf value from the value
//! head, no rollout) and backs the discounted payoff up the path. A fresh
//! tree is built for every call to [`run_search`].

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::mdp::{EnvState, Environment};
use crate::net::NetParams;
use crate::rng::RngStream;

/// Source of priors and leaf values.
pub trait Evaluator {
    /// Returns `(priors, value)` for network input `features`.
    fn evaluate(&self, features: &[f64]) -> Result<(Vec<f64>, f64)>;
}

impl Evaluator for NetParams {
    fn evaluate(&self, features: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.forward(features)
    }
}

/// Uniform priors and zero value: plain UCT-style search with no learned
/// guidance.
#[derive(Clone, Copy, Debug)]
pub struct UniformEvaluator {
    pub action_count: usize,
}

impl Evaluator for UniformEvaluator {
    fn evaluate(&self, _features: &[f64]) -> Result<(Vec<f64>, f64)> {
        Ok((vec![1.0 / self.action_count as f64; self.action_count], 0.0))
    }
}

/// Exploration term of the selection rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionVariant {
    /// `Q + c * prior * sqrt(n(s)) / (1 + n(s,a))`
    #[default]
    StandardPuct,
    /// `Q + c * prior * sqrt(n(s,a) / (1 + n(s)))`
    LiteralEq7,
}

/// Value used for `Q(s,a)` of an action that has not been tried yet.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnvisitedValue {
    #[default]
    Zero,
    /// The value-head estimate of the node itself.
    NodeValue,
    /// Every action is tried once before any is repeated, in order of prior
    /// probability; afterwards only visited means are compared.
    TryAllFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub n_mcts: u32,
    pub c: f64,
    pub gamma: f64,
    pub variant: SelectionVariant,
    pub unvisited: UnvisitedValue,
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_mcts == 0 {
            return Err(contract("n_mcts must be at least 1"));
        }
        if !(self.c >= 0.0) || !(0.0..=1.0).contains(&self.gamma) {
            return Err(contract("need c >= 0 and gamma in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SearchNode {
    pub state: EnvState,
    /// Reward of the transition that produced this node (0 for the root).
    pub reward_into: f64,
    pub terminal: bool,
    pub priors: Vec<f64>,
    pub counts: Vec<u32>,
    pub totals: Vec<f64>,
    pub children: Vec<Option<usize>>,
    /// Value-head estimate recorded at expansion.
    pub value_estimate: f64,
    expanded: bool,
}

impl SearchNode {
    pub fn new(state: EnvState, reward_into: f64, action_count: usize) -> Self {
        let terminal = state.terminal;
        Self {
            state,
            reward_into,
            terminal,
            priors: Vec::new(),
            counts: vec![0; action_count],
            totals: vec![0.0; action_count],
            children: vec![None; action_count],
            value_estimate: 0.0,
            expanded: false,
        }
    }

    /// Node with explicit priors and statistics, already expanded.
    pub fn with_stats(priors: Vec<f64>, counts: Vec<u32>, mean_q: Vec<f64>) -> Self {
        let totals = counts.iter().zip(&mean_q).map(|(n, q)| *n as f64 * q).collect();
        let na = priors.len();
        Self {
            state: EnvState::initial(Vec::new()),
            reward_into: 0.0,
            terminal: false,
            priors,
            counts,
            totals,
            children: vec![None; na],
            value_estimate: 0.0,
            expanded: true,
        }
    }

    pub fn is_expanded(&self) -> bool {
        self.expanded
    }

    pub fn visits(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn mean_q(&self, action: usize) -> Option<f64> {
        (self.counts[action] > 0).then(|| self.totals[action] / self.counts[action] as f64)
    }
}

#[derive(Clone, Debug)]
pub struct SearchTree {
    pub nodes: Vec<SearchNode>,
}

impl SearchTree {
    pub fn root(&self) -> &SearchNode {
        &self.nodes[0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub root_counts: Vec<u32>,
    /// `None` for actions never tried from the root.
    pub root_mean_q: Vec<Option<f64>>,
    pub policy_target: Vec<f64>,
    pub value_target: f64,
    pub traces_used: u32,
    /// Network input at the root, for building a training target.
    pub root_features: Vec<f64>,
}

/// Pick the edge to follow from an expanded node. Exact score ties are
/// broken uniformly at random.
pub fn select_child(
    node: &SearchNode,
    c: f64,
    variant: SelectionVariant,
    unvisited: UnvisitedValue,
    rng: &mut RngStream,
) -> usize {
    let n_parent = node.visits() as f64;
    let fallback = match unvisited {
        UnvisitedValue::Zero => 0.0,
        UnvisitedValue::NodeValue => node.value_estimate,
        UnvisitedValue::TryAllFirst => {
            if node.counts.contains(&0) {
                let untried = (0..node.counts.len()).filter(|&a| node.counts[a] == 0);
                return pick_best(untried.map(|a| (a, node.priors[a])), rng);
            }
            0.0
        }
    };
    let scores = (0..node.counts.len()).map(|a| {
        let n = node.counts[a] as f64;
        let q = node.mean_q(a).unwrap_or(fallback);
        let bonus = match variant {
            SelectionVariant::StandardPuct => n_parent.sqrt() / (1.0 + n),
            SelectionVariant::LiteralEq7 => (n / (1.0 + n_parent)).sqrt(),
        };
        (a, q + c * node.priors[a] * bonus)
    });
    pick_best(scores, rng)
}

/// Highest-scoring action, exact ties broken uniformly at random.
fn pick_best(scores: impl Iterator<Item = (usize, f64)>, rng: &mut RngStream) -> usize {
    let scores: Vec<(usize, f64)> = scores.collect();
    let mut best = f64::NEG_INFINITY;
    let mut ties: Vec<usize> = Vec::new();
    for &(a, s) in &scores {
        if s > best {
            best = s;
            ties.clear();
            ties.push(a);
        } else if s == best {
            ties.push(a);
        }
    }
    match ties.len() {
        // Only reachable with NaN scores.
        0 => scores[rng.index(scores.len())].0,
        1 => ties[0],
        k => ties[rng.index(k)],
    }
}

/// Expand a leaf: store priors from the evaluator and return the leaf value
/// (0 for terminal nodes, which are never expanded).
pub fn expand_evaluate<E, V>(node: &mut SearchNode, env: &E, evaluator: &V) -> Result<f64>
where
    E: Environment + ?Sized,
    V: Evaluator + ?Sized,
{
    if node.terminal {
        return Ok(0.0);
    }
    if node.expanded {
        return Err(contract("node is already expanded"));
    }
    let (priors, value) = evaluator.evaluate(&env.features(&node.state))?;
    if priors.len() != node.counts.len() {
        return Err(contract(format!(
            "evaluator returned {} priors for {} actions",
            priors.len(),
            node.counts.len()
        )));
    }
    node.priors = priors;
    node.value_estimate = value;
    node.expanded = true;
    Ok(value)
}

/// Propagate a leaf value along `path` (root first). Each edge receives the
/// discounted payoff `reward_into(child) + gamma * G` of the trace.
pub fn backup(tree: &mut SearchTree, path: &[(usize, usize)], leaf_value: f64, gamma: f64) {
    let mut g = leaf_value;
    for &(node, action) in path.iter().rev() {
        let child = tree.nodes[node].children[action].expect("backup along an unexpanded edge");
        g = tree.nodes[child].reward_into + gamma * g;
        let n = &mut tree.nodes[node];
        n.counts[action] += 1;
        n.totals[action] += g;
    }
}

/// Visit-weighted mean of the root action values.
pub fn value_target(node: &SearchNode) -> f64 {
    let total = node.visits();
    if total == 0 {
        return 0.0;
    }
    (0..node.counts.len())
        .filter(|&a| node.counts[a] > 0)
        .map(|a| node.counts[a] as f64 / total as f64 * node.totals[a] / node.counts[a] as f64)
        .sum()
}

/// Visit counts normalized to a distribution.
pub fn policy_target(counts: &[u32]) -> Vec<f64> {
    let total: u32 = counts.iter().sum();
    counts.iter().map(|&n| n as f64 / total as f64).collect()
}

/// Run `config.n_mcts` traces from `root_state` in a fresh tree.
pub fn run_search<E, V>(
    root_state: &EnvState,
    evaluator: &V,
    env: &E,
    config: &SearchConfig,
    rng: &mut RngStream,
) -> Result<SearchResult>
where
    E: Environment + ?Sized,
    V: Evaluator + ?Sized,
{
    let tree = build_tree(root_state, evaluator, env, config, rng)?;
    let root = tree.root();
    Ok(SearchResult {
        root_counts: root.counts.clone(),
        root_mean_q: (0..root.counts.len()).map(|a| root.mean_q(a)).collect(),
        policy_target: policy_target(&root.counts),
        value_target: value_target(root),
        traces_used: root.visits(),
        root_features: env.features(&root.state),
    })
}

/// Like [`run_search`] but returns the whole tree.
pub fn build_tree<E, V>(
    root_state: &EnvState,
    evaluator: &V,
    env: &E,
    config: &SearchConfig,
    rng: &mut RngStream,
) -> Result<SearchTree>
where
    E: Environment + ?Sized,
    V: Evaluator + ?Sized,
{
    config.validate()?;
    if root_state.terminal {
        return Err(contract("search from a terminal state"));
    }
    let na = env.spec().action_count;
    let mut tree = SearchTree {
        nodes: vec![SearchNode::new(root_state.clone(), 0.0, na)],
    };
    expand_evaluate(&mut tree.nodes[0], env, evaluator)?;

    let mut path = Vec::new();
    for _ in 0..config.n_mcts {
        path.clear();
        let mut node = 0;
        let leaf_value = loop {
            let action = select_child(&tree.nodes[node], config.c, config.variant, config.unvisited, rng);
            path.push((node, action));
            match tree.nodes[node].children[action] {
                Some(child) if tree.nodes[child].terminal => break 0.0,
                Some(child) => node = child,
                None => {
                    let t = env.step(&tree.nodes[node].state, action, rng)?;
                    let mut child = SearchNode::new(t.next_state, t.reward, na);
                    let value = expand_evaluate(&mut child, env, evaluator)?;
                    tree.nodes.push(child);
                    let id = tree.nodes.len() - 1;
                    tree.nodes[node].children[action] = Some(id);
                    break value;
                }
            }
        };
        backup(&mut tree, &path, leaf_value, config.gamma);
    }
    Ok(tree)
}
