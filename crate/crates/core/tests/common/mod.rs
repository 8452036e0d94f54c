//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rtdp_core::mcts::{run_search, SearchConfig, SelectionVariant, UniformEvaluator, UnvisitedValue};
use rtdp_core::mdp::Environment;
use rtdp_core::net::{NetParams, NetShape, TrainingTarget};
use rtdp_core::oracle::{exhaustive_search, DeterministicTree, TabularMdp};
use rtdp_core::rng::RngStream;

/// Dense random MDP with rewards in `[-1, 1)`.
pub fn random_mdp(n_states: usize, n_actions: usize, gamma: f64, rng: &mut RngStream) -> TabularMdp {
    let mut probs = Vec::with_capacity(n_states * n_actions * n_states);
    let mut rewards = Vec::with_capacity(probs.capacity());
    for _ in 0..n_states * n_actions {
        let row: Vec<f64> = (0..n_states).map(|_| rng.uniform()).collect();
        let total: f64 = row.iter().sum();
        probs.extend(row.into_iter().map(|p| p / total));
        rewards.extend((0..n_states).map(|_| rng.uniform_range(-1.0, 1.0)));
    }
    // Row sums can miss 1 by an ulp; renormalize against the last entry.
    for row in probs.chunks_mut(n_states) {
        let head: f64 = row[..n_states - 1].iter().sum();
        row[n_states - 1] = 1.0 - head;
    }
    TabularMdp::new(n_states, n_actions, probs, rewards, gamma).unwrap()
}

/// Solve `(I - gamma P) v = r` by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

/// Exact value of a deterministic stationary policy.
pub fn policy_value(mdp: &TabularMdp, policy: &[usize]) -> Vec<f64> {
    let n = mdp.n_states();
    let g = mdp.gamma();
    let a: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            (0..n)
                .map(|t| f64::from(u8::from(s == t)) - g * mdp.prob(s, policy[s], t))
                .collect()
        })
        .collect();
    let b: Vec<f64> = (0..n).map(|s| mdp.expected_reward(s, policy[s])).collect();
    solve_linear(a, b)
}

/// Best deterministic policy by enumerating all `|A|^|S|` of them; the
/// winner maximizes the summed state values (an optimal policy dominates
/// every other in every state, so it also maximizes the sum).
pub fn enumerate_optimal_policy(mdp: &TabularMdp) -> (Vec<usize>, Vec<f64>) {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut best: Option<(Vec<usize>, Vec<f64>)> = None;
    for code in 0..na.pow(ns as u32) {
        let policy: Vec<usize> = (0..ns).map(|s| code / na.pow(s as u32) % na).collect();
        let v = policy_value(mdp, &policy);
        let better = best
            .as_ref()
            .map_or(true, |(_, bv)| v.iter().sum::<f64>() > bv.iter().sum::<f64>());
        if better {
            best = Some((policy, v));
        }
    }
    best.unwrap()
}

/// One random search-versus-enumeration instance.
pub struct TreeCase {
    pub depth: usize,
    pub branching: usize,
    pub exact: Vec<f64>,
    pub counts: Vec<u32>,
}

impl TreeCase {
    pub fn exact_best(&self) -> usize {
        argmax(&self.exact)
    }

    pub fn search_best(&self) -> usize {
        let as_f64: Vec<f64> = self.counts.iter().map(|&c| f64::from(c)).collect();
        argmax(&as_f64)
    }
}

pub fn argmax(v: &[f64]) -> usize {
    (1..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
}

/// Draw random trees until the two best root actions differ by at least
/// `min_gap`, then search it with uniform priors and zero bootstrap.
pub fn tree_case(seed: u64, n_mcts: u32, c: f64, min_gap: f64) -> TreeCase {
    let mut rng = RngStream::new(seed);
    loop {
        let depth = 1 + rng.index(3);
        let branching = 2 + rng.index(2);
        let tree = DeterministicTree::random(depth, branching, (0.0, 1.0), 1.0, &mut rng).unwrap();
        let root = tree.root();
        let exact = exhaustive_search(&tree, &root, depth, 1.0, |_| 0.0).unwrap();
        let mut sorted = exact.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        if sorted[0] - sorted[1] < min_gap {
            continue;
        }
        let config = SearchConfig {
            n_mcts,
            c,
            gamma: 1.0,
            variant: SelectionVariant::StandardPuct,
            unvisited: UnvisitedValue::Zero,
        };
        let evaluator = UniformEvaluator {
            action_count: tree.spec().action_count,
        };
        let result = run_search(&root, &evaluator, &tree, &config, &mut rng.substream("mcts")).unwrap();
        return TreeCase {
            depth,
            branching,
            exact,
            counts: result.root_counts,
        };
    }
}

pub const FD_STEP: f64 = 1e-5;

pub fn random_distribution(n: usize, rng: &mut RngStream) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.uniform() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Norm-wise relative error between analytic and numeric gradients of the
/// combined batch-mean loss for one random configuration.
pub fn fd_relative_error(seed: u64) -> f64 {
    let mut rng = RngStream::new(seed);
    let input_dim = 1 + rng.index(5);
    let hidden: Vec<usize> = (0..1 + rng.index(2)).map(|_| 2 + rng.index(7)).collect();
    let actions = 2 + rng.index(4);
    let shape = NetShape::new(input_dim, hidden, actions).unwrap();
    let mut params = NetParams::init(shape, &mut rng);
    for w in params.flat_mut() {
        *w = rng.uniform_range(-0.8, 0.8);
    }
    let targets: Vec<TrainingTarget> = (0..1 + rng.index(6))
        .map(|_| TrainingTarget {
            state_obs: (0..input_dim).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
            policy_target: random_distribution(actions, &mut rng),
            value_target: rng.uniform_range(-2.0, 2.0),
        })
        .collect();
    let batch: Vec<&TrainingTarget> = targets.iter().collect();

    let (analytic, _) = params.gradients(&batch).unwrap();
    let mut numeric = vec![0.0; params.flat().len()];
    for (i, slot) in numeric.iter_mut().enumerate() {
        let original = params.flat()[i];
        params.flat_mut()[i] = original + FD_STEP;
        let plus = params.loss(&batch).unwrap().total();
        params.flat_mut()[i] = original - FD_STEP;
        let minus = params.loss(&batch).unwrap().total();
        params.flat_mut()[i] = original;
        *slot = (plus - minus) / (2.0 * FD_STEP);
    }
    let diff: f64 = analytic.0.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let norm_a: f64 = analytic.0.iter().map(|a| a * a).sum::<f64>().sqrt();
    let norm_n: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    diff / norm_a.max(norm_n).max(1e-12)
}

