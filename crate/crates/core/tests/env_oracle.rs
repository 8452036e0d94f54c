//! Environment dynamics against independent reimplementations of the
//! classic-control equations and an exact shortest-path oracle for RaceGrid.

use std::collections::{HashMap, VecDeque};

use proptest::prelude::*;
use rtdp_core::envs::{CartPole, CartPoleParams, MountainCar, MountainCarParams, RaceGrid, RaceGridParams};
use rtdp_core::mdp::{EnvState, Environment};
use rtdp_core::oracle::{q_value_iteration, TabularMdp};
use rtdp_core::rng::RngStream;

/// Cart-pole Euler step written out from the textbook equations of motion
/// (Barto, Sutton and Anderson), with the benchmark constants inlined.
fn reference_cartpole(s: [f64; 4], push_right: bool) -> ([f64; 4], bool) {
    let (g, mc, mp, l, f, tau) = (9.8, 1.0, 0.1, 0.5, 10.0, 0.02);
    let [x, xd, th, thd] = s;
    let force = if push_right { f } else { -f };
    let m = mc + mp;
    let tmp = (force + mp * l * thd.powi(2) * th.sin()) / m;
    let thdd = (g * th.sin() - th.cos() * tmp) / (l * (4.0 / 3.0 - mp * th.cos().powi(2) / m));
    let xdd = tmp - mp * l * thdd * th.cos() / m;
    let xd2 = xd + tau * xdd;
    let thd2 = thd + tau * thdd;
    let next = [x + tau * xd2, xd2, th + tau * thd2, thd2];
    let done = next[0] < -2.4 || next[0] > 2.4 || next[2].abs() > 12.0f64.to_radians();
    (next, done)
}

fn reference_mountaincar(pos: f64, vel: f64, action: usize) -> (f64, f64, bool) {
    let mut v = vel + (action as f64 - 1.0) * 0.001 + (3.0 * pos).cos() * -0.0025;
    v = v.max(-0.07).min(0.07);
    let mut p = pos + v;
    p = p.max(-1.2).min(0.6);
    if p == -1.2 && v < 0.0 {
        v = 0.0;
    }
    (p, v, p >= 0.5)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn cartpole_push_right_signs() {
    let env = CartPole::new(CartPoleParams::default()).unwrap();
    let t = env
        .step(&EnvState::initial(vec![0.0; 4]), 1, &mut RngStream::new(0))
        .unwrap();
    assert!(t.next_state.obs[1] > 0.0);
    assert!(t.next_state.obs[3] < 0.0);
    let (reference, _) = reference_cartpole([0.0; 4], true);
    assert!(reference[1] > 0.0 && reference[3] < 0.0);
}

#[test]
fn mountaincar_left_wall_stops_the_car() {
    let env = MountainCar::new(MountainCarParams::default()).unwrap();
    let t = env
        .step(&EnvState::initial(vec![-1.19, -0.05]), 0, &mut RngStream::new(0))
        .unwrap();
    assert_eq!(t.next_state.obs, vec![-1.2, 0.0]);
    assert_eq!(reference_mountaincar(-1.19, -0.05, 0), (-1.2, 0.0, false));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cartpole_trajectories_match_reference(seed in any::<u64>(), actions in prop::collection::vec(0usize..2, 1..200)) {
        let env = CartPole::new(CartPoleParams::default()).unwrap();
        let mut rng = RngStream::new(seed);
        let mut state = env.reset(&mut rng);
        let mut reference = [state.obs[0], state.obs[1], state.obs[2], state.obs[3]];
        for a in actions {
            let t = env.step(&state, a, &mut rng).unwrap();
            let (next, done) = reference_cartpole(reference, a == 1);
            for i in 0..4 {
                prop_assert!(close(t.next_state.obs[i], next[i]), "component {} {} vs {}", i, t.next_state.obs[i], next[i]);
            }
            prop_assert_eq!(t.reward, 1.0);
            let capped = t.next_state.steps_taken >= 200;
            prop_assert_eq!(t.terminal, done || capped);
            if t.terminal {
                break;
            }
            state = t.next_state;
            reference = next;
        }
    }

    #[test]
    fn mountaincar_trajectories_match_reference(seed in any::<u64>(), actions in prop::collection::vec(0usize..3, 1..400)) {
        let env = MountainCar::new(MountainCarParams::default()).unwrap();
        let mut rng = RngStream::new(seed);
        let mut state = env.reset(&mut rng);
        let (mut p, mut v) = (state.obs[0], state.obs[1]);
        for a in actions {
            let t = env.step(&state, a, &mut rng).unwrap();
            let (p2, v2, goal) = reference_mountaincar(p, v, a);
            prop_assert!(close(t.next_state.obs[0], p2));
            prop_assert!(close(t.next_state.obs[1], v2));
            prop_assert_eq!(t.reward, if goal { 1.0 } else { -0.005 });
            if t.terminal {
                break;
            }
            state = t.next_state;
            p = p2;
            v = v2;
        }
    }
}

/// Lattice index of a RaceGrid position on the `move_step` grid.
fn cell(obs: &[f64], step: f64) -> (i64, i64) {
    ((obs[0] / step).round() as i64, (obs[1] / step).round() as i64)
}

#[test]
fn racegrid_shortest_path_return_matches_value_iteration() {
    let params = RaceGridParams::default();
    let env = RaceGrid::new(params.clone()).unwrap();
    let step = params.move_step;
    let start = (4i64, 4i64);
    let cells = (1.0 / step).round() as i64;

    // Breadth-first search over the lattice with goal membership computed
    // directly from the goal disc.
    let in_goal = |(i, j): (i64, i64)| {
        let (x, y) = (i as f64 * step, j as f64 * step);
        (x - 0.8).hypot(y - 0.8) <= 0.08
    };
    let mut dist: HashMap<(i64, i64), u32> = HashMap::from([(start, 0)]);
    let mut queue = VecDeque::from([start]);
    let mut goal_steps = None;
    while let Some(c) = queue.pop_front() {
        let d = dist[&c];
        if in_goal(c) && c != start {
            goal_steps = Some(d);
            break;
        }
        for (di, dj) in [(0, 1), (1, 0), (0, -1), (-1, 0)] {
            let n = ((c.0 + di).clamp(0, cells), (c.1 + dj).clamp(0, cells));
            if !dist.contains_key(&n) {
                dist.insert(n, d + 1);
                queue.push_back(n);
            }
        }
    }
    let k = goal_steps.expect("goal reachable");
    assert_eq!(k, 22);
    let bfs_return = f64::from(k - 1) * params.step_reward + params.goal_reward;

    // Tabulate the environment's own transitions over every reachable cell
    // and solve it exactly.
    let mut rng = RngStream::new(0);
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut obs: Vec<Vec<f64>> = Vec::new();
    let origin = vec![start.0 as f64 * step, start.1 as f64 * step];
    index.insert(start, 0);
    obs.push(origin);
    let mut edges: Vec<Vec<(Option<(i64, i64)>, f64, Vec<f64>)>> = Vec::new();
    let mut i = 0;
    while i < obs.len() {
        let state = EnvState::initial(obs[i].clone());
        let mut row = Vec::new();
        for a in 0..5 {
            let t = env.step(&state, a, &mut rng).unwrap();
            let c = cell(&t.next_state.obs, step);
            if t.terminal {
                row.push((None, t.reward, t.next_state.obs));
            } else {
                if !index.contains_key(&c) {
                    index.insert(c, obs.len());
                    obs.push(t.next_state.obs.clone());
                }
                row.push((Some(c), t.reward, t.next_state.obs));
            }
        }
        edges.push(row);
        i += 1;
    }
    let ns = obs.len() + 1;
    let sink = ns - 1;
    let mut probs = vec![0.0; ns * 5 * ns];
    let mut rewards = vec![0.0; ns * 5 * ns];
    for (s, row) in edges.iter().enumerate() {
        for (a, (next, r, _)) in row.iter().enumerate() {
            let n = next.map_or(sink, |c| index[&c]);
            probs[(s * 5 + a) * ns + n] = 1.0;
            rewards[(s * 5 + a) * ns + n] = *r;
        }
    }
    for a in 0..5 {
        probs[(sink * 5 + a) * ns + sink] = 1.0;
    }
    let mdp = TabularMdp::new(ns, 5, probs, rewards, 1.0).unwrap();
    let q = q_value_iteration(&mdp, 1e-12).unwrap();
    assert!((q.state_value(0) - bfs_return).abs() < 1e-9, "{} vs {}", q.state_value(0), bfs_return);
}
