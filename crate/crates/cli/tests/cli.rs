use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtdp-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let o = lab(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for sub in ["train", "sweep", "eval", "oracle", "entropy-map", "verify"] {
        assert!(text.contains(sub), "missing {sub}");
    }
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(lab(&["train", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(lab(&["train", "--env", "pong"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "n_mcts = 0\n").unwrap();
    let out = dir.path().join("run");
    assert_eq!(lab(&["train", "--config", path(&cfg), "--out", path(&out)]).status.code(), Some(2));
    let typo = dir.path().join("typo.json");
    std::fs::write(&typo, r#"{"n_mcst": 4}"#).unwrap();
    assert_eq!(lab(&["train", "--config", path(&typo)]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.bin");
    let o = lab(&["eval", "--checkpoint", path(&missing)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn oracle_prints_q_table() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = dir.path().join("chain.json");
    // Two-state chain: action 1 moves right for reward 1, state 1 absorbs.
    std::fs::write(
        &mdp,
        r#"{"n_states": 2, "n_actions": 2, "transitions": [
            {"state": 0, "action": 0, "next_state": 0, "prob": 1.0, "reward": 0.0},
            {"state": 0, "action": 1, "next_state": 1, "prob": 1.0, "reward": 1.0},
            {"state": 1, "action": 0, "next_state": 1, "prob": 1.0, "reward": 0.0},
            {"state": 1, "action": 1, "next_state": 1, "prob": 1.0, "reward": 0.0}
        ]}"#,
    )
    .unwrap();
    let o = lab(&["oracle", "--mdp", path(&mdp), "--gamma", "0.9", "--tol", "1e-8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("state,q_0,q_1,greedy"));
    let row0: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row0[0], "0");
    assert!((row0[1].parse::<f64>().unwrap() - 0.9).abs() < 1e-7);
    assert!((row0[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-7);
    assert_eq!(row0[3], "1");
}

#[test]
fn train_is_deterministic_and_feeds_eval_and_entropy_map() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = lab(&[
            "train", "--env", "racegrid", "--n-mcts", "4", "--budget-traces", "2000", "--seed", "3", "--out", path(out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let run_a = std::fs::read(a.join("run.csv")).unwrap();
    assert_eq!(run_a, std::fs::read(b.join("run.csv")).unwrap());
    assert!(String::from_utf8_lossy(&run_a).starts_with("episode,real_steps,traces,seconds,return\n"));
    assert_eq!(std::fs::read(a.join("checkpoint.bin")).unwrap(), std::fs::read(b.join("checkpoint.bin")).unwrap());

    let ckpt = a.join("checkpoint.bin");
    let o = lab(&["eval", "--env", "racegrid", "--checkpoint", path(&ckpt), "--episodes", "2", "--n-mcts", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 3);

    let o = lab(&["entropy-map", "--checkpoint", path(&ckpt), "--resolution", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("episode,x,y,entropy"));
    assert_eq!(text.lines().count(), 10);
    for line in text.lines().skip(1) {
        let h: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((0.0..=5f64.ln() + 1e-12).contains(&h));
    }

    // A CartPole checkpoint has no planar state space.
    let o = lab(&["entropy-map", "--env", "cartpole", "--checkpoint", path(&ckpt)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_verifiable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let args = [
        "sweep", "--env", "racegrid", "--budget-traces", "1500", "--n-mcts", "4,16", "--seeds", "2", "--workers", "1",
        "--out", path(&out),
    ];
    let o = lab(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for n in [4, 16] {
        for s in [0, 1] {
            assert!(out.join(format!("runs/n{n}_seed{s}/run.csv")).is_file());
        }
    }
    let tradeoff = std::fs::read(out.join("tradeoff.csv")).unwrap();
    assert!(out.join("manifest.json").is_file());

    let o = lab(&["verify", "--dir", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    // Rerunning reproduces the table byte for byte.
    assert!(lab(&args).status.success());
    assert_eq!(std::fs::read(out.join("tradeoff.csv")).unwrap(), tradeoff);

    std::fs::write(out.join("runs/n4_seed0/run.csv"), "episode,real_steps,traces,seconds,return\n").unwrap();
    assert_eq!(lab(&["verify", "--dir", path(&out)]).status.code(), Some(1));
}

#[test]
fn sweep_rejects_unwritable_output_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    let o = lab(&["sweep", "--budget-traces", "100", "--n-mcts", "4", "--seeds", "1", "--out", path(&file)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!file.join("runs").exists());
}

#[test]
fn sweep_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        format!(
            "n_mcts_values = [8]\nrepetitions = 1\nout_dir = {:?}\n\n[agent]\nenv = \"racegrid\"\n\n[agent.budget]\nmode = \"total_traces\"\namount = 800.0\n",
            path(&out)
        ),
    )
    .unwrap();
    let o = lab(&["sweep", "--config", path(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("runs/n8_seed0/run.csv").is_file());
}
