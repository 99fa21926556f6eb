use std::path::Path;
use std::process::{Command, Output};

fn riskfleet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskfleet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = riskfleet(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn record_writes_a_dataset_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["record", "--seeds", "0", "--episodes", "0", "--out", out]);
    let empty = dir.path().join("traces/rr_seed0_record0.jsonl");
    assert_eq!(lines(&empty), 1);
    let stdout = ok(&["record", "--policy", "qhef", "--seeds", "1", "--episodes", "2", "--out", out]);
    assert!(stdout.contains("recorded"));
    assert!(lines(&dir.path().join("traces/qhef_seed1_record2.jsonl")) > 1);
}

#[test]
fn untrained_checkpoints_and_empty_reward_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["train", "--policy", "rq,drs", "--seeds", "0", "--episodes", "0", "--out", out]);
    for j in 0..4 {
        assert!(dir.path().join(format!("checkpoints/rq_seed0_ep0_uav{j}.bin")).exists());
        assert!(dir.path().join(format!("checkpoints/drs_seed0_ep0_uav{j}_risk.bin")).exists());
    }
    assert_eq!(lines(&dir.path().join("kpis/rq_seed0_ep0_rewards.csv")), 1);
}

#[test]
fn training_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&[
            "train", "--policy", "dql", "--seeds", "3", "--episodes", "4",
            "--out", d.path().to_str().unwrap(),
        ]);
    }
    for f in ["checkpoints/dql_seed3_ep4_uav2.bin", "kpis/dql_seed3_ep4_rewards.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn eval_writes_per_seed_averaged_and_comparison_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["train", "--policy", "dql,drs,rq", "--seeds", "0", "--episodes", "2", "--out", out]);
    let stdout = ok(&[
        "eval", "--policy", "rr,qhef,dql,drs,rq", "--seeds", "0-9", "--episodes", "2", "--out", out,
    ]);
    assert!(stdout.contains("qhef"));
    assert_eq!(lines(&dir.path().join("kpis/rr_kpis.csv")), 1 + 10 + 1);
    assert_eq!(lines(&dir.path().join("kpis/comparison.csv")), 1 + 5);
    for fig in ["fig3_energy.csv", "fig4_violations.csv", "fig5_delay.csv"] {
        assert!(dir.path().join("kpis").join(fig).exists());
    }
    assert!(dir.path().join("traces/rq_seed9.jsonl").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(riskfleet(&["eval", "--policy", "sarsa", "--out", out]).status.code(), Some(2));
    assert_eq!(
        riskfleet(&["eval", "--policy", "rr", "--scenario", "/nonexistent.cfg", "--out", out])
            .status
            .code(),
        Some(2)
    );
    // Eval of a learner without checkpoints.
    assert_eq!(riskfleet(&["eval", "--policy", "rq", "--episodes", "7", "--out", out]).status.code(), Some(1));

    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/paper_s4.cfg"))
        .unwrap()
        .replace("learning_rate = 0.05", "learning_rate = 1e200");
    let cfg = dir.path().join("unstable.cfg");
    std::fs::write(&cfg, text).unwrap();
    let res = riskfleet(&[
        "train", "--policy", "dql", "--episodes", "20", "--scenario", cfg.to_str().unwrap(), "--out", out,
    ]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
}
