//! Drives the `oris` binary through its four subcommands.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn oris(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oris"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = oris(args);
    assert!(
        out.status.success(),
        "oris {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const COMMON: &str = "\
seeds = 1, 2
data.labels = neg, pos, neutral
agent.budget = 10
agent.episodes = 6
agent.minibatch = 16
agent.hidden = 16, 16
harness.budget = 30
harness.frequency = 10
learner.epochs = 5
";

#[test]
fn full_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("synth.cfg"),
        format!("{COMMON}synth.train_size = 300\nsynth.test_size = 60\nsynth.dim = 6\nsynth.proportions = 0.5, 0.3, 0.2\n"),
    )
    .unwrap();
    ok(&["gen-synth", "--config", s(&d.join("synth.cfg")), "--out-dir", s(&d.join("data"))]);
    for f in ["train.tsv", "test.tsv", "vectors.txt"] {
        assert!(d.join("data").join(f).is_file(), "{f} missing");
    }
    let train_lines = fs::read_to_string(d.join("data/train.tsv")).unwrap().lines().count();
    assert_eq!(train_lines, 300);

    let files_cfg = d.join("files.cfg");
    fs::write(
        &files_cfg,
        format!("{COMMON}data.train = data/train.tsv\ndata.test = data/test.tsv\ndata.vectors = data/vectors.txt\n"),
    )
    .unwrap();
    let cfg = s(&files_cfg);
    for tag in ["a", "b"] {
        let ckpt = d.join(format!("agent_{tag}.ckpt"));
        let log = d.join(format!("log_{tag}.csv"));
        ok(&["train-agent", "--config", cfg, "--out", s(&ckpt), "--log", s(&log)]);
    }
    assert_eq!(fs::read(d.join("agent_a.ckpt")).unwrap(), fs::read(d.join("agent_b.ckpt")).unwrap());
    assert_eq!(fs::read(d.join("log_a.csv")).unwrap(), fs::read(d.join("log_b.csv")).unwrap());

    let mut results = Vec::new();
    for agent in ["random", "uncertainty", "diversity", "oris"] {
        for tag in ["a", "b"] {
            let out = d.join(format!("{agent}_{tag}.csv"));
            let ckpt = d.join(format!("agent_{tag}.ckpt"));
            ok(&["run-al", "--config", cfg, "--agent", agent, "--checkpoint", s(&ckpt), "--out", s(&out)]);
        }
        let a = fs::read(d.join(format!("{agent}_a.csv"))).unwrap();
        assert_eq!(a, fs::read(d.join(format!("{agent}_b.csv"))).unwrap(), "{agent} not reproducible");
        assert!(String::from_utf8(a)
            .unwrap()
            .starts_with("run_id,budget_exhausted,machine_f1_macro,human_f1_macro,picks,oracle_errors\n"));
        results.push(d.join(format!("{agent}_a.csv")));
    }

    let agg = d.join("agg.csv");
    let mut args = vec!["aggregate", "--out", s(&agg), "--in"];
    args.extend(results.iter().map(|p| s(p)));
    ok(&args);
    let text = fs::read_to_string(&agg).unwrap();
    assert!(text.starts_with("budget_exhausted,runs,"));
    assert!(text.lines().count() >= 2);
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.cfg"), "harness.budget = 10\nharness.frequency = 50\nmystery = 1\n").unwrap();
    let out = oris(&["run-al", "--config", s(&d.join("bad.cfg")), "--agent", "random", "--out", s(&d.join("x.csv"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mystery") && err.contains("harness.frequency"), "{err}");

    fs::write(d.join("good.cfg"), "harness.budget = 10\nharness.frequency = 5\n").unwrap();
    let out = oris(&["run-al", "--config", s(&d.join("good.cfg")), "--agent", "oris", "--out", s(&d.join("x.csv"))]);
    assert!(!out.status.success(), "oris without a checkpoint must fail");

    let out = oris(&["aggregate", "--in", s(&d.join("missing.csv")), "--out", s(&d.join("y.csv"))]);
    assert!(!out.status.success());
}
