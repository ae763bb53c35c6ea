use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"{
    "seed": 11,
    "manifolds": [
        {"kind": "segment", "a": [0.0, 0.0], "b": [1.0, 0.0]},
        {"kind": "segment", "a": [0.0, 1.0], "b": [1.0, 1.0]}
    ],
    "dataset": {"train_per_class": 60, "test_per_class": 30, "noise": 0.1},
    "algorithms": [{"name": "random"}, {"name": "remd"}, {"name": "cmd"}],
    "budgets": [3],
    "output_dir": "results"
}"#;

fn mdisc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdisc"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn end_to_end_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, CONFIG).unwrap();

    let out = mdisc(&["dataset", "--config", s(&cfg), "--out", s(dir.path())]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let test = dir.path().join("test.csv");
    let lines = std::fs::read_to_string(&test).unwrap().lines().count();
    assert_eq!(lines, 61);

    let mut files = vec![];
    for algo in ["random", "cmd"] {
        let f = dir.path().join(format!("{algo}.csv"));
        let out = mdisc(&[
            "discretize",
            "--algo",
            algo,
            "--config",
            s(&cfg),
            "--budget",
            "3",
            "--out",
            s(&f),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        files.push(f);
    }

    let out = mdisc(&[
        "evaluate",
        "--config",
        s(&cfg),
        "--samples",
        s(&files[1]),
        "--test",
        s(&test),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("manifold,samples,registration_error\n0,3,"));
    let rate: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("classification_rate,"))
        .unwrap()
        .parse()
        .unwrap();
    let eps: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("test_error,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((rate + 100.0 * eps - 100.0).abs() < 1e-6);

    let out = mdisc(&[
        "compare",
        "--config",
        s(&cfg),
        "--test",
        s(&test),
        s(&files[0]),
        s(&files[1]),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for m in ["0", "1"] {
        let total: f64 = text
            .lines()
            .skip(1)
            .filter(|l| l.split(',').nth(1) == Some(m))
            .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
            .sum();
        assert!((total - 100.0).abs() < 1e-6, "{text}");
    }

    let out = mdisc(&["run", "--config", s(&cfg)]);
    assert!(out.status.success());
    for f in ["results.csv", "summary.csv", "registration.csv"] {
        assert!(dir.path().join("results").join(f).exists());
    }
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, CONFIG.replace("\"budgets\": [3]", "\"budgets\": []")).unwrap();
    let out = mdisc(&["run", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(&cfg, CONFIG).unwrap();
    let f = dir.path().join("x.csv");
    let out = mdisc(&[
        "discretize",
        "--algo",
        "nope",
        "--config",
        s(&cfg),
        "--budget",
        "2",
        "--out",
        s(&f),
    ]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(&cfg, "{ not json").unwrap();
    let out = mdisc(&["dataset", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, CONFIG).unwrap();
    let missing = dir.path().join("missing.csv");
    let out = mdisc(&[
        "evaluate",
        "--config",
        s(&cfg),
        "--samples",
        s(&missing),
        "--test",
        s(&missing),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "manifold,sample,p0\nzero,0,0.5\n").unwrap();
    let out = mdisc(&[
        "evaluate",
        "--config",
        s(&cfg),
        "--samples",
        s(&bad),
        "--test",
        s(&bad),
    ]);
    assert_eq!(out.status.code(), Some(3));
}
