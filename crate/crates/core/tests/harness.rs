use std::path::Path;

use manifold_disc::geometry::{
    Canvas, GridSpec, Manifold, Projector, RefineConfig, SampleSet, Shape,
};
use manifold_disc::harness::{
    generate_dataset, oracle_points, registration_metrics, run_experiment, DatasetConfig,
    ExperimentConfig,
};
use manifold_disc::io::write_pgm;
use statrs::function::gamma::ln_gamma;

fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

#[test]
fn noise_norm_follows_chi_distribution() {
    let n = 64;
    let sigma = 0.1;
    let seg = Manifold::segment(0, unit(n, 0), unit(n, 1)).unwrap();
    let cfg = DatasetConfig {
        train_per_class: 4000,
        test_per_class: 1,
        noise: sigma,
    };
    let d = generate_dataset(std::slice::from_ref(&seg), &cfg, 9).unwrap();
    let mean = (0..d.train.len())
        .map(|p| {
            let u = seg.map(&d.train_params[p]).unwrap();
            u.iter()
                .zip(d.train.point(p))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum::<f64>()
        / d.train.len() as f64;
    let k = n as f64;
    let exact = sigma * 2f64.sqrt() * (ln_gamma((k + 1.0) / 2.0) - ln_gamma(k / 2.0)).exp();
    assert!((mean - exact).abs() < 0.01 * exact, "{mean} vs {exact}");
    assert!((mean - sigma * k.sqrt()).abs() < 0.05 * sigma * k.sqrt());
}

#[test]
fn noiseless_patterns_lie_on_their_manifold() {
    let p = Shape::Wedge.render(8, 2.5).unwrap();
    let m = Manifold::pattern(
        0,
        p,
        Canvas {
            width: 8,
            height: 8,
        },
        None,
    )
    .unwrap();
    let cfg = DatasetConfig {
        train_per_class: 30,
        test_per_class: 1,
        noise: 0.0,
    };
    let d = generate_dataset(std::slice::from_ref(&m), &cfg, 2).unwrap();
    let oracle = Projector::new(&m, &GridSpec::oracle(), RefineConfig::default()).unwrap();
    for p in 0..d.train.len() {
        let pr = oracle.project(d.train.point(p)).unwrap();
        assert!(pr.distance < 1e-5, "point {p}: {}", pr.distance);
    }
}

#[test]
fn registration_is_zero_on_exact_projections() {
    let m = Manifold::torus(0, 2.0, 0.6).unwrap();
    let cfg = DatasetConfig {
        train_per_class: 20,
        test_per_class: 1,
        noise: 0.2,
    };
    let d = generate_dataset(std::slice::from_ref(&m), &cfg, 4).unwrap();
    let oracle = Projector::new(&m, &GridSpec::Uniform(128), RefineConfig::default()).unwrap();
    let proj: Vec<Vec<f64>> = d
        .train
        .points()
        .iter()
        .map(|x| oracle.project(x).unwrap().param)
        .collect();
    let set = SampleSet::from_params(&m, &proj).unwrap();
    let (mean, per) = registration_metrics(&oracle, &set, d.train.points()).unwrap();
    assert!(mean < 1e-6);
    assert_eq!(per.len(), 20);
    assert_eq!(oracle_points(&oracle, d.train.points()).unwrap().len(), 20);
}

#[test]
fn experiment_from_files_writes_reproducible_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    write_pgm(&base.join("tee.pgm"), &Shape::Tee.render(8, 2.5).unwrap()).unwrap();
    let bar = Shape::Bar.render(8, 2.5).unwrap();
    let rows: Vec<String> = (0..8)
        .map(|y| {
            (0..8)
                .map(|x| bar.get(x, y).to_string())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    std::fs::write(base.join("bar.csv"), rows.join("\n")).unwrap();
    let cfg_text = r#"{
        "seed": 5,
        "manifolds": [
            {"kind": "pattern", "canvas": 8, "pattern": {"pgm": "tee.pgm"}},
            {"kind": "pattern", "canvas": 8, "pattern": {"csv": "bar.csv"}}
        ],
        "dataset": {"train_per_class": 80, "test_per_class": 40, "noise": 0.02},
        "algorithms": [{"name": "regular"}, {"name": "remd"},
                       {"name": "cmd", "params": {"outer_max": 3}},
                       {"name": "mdpa", "params": {"cmd": {"outer_max": 2}}}],
        "budgets": [4],
        "repetitions": 2,
        "output_dir": "out"
    }"#;
    std::fs::write(base.join("cfg.json"), cfg_text).unwrap();
    let (cfg, b) = ExperimentConfig::load(&base.join("cfg.json")).unwrap();
    let first = run_experiment(&cfg, &b).unwrap();
    assert!(first.results.iter().all(|r| r.error.is_none()));
    let files = [
        "results.csv",
        "registration.csv",
        "summary.csv",
        "registration_summary.csv",
        "transfers.csv",
    ];
    let read = |d: &Path| files.map(|f| std::fs::read_to_string(d.join(f)).unwrap());
    let a = read(&base.join("out"));
    run_experiment(&cfg, &b).unwrap();
    assert_eq!(a, read(&base.join("out")));
    let summary = &a[2];
    assert_eq!(summary.lines().count(), 5);
    assert!(summary.starts_with("algorithm,budget,repetitions_ok,"));
    assert!(!a[0].contains("wall_time"));
    // every row keeps rate + 100 * test error = 100
    for r in &first.results {
        let s = r.classification_rate.unwrap() + 100.0 * r.test_error.unwrap();
        assert!((s - 100.0).abs() < 1e-9);
    }
}
