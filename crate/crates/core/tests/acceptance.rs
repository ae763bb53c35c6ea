use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use manifold_disc::baselines::regular_grid;
use manifold_disc::budget::{dmd, mdpa, BudgetConfig};
use manifold_disc::cmd::{
    classification_error, cmd, error_counts, CmdConfig, LabeledCloud, MultiSampleSet,
};
use manifold_disc::geometry::{
    Canvas, GridSpec, Manifold, PointCloud, Projector, RefineConfig, SampleSet, Shape,
};
use manifold_disc::harness::{
    generate_dataset, run_experiment, DatasetConfig, EvalReport, ExperimentConfig,
};
use manifold_disc::remd::{remd, RemdConfig};
use manifold_disc::rng::seeded;
use rand::Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

const BUDGETS: [usize; 3] = [16, 32, 64];
const SEEDS: usize = 5;

fn fixture_config(algorithms: &str, repetitions: usize) -> String {
    let manifolds = ["tee", "ell", "wedge"]
        .map(|s| {
            format!(
                r#"{{"kind": "pattern", "canvas": 16, "translation": 1.5,
                   "pattern": {{"synthetic": {{"shape": "{s}", "size": 16, "radius": 5.0}}}}}}"#
            )
        })
        .join(",");
    format!(
        r#"{{
            "seed": 2024,
            "manifolds": [{manifolds}],
            "dataset": {{"train_per_class": 1500, "test_per_class": 500, "noise": 0.05}},
            "algorithms": [{algorithms}],
            "budgets": {BUDGETS:?},
            "repetitions": {repetitions},
            "output_dir": "out"
        }}"#
    )
}

fn trend_config() -> String {
    fixture_config(
        r#"{"name": "random"}, {"name": "regular"}, {"name": "remd"}, {"name": "cmd"},
           {"name": "mdsa", "params": {"steps": 2000}}"#,
        SEEDS,
    )
}

fn budget_config() -> String {
    fixture_config(r#"{"name": "mdpa"}, {"name": "dmd"}"#, 1)
}

fn run_in(dir: &Path, text: &str) -> Result<(EvalReport, Duration), String> {
    let cfg = ExperimentConfig::from_json(text).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let report = run_experiment(&cfg, dir).map_err(|e| e.to_string())?;
    Ok((report, t.elapsed()))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rotation_remd_monotone() -> Outcome {
    let t = Instant::now();
    let p = Shape::Tee.render(8, 2.5).unwrap();
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
        train_per_class: 2000,
        test_per_class: 1,
        noise: 0.05,
    };
    let cloud = generate_dataset(std::slice::from_ref(&m), &cfg, 1)
        .unwrap()
        .train
        .points()
        .clone();
    let mut worst = f64::NEG_INFINITY;
    for n in [4, 8, 16] {
        for seed in 0..10 {
            let out = remd(
                &m,
                &cloud,
                &RemdConfig {
                    n_samples: n,
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            for w in out.trace.windows(2) {
                worst = worst.max(w[1] - w[0]);
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        worst <= 1e-9 && secs < 60.0,
        format!("30 runs, largest trace increase {worst:.3e}, {secs:.1} s"),
    )
}

fn lloyd_segment() -> Outcome {
    let t = Instant::now();
    let m = Manifold::segment(0, vec![0.0], vec![1.0]).unwrap();
    let mut rng = seeded(17);
    let pts: Vec<Vec<f64>> = (0..5000).map(|_| vec![rng.random::<f64>()]).collect();
    let cloud = PointCloud::from_points(&pts).unwrap();
    let mut worst: f64 = 0.0;
    for n in [2, 4, 8] {
        let cfg = RemdConfig {
            n_samples: n,
            max_iters: 1000,
            tol: 1e-12,
            seed: 3,
            ..Default::default()
        };
        let out = remd(&m, &cloud, &cfg).unwrap();
        let mut params: Vec<f64> = out.samples.params().iter().map(|p| p[0]).collect();
        params.sort_by(f64::total_cmp);
        for (i, p) in params.iter().enumerate() {
            let center = (2 * i + 1) as f64 / (2 * n) as f64;
            worst = worst.max((p - center).abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        worst <= 0.05 && secs < 10.0,
        format!("largest deviation from cell centers {worst:.4}, {secs:.2} s"),
    )
}

fn circle_energy(angles: &[f64], a: f64, b: f64) -> f64 {
    let (ua, ub) = ((a.cos(), a.sin()), (b.cos(), b.sin()));
    angles
        .iter()
        .map(|t| {
            let (x, y) = (t.cos(), t.sin());
            let da = (x - ua.0).powi(2) + (y - ua.1).powi(2);
            let db = (x - ub.0).powi(2) + (y - ub.1).powi(2);
            da.min(db)
        })
        .sum::<f64>()
        / angles.len() as f64
}

fn antipodal_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    (d - PI).abs()
}

fn circle_symmetry() -> Outcome {
    let t = Instant::now();
    let m = Manifold::circle(0, [0.0, 0.0], 1.0).unwrap();
    let phase = seeded(5).random_range(0.0..PI);
    let angles: Vec<f64> = (0..2000).map(|k| phase + k as f64 * PI / 1000.0).collect();
    let pts: Vec<Vec<f64>> = angles.iter().map(|a| vec![a.cos(), a.sin()]).collect();
    let cloud = PointCloud::from_points(&pts).unwrap();

    let step = 2.0 * PI / 360.0;
    let mut brute = (f64::INFINITY, 0.0, 0.0);
    for i in 0..360 {
        for j in i + 1..360 {
            let (a, b) = (i as f64 * step, j as f64 * step);
            let e = circle_energy(&angles, a, b);
            if e < brute.0 {
                brute = (e, a, b);
            }
        }
    }
    let brute_gap = antipodal_gap(brute.1, brute.2);

    let mut worst_gap: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for seed in 0..5 {
        let cfg = RemdConfig {
            n_samples: 2,
            max_iters: 1000,
            tol: 1e-12,
            seed,
            ..Default::default()
        };
        let p = remd(&m, &cloud, &cfg).unwrap().samples.params();
        worst_gap = worst_gap.max(antipodal_gap(p[0][0], p[1][0]));
        worst_ratio = worst_ratio.max(circle_energy(&angles, p[0][0], p[1][0]) / brute.0);
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        worst_gap <= 0.05 && brute_gap <= 0.05 && worst_ratio <= 1.0 + 1e-4 && secs < 30.0,
        format!(
            "antipodal gap {worst_gap:.2e} rad (grid minimizer {brute_gap:.2e}), E / E_grid {worst_ratio:.6}, {secs:.1} s"
        ),
    )
}

fn seeds_passing(report: &EvalReport, ok: impl Fn(usize) -> bool) -> usize {
    let reps = report
        .results
        .iter()
        .map(|r| r.repetition)
        .max()
        .map_or(0, |r| r + 1);
    (0..reps).filter(|&rep| ok(rep)).count()
}

fn registration(report: &EvalReport, algo: &str, n: usize, rep: usize, m: usize) -> f64 {
    report
        .registration
        .iter()
        .find(|r| r.algorithm == algo && r.budget == n && r.repetition == rep && r.manifold == m)
        .and_then(|r| r.registration_error)
        .unwrap_or_else(|| panic!("missing registration for {algo} N={n} rep {rep} m {m}"))
}

fn result<'a>(
    report: &'a EvalReport,
    algo: &str,
    n: usize,
    rep: usize,
) -> &'a manifold_disc::harness::ResultRow {
    report
        .results
        .iter()
        .find(|r| r.algorithm == algo && r.budget == n && r.repetition == rep)
        .filter(|r| r.error.is_none())
        .unwrap_or_else(|| panic!("missing result for {algo} N={n} rep {rep}"))
}

fn registration_trend(report: &EvalReport, elapsed: Duration) -> Outcome {
    let mut fewest = SEEDS;
    for n in BUDGETS {
        for m in 0..3 {
            let k = seeds_passing(report, |rep| {
                let e = registration(report, "remd", n, rep, m);
                e <= registration(report, "regular", n, rep, m)
                    && e <= registration(report, "random", n, rep, m)
            });
            fewest = fewest.min(k);
        }
    }
    let secs = elapsed.as_secs_f64();
    check(
        fewest >= 4 && secs < 600.0,
        format!("REMD best in at least {fewest}/{SEEDS} seeds for every manifold and budget, fixture run {secs:.0} s"),
    )
}

fn classification_trend(report: &EvalReport) -> Outcome {
    let mut fewest = SEEDS;
    let mut train_ok = true;
    let mut mdsa_ok = true;
    for n in BUDGETS {
        let k = seeds_passing(report, |rep| {
            let c = result(report, "cmd", n, rep);
            let r = result(report, "remd", n, rep);
            c.classification_rate.unwrap() >= r.classification_rate.unwrap()
        });
        fewest = fewest.min(k);
        for rep in 0..SEEDS {
            let init = result(report, "remd", n, rep).train_error.unwrap();
            train_ok &= result(report, "cmd", n, rep).train_error.unwrap() <= init;
            mdsa_ok &= result(report, "mdsa", n, rep).train_error.unwrap() <= init;
        }
    }
    check(
        fewest >= 4 && train_ok && mdsa_ok,
        format!(
            "CMD test rate >= REMD in at least {fewest}/{SEEDS} seeds per budget, CMD train error never worse: {train_ok}, MDSA final <= initial: {mdsa_ok}"
        ),
    )
}

fn quantized(rng: &mut impl Rng) -> f64 {
    rng.random_range(-4..=4) as f64 * 0.5
}

fn e_equals_f() -> Outcome {
    let mut rng = seeded(99);
    let mut total = 0;
    for k in 0..100 {
        let classes = rng.random_range(2..=4);
        let sets = (0..classes)
            .map(|c| {
                let m = Manifold::segment(
                    c,
                    vec![quantized(&mut rng), quantized(&mut rng)],
                    vec![quantized(&mut rng), quantized(&mut rng)],
                )
                .unwrap();
                let params: Vec<Vec<f64>> = (0..rng.random_range(1..=4))
                    .map(|_| vec![rng.random_range(0..=4) as f64 * 0.25])
                    .collect();
                SampleSet::from_params(&m, &params).unwrap()
            })
            .collect();
        let msets = MultiSampleSet::new(sets).unwrap();
        let n = rng.random_range(1..=60);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![quantized(&mut rng), quantized(&mut rng)])
            .collect();
        let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let cloud = LabeledCloud::new(PointCloud::from_points(&pts).unwrap(), labels).unwrap();
        let c = error_counts(&msets, &cloud).unwrap();
        if c.e_form != c.f_form {
            return Err(format!(
                "fixture {k}: E-form {} vs F-form {}",
                c.e_form, c.f_form
            ));
        }
        total += c.e_form;
    }
    Ok(format!(
        "100 fixtures agree, {total} misclassifications counted"
    ))
}

fn point_vs_segment(seed: u64) -> (Vec<Manifold>, LabeledCloud) {
    let ms = vec![
        Manifold::segment(0, vec![0.0, 1.0], vec![0.0, 1.0]).unwrap(),
        Manifold::segment(1, vec![-5.0, 0.0], vec![5.0, 0.0]).unwrap(),
    ];
    let mut rng = seeded(seed);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for k in 0..300 {
        let (base, label) = if k % 3 == 0 {
            ([0.0, 1.0], 0)
        } else {
            ([-5.0 + 10.0 * rng.random::<f64>(), 0.0], 1)
        };
        pts.push(vec![
            base[0] + noise.sample(&mut rng),
            base[1] + noise.sample(&mut rng),
        ]);
        labels.push(label);
    }
    (
        ms,
        LabeledCloud::new(PointCloud::from_points(&pts).unwrap(), labels).unwrap(),
    )
}

fn conserved(alloc: &[usize], total: usize) -> bool {
    alloc.iter().sum::<usize>() == total && alloc.iter().all(|&n| n >= 1)
}

fn budget_properties(report: &EvalReport) -> Outcome {
    let mut allocations_ok = true;
    for r in &report.results {
        allocations_ok &= r.error.is_none() && conserved(&r.allocation, r.budget * 3);
    }
    let mut dmd_ok = true;
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..5 {
        let (ms, cloud) = point_vs_segment(seed);
        let budget = BudgetConfig {
            seed,
            ..BudgetConfig::new(6, 8)
        };
        let cmd_cfg = CmdConfig::default();
        let pruned = mdpa(&ms, &cloud, &budget, &cmd_cfg).unwrap();
        allocations_ok &= conserved(&pruned.allocation, 6);
        let dyn_out = dmd(&ms, &cloud, &budget, &cmd_cfg).unwrap();
        allocations_ok &= conserved(&dyn_out.allocation, 6);
        let equal = ms
            .iter()
            .map(|m| regular_grid(m, 3))
            .collect::<Result<Vec<_>, _>>()
            .unwrap();
        let fixed = cmd(
            &ms,
            MultiSampleSet::new(equal).unwrap(),
            &cloud,
            &CmdConfig { seed, ..cmd_cfg },
        )
        .unwrap();
        let e_dmd = classification_error(&dyn_out.sets, &cloud).unwrap();
        let e_cmd = classification_error(&fixed.sets, &cloud).unwrap();
        dmd_ok &= e_dmd <= e_cmd;
        worst = worst.max(e_dmd - e_cmd);
    }
    check(
        allocations_ok && dmd_ok,
        format!(
            "{} pattern rows and 10 fixture runs conserve the budget: {allocations_ok}, DMD minus equal CMD error at most {worst:.4}",
            report.results.len()
        ),
    )
}

fn projection_oracle() -> Outcome {
    let m = Manifold::circle(0, [0.0, 0.0], 1.0).unwrap();
    let oracle = Projector::new(&m, &GridSpec::oracle(), RefineConfig::default()).unwrap();
    let mut rng = seeded(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let r = rng.random_range(0.5..1.5);
        let a = rng.random_range(-PI..PI);
        let x = [r * a.cos(), r * a.sin()];
        let p = oracle.project(&x).unwrap();
        let y = m.map(&p.param).unwrap();
        worst = worst.max(((y[0] - a.cos()).powi(2) + (y[1] - a.sin()).powi(2)).sqrt());
    }
    check(
        worst <= 1e-5,
        format!("largest deviation from x/|x| {worst:.2e}"),
    )
}

const FILES: [&str; 5] = [
    "results.csv",
    "registration.csv",
    "transfers.csv",
    "summary.csv",
    "registration_summary.csv",
];

fn determinism(first: &[&Path], configs: &[String]) -> Outcome {
    for (dir, text) in first.iter().zip(configs) {
        let again = tempfile::tempdir().unwrap();
        run_in(again.path(), text)?;
        for f in FILES {
            let a = std::fs::read(dir.join("out").join(f)).unwrap();
            let b = std::fs::read(again.path().join("out").join(f)).unwrap();
            if a != b {
                return Err(format!("{f} differs between runs"));
            }
        }
    }
    Ok(format!(
        "{} files identical across reruns of both fixture configs",
        FILES.len() * configs.len()
    ))
}

fn guarded<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

fn main() -> ExitCode {
    let trend_dir = tempfile::tempdir().unwrap();
    let budget_dir = tempfile::tempdir().unwrap();
    let configs = [trend_config(), budget_config()];
    let trend = guarded(|| run_in(trend_dir.path(), &configs[0]));
    let budget = guarded(|| run_in(budget_dir.path(), &configs[1]).map(|r| r.0));

    let outcomes: Vec<(usize, Outcome)> = vec![
        (1, guarded(rotation_remd_monotone)),
        (2, guarded(lloyd_segment)),
        (3, guarded(circle_symmetry)),
        (
            4,
            guarded(|| match &trend {
                Ok((r, t)) => registration_trend(r, *t),
                Err(e) => Err(e.clone()),
            }),
        ),
        (
            5,
            guarded(|| match &trend {
                Ok((r, _)) => classification_trend(r),
                Err(e) => Err(e.clone()),
            }),
        ),
        (6, guarded(e_equals_f)),
        (
            7,
            guarded(|| match &budget {
                Ok(r) => budget_properties(r),
                Err(e) => Err(e.clone()),
            }),
        ),
        (8, guarded(projection_oracle)),
        (
            9,
            guarded(|| determinism(&[trend_dir.path(), budget_dir.path()], &configs)),
        ),
    ];
    let mut failed = 0;
    for (k, o) in &outcomes {
        match o {
            Ok(d) => println!("PASS criterion {k}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {k}: {d}");
            }
        }
    }
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
