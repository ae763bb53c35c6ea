use std::path::Path;
use std::time::Instant;

use super::config::{AlgorithmSpec, BudgetParams, ExperimentConfig, RemdParams};
use super::dataset::{generate_dataset, Dataset};
use super::metrics::{closest_sample_share, oracle_points, registration_from};
use crate::baselines::{mdsa, random_sampling, regular_grid};
use crate::budget::{dmd_from, mdpa_with, BudgetConfig, Transfer};
use crate::cmd::{cmd_with, error_counts, LabeledCloud, MultiSampleSet};
use crate::error::{Error, Result};
use crate::geometry::{Manifold, PointCloud, Projector, SampleSet};
use crate::io::fmt_num;
use crate::remd::{remd_with, RemdConfig};
use crate::rng::{derive_seed, tag};

/// One (algorithm, budget, repetition) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub algorithm: String,
    pub budget: usize,
    pub repetition: usize,
    pub allocation: Vec<usize>,
    /// Mean over all test points of all manifolds.
    pub registration_error: Option<f64>,
    /// Percentage of test points whose closest sample among all listed
    /// algorithms belongs to this one.
    pub closest_share: Option<f64>,
    pub classification_rate: Option<f64>,
    pub train_error: Option<f64>,
    pub test_error: Option<f64>,
    /// Seconds; algorithms initialized from REMD exclude the REMD run.
    pub wall_time: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationRow {
    pub algorithm: String,
    pub budget: usize,
    pub repetition: usize,
    pub manifold: usize,
    pub samples: Option<usize>,
    pub registration_error: Option<f64>,
    pub closest_share: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferRow {
    pub algorithm: String,
    pub budget: usize,
    pub repetition: usize,
    pub transfer: Transfer,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub results: Vec<ResultRow>,
    pub registration: Vec<RegistrationRow>,
    pub transfers: Vec<TransferRow>,
    pub timing: bool,
}

/// Seed of repetition `rep`.
pub fn repetition_seed(master: u64, rep: usize) -> u64 {
    derive_seed(master, &[rep as u64])
}

/// Dataset of repetition `rep`.
pub fn repetition_dataset(
    cfg: &ExperimentConfig,
    manifolds: &[Manifold],
    rep: usize,
) -> Result<Dataset> {
    let seed = derive_seed(repetition_seed(cfg.seed, rep), &[tag("dataset")]);
    generate_dataset(manifolds, &cfg.dataset, seed)
}

struct Cell {
    sets: Vec<SampleSet>,
    transfers: Vec<Transfer>,
    wall: f64,
}

/// Shared state of one repetition.
pub struct Context<'a> {
    manifolds: &'a [Manifold],
    working: &'a [Projector],
    train: &'a LabeledCloud,
    class_train: Vec<PointCloud>,
    seed: u64,
    remd: RemdParams,
}

impl<'a> Context<'a> {
    pub fn new(
        cfg: &ExperimentConfig,
        manifolds: &'a [Manifold],
        working: &'a [Projector],
        train: &'a LabeledCloud,
        rep: usize,
    ) -> Self {
        let remd = cfg
            .algorithms
            .iter()
            .find_map(|a| match a {
                AlgorithmSpec::Remd { params: p } => Some(p.clone()),
                _ => None,
            })
            .unwrap_or_default();
        Self {
            manifolds,
            working,
            train,
            class_train: (0..manifolds.len())
                .map(|m| train.points().subset(&train.class_indices(m)))
                .collect(),
            seed: repetition_seed(cfg.seed, rep),
            remd,
        }
    }

    fn seed_for(&self, name: &str, n: usize, extra: u64) -> u64 {
        derive_seed(self.seed, &[tag(name), n as u64, extra])
    }

    /// Independent REMD on each class's training points, `n` samples each.
    pub fn remd_sets(&self, n: usize) -> Result<Vec<SampleSet>> {
        (0..self.manifolds.len())
            .map(|m| {
                let cfg = RemdConfig {
                    n_samples: n,
                    max_iters: self.remd.max_iters,
                    tol: self.remd.tol,
                    seed: self.seed_for("remd", n, m as u64),
                    min_init_spacing: self.remd.min_init_spacing,
                    empty_cell_policy: self.remd.empty_cell_policy,
                    ..Default::default()
                };
                Ok(remd_with(&self.working[m], &self.class_train[m], &cfg)?.samples)
            })
            .collect()
    }

    fn budget_config(&self, p: &BudgetParams, name: &str, n: usize) -> BudgetConfig {
        BudgetConfig {
            dmd_poor_factor: p.dmd_poor_factor,
            dmd_stall_sweeps: p.dmd_stall_sweeps,
            dmd_attempts: p.dmd_attempts,
            seed: self.seed_for(name, n, p.cmd.seed),
            ..BudgetConfig::new(n * self.manifolds.len(), p.dense_factor * n)
        }
    }

    /// Runs one algorithm with `n` samples per manifold (`n x M` in total for
    /// the budget-allocation methods). `remd` is the shared REMD output for
    /// the same budget.
    pub fn run_algorithm(
        &self,
        spec: &AlgorithmSpec,
        n: usize,
        remd: &std::result::Result<Vec<SampleSet>, String>,
    ) -> std::result::Result<(Vec<SampleSet>, Vec<Transfer>), String> {
        let start = remd.clone();
        let joint = |sets: Vec<SampleSet>| MultiSampleSet::new(sets).map_err(|e| e.to_string());
        let r: Result<(Vec<SampleSet>, Vec<Transfer>)> = match spec {
            AlgorithmSpec::Random => (0..self.manifolds.len())
                .map(|m| {
                    random_sampling(&self.manifolds[m], n, self.seed_for("random", n, m as u64))
                })
                .collect::<Result<Vec<_>>>()
                .map(|s| (s, vec![])),
            AlgorithmSpec::Regular => self
                .manifolds
                .iter()
                .map(|m| regular_grid(m, n))
                .collect::<Result<Vec<_>>>()
                .map(|s| (s, vec![])),
            AlgorithmSpec::Remd { .. } => return start.map(|s| (s, vec![])),
            AlgorithmSpec::Cmd { params: p } => {
                let init = joint(start?)?;
                let cfg = crate::cmd::CmdConfig {
                    seed: self.seed_for("cmd", n, p.seed),
                    ..p.clone()
                };
                cmd_with(self.working, init, self.train, &cfg).map(|o| (o.sets.sets, vec![]))
            }
            AlgorithmSpec::Mdsa { params: s } => {
                let init = joint(start?)?;
                mdsa(
                    self.manifolds,
                    init,
                    self.train,
                    s,
                    self.seed_for("mdsa", n, 0),
                )
                .map(|o| (o.sets.sets, vec![]))
            }
            AlgorithmSpec::Mdpa { params: p } => {
                let bc = self.budget_config(p, "mdpa", n);
                mdpa_with(self.working, self.train, &bc, &p.cmd).map(|o| (o.sets.sets, vec![]))
            }
            AlgorithmSpec::Dmd { params: p } => {
                let init = joint(start?)?;
                let bc = self.budget_config(p, "dmd", n);
                dmd_from(self.working, init, self.train, &bc, &p.cmd)
                    .map(|o| (o.sets.sets, o.transfers))
            }
        };
        r.map_err(|e| e.to_string())
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Indexed by algorithm, budget and repetition.
type PerCell<T> = Vec<Vec<Vec<T>>>;

/// Mean error, per-point errors and closest share of one manifold.
type Registration = (f64, Vec<f64>, Option<f64>);

/// Runs every repetition, budget and algorithm and evaluates on the test
/// split. Failures are recorded per row and do not stop the run.
pub fn evaluate_experiment(cfg: &ExperimentConfig, base: &Path) -> Result<EvalReport> {
    cfg.validate()?;
    let manifolds = cfg.build_manifolds(base)?;
    let projectors = |oracle: bool| -> Result<Vec<Projector>> {
        manifolds
            .iter()
            .map(|m| {
                let grid = if oracle {
                    cfg.projection.oracle_for(m)
                } else {
                    cfg.projection.working_for(m)
                };
                Projector::new(m, &grid, cfg.projection.refine)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Config(format!("projection grid: {e}")))
    };
    let working = projectors(false)?;
    let oracle = projectors(true)?;
    let classes = manifolds.len();
    let needs_remd = cfg.algorithms.iter().any(|a| {
        matches!(
            a,
            AlgorithmSpec::Remd { .. }
                | AlgorithmSpec::Cmd { .. }
                | AlgorithmSpec::Mdsa { .. }
                | AlgorithmSpec::Dmd { .. }
        )
    });

    // cells[(a, b, r)]
    let mut cells: Vec<Vec<Vec<std::result::Result<Cell, String>>>> = Vec::new();
    cells.resize_with(cfg.algorithms.len(), || {
        let mut v = Vec::new();
        v.resize_with(cfg.budgets.len(), Vec::new);
        v
    });
    let mut reg: PerCell<Vec<Option<Registration>>> =
        vec![vec![vec![Vec::new(); cfg.repetitions]; cfg.budgets.len()]; cfg.algorithms.len()];
    let mut cls: PerCell<Option<(f64, usize)>> =
        vec![vec![vec![None; cfg.repetitions]; cfg.budgets.len()]; cfg.algorithms.len()];

    for rep in 0..cfg.repetitions {
        let data = repetition_dataset(cfg, &manifolds, rep)?;
        let class_test: Vec<PointCloud> = (0..classes)
            .map(|m| data.test.points().subset(&data.test.class_indices(m)))
            .collect();
        let truth = class_test
            .iter()
            .zip(&oracle)
            .map(|(c, o)| oracle_points(o, c))
            .collect::<Result<Vec<_>>>()?;
        let ctx = Context::new(cfg, &manifolds, &working, &data.train, rep);
        for (b, &n) in cfg.budgets.iter().enumerate() {
            let t_remd = Instant::now();
            let remd = if needs_remd {
                ctx.remd_sets(n).map_err(|e| e.to_string())
            } else {
                Err("not run".into())
            };
            let remd_wall = t_remd.elapsed().as_secs_f64();
            for (a, spec) in cfg.algorithms.iter().enumerate() {
                let t0 = Instant::now();
                let out = ctx
                    .run_algorithm(spec, n, &remd)
                    .map(|(sets, transfers)| Cell {
                        sets,
                        transfers,
                        wall: match spec {
                            AlgorithmSpec::Remd { .. } => remd_wall,
                            _ => t0.elapsed().as_secs_f64(),
                        },
                    });
                let scored = out.and_then(|cell| {
                    let per_manifold = (0..classes)
                        .map(|m| {
                            registration_from(&truth[m], &cell.sets[m], &class_test[m])
                                .map(|(mean, errs)| Some((mean, errs, None)))
                        })
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| e.to_string())?;
                    reg[a][b][rep] = per_manifold;
                    if classes >= 2 {
                        let ms =
                            MultiSampleSet::new(cell.sets.clone()).map_err(|e| e.to_string())?;
                        let train = error_counts(&ms, &data.train).map_err(|e| e.to_string())?;
                        let test = error_counts(&ms, &data.test).map_err(|e| e.to_string())?;
                        cls[a][b][rep] = Some((
                            train.misclassified as f64 / train.total as f64,
                            test.misclassified,
                        ));
                    }
                    Ok(cell)
                });
                cells[a][b].push(scored);
            }
            // closest-sample shares among the algorithms that succeeded
            let ok: Vec<usize> = (0..cfg.algorithms.len())
                .filter(|&a| cells[a][b][rep].is_ok())
                .collect();
            if ok.len() >= 2 {
                for m in 0..classes {
                    let sets: Vec<&SampleSet> = ok
                        .iter()
                        .map(|&a| &cells[a][b][rep].as_ref().unwrap().sets[m])
                        .collect();
                    let shares = closest_sample_share(&sets, &class_test[m])?;
                    for (k, &a) in ok.iter().enumerate() {
                        if let Some(r) = reg[a][b][rep][m].as_mut() {
                            r.2 = Some(shares.counts[k] as f64);
                        }
                    }
                }
            }
        }
    }

    let mut report = EvalReport {
        timing: cfg.timing,
        ..Default::default()
    };
    let test_total = cfg.dataset.test_per_class * classes;
    for (a, spec) in cfg.algorithms.iter().enumerate() {
        let name = spec.name().to_string();
        for (b, &n) in cfg.budgets.iter().enumerate() {
            for rep in 0..cfg.repetitions {
                let cell = &cells[a][b][rep];
                let row_err = cell.as_ref().err().cloned();
                for m in 0..classes {
                    let r = reg[a][b][rep].get(m).cloned().flatten();
                    report.registration.push(RegistrationRow {
                        algorithm: name.clone(),
                        budget: n,
                        repetition: rep,
                        manifold: m,
                        samples: cell.as_ref().ok().map(|c| c.sets[m].len()),
                        registration_error: r.as_ref().map(|r| r.0),
                        closest_share: r.as_ref().and_then(|r| {
                            r.2.map(|c| 100.0 * c / cfg.dataset.test_per_class as f64)
                        }),
                        error: row_err.clone(),
                    });
                }
                let Ok(c) = cell else {
                    report.results.push(ResultRow {
                        algorithm: name.clone(),
                        budget: n,
                        repetition: rep,
                        allocation: vec![],
                        registration_error: None,
                        closest_share: None,
                        classification_rate: None,
                        train_error: None,
                        test_error: None,
                        wall_time: None,
                        error: row_err,
                    });
                    continue;
                };
                let regs: Vec<_> = reg[a][b][rep].iter().flatten().collect();
                let all_errs: Vec<f64> = regs.iter().flat_map(|r| r.1.iter().copied()).collect();
                let wins: Option<f64> = regs.iter().map(|r| r.2).sum();
                let (train_error, rate, test_error) = match cls[a][b][rep] {
                    Some((tr, mis)) => (
                        Some(tr),
                        Some(100.0 * (test_total - mis) as f64 / test_total as f64),
                        Some(mis as f64 / test_total as f64),
                    ),
                    None => (None, None, None),
                };
                report.results.push(ResultRow {
                    algorithm: name.clone(),
                    budget: n,
                    repetition: rep,
                    allocation: c.sets.iter().map(SampleSet::len).collect(),
                    registration_error: Some(mean(&all_errs)),
                    closest_share: wins.map(|w| 100.0 * w / test_total as f64),
                    classification_rate: rate,
                    train_error,
                    test_error,
                    wall_time: cfg.timing.then_some(c.wall),
                    error: None,
                });
                report
                    .transfers
                    .extend(c.transfers.iter().map(|t| TransferRow {
                        algorithm: name.clone(),
                        budget: n,
                        repetition: rep,
                        transfer: t.clone(),
                    }));
            }
        }
    }
    Ok(report)
}

/// [`evaluate_experiment`] followed by writing the CSV files into
/// `base/output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, base: &Path) -> Result<EvalReport> {
    let report = evaluate_experiment(cfg, base)?;
    report.write(&base.join(&cfg.output_dir))?;
    Ok(report)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean of the present values, `None` when there are none.
fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| mean(&v))
}

impl EvalReport {
    /// Writes `results.csv`, `registration.csv`, `transfers.csv`,
    /// `summary.csv` and `registration_summary.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut header = vec![
            "algorithm",
            "budget",
            "repetition",
            "allocation",
            "registration_error",
            "closest_share",
            "classification_rate",
            "train_error",
            "test_error",
        ];
        if self.timing {
            header.push("wall_time");
        }
        header.push("error");
        write_csv(
            &dir.join("results.csv"),
            &header,
            self.results.iter().map(|r| {
                let mut row = vec![
                    r.algorithm.clone(),
                    r.budget.to_string(),
                    r.repetition.to_string(),
                    r.allocation
                        .iter()
                        .map(usize::to_string)
                        .collect::<Vec<_>>()
                        .join(";"),
                    opt(r.registration_error),
                    opt(r.closest_share),
                    opt(r.classification_rate),
                    opt(r.train_error),
                    opt(r.test_error),
                ];
                if self.timing {
                    row.push(opt(r.wall_time));
                }
                row.push(r.error.clone().unwrap_or_default());
                row
            }),
        )?;
        write_csv(
            &dir.join("registration.csv"),
            &[
                "algorithm",
                "budget",
                "repetition",
                "manifold",
                "samples",
                "registration_error",
                "closest_share",
                "error",
            ],
            self.registration.iter().map(|r| {
                vec![
                    r.algorithm.clone(),
                    r.budget.to_string(),
                    r.repetition.to_string(),
                    r.manifold.to_string(),
                    r.samples.map(|s| s.to_string()).unwrap_or_default(),
                    opt(r.registration_error),
                    opt(r.closest_share),
                    r.error.clone().unwrap_or_default(),
                ]
            }),
        )?;
        write_csv(
            &dir.join("transfers.csv"),
            &[
                "algorithm",
                "budget",
                "repetition",
                "round",
                "donor_manifold",
                "donor_sample",
                "recipient_manifold",
                "error_before",
                "error_after",
                "committed",
            ],
            self.transfers.iter().map(|t| {
                let x = &t.transfer;
                vec![
                    t.algorithm.clone(),
                    t.budget.to_string(),
                    t.repetition.to_string(),
                    x.round.to_string(),
                    x.donor.0.to_string(),
                    x.donor.1.to_string(),
                    x.recipient.to_string(),
                    fmt_num(x.error_before),
                    fmt_num(x.error_after),
                    x.committed.to_string(),
                ]
            }),
        )?;
        self.write_summaries(dir)
    }

    fn write_summaries(&self, dir: &Path) -> Result<()> {
        let mut keys: Vec<(&str, usize)> = Vec::new();
        for r in &self.results {
            if !keys.contains(&(r.algorithm.as_str(), r.budget)) {
                keys.push((&r.algorithm, r.budget));
            }
        }
        let mut header = vec![
            "algorithm",
            "budget",
            "repetitions_ok",
            "registration_error",
            "closest_share",
            "classification_rate",
            "train_error",
            "test_error",
        ];
        if self.timing {
            header.push("wall_time");
        }
        write_csv(
            &dir.join("summary.csv"),
            &header,
            keys.iter().map(|&(a, n)| {
                let rows: Vec<&ResultRow> = self
                    .results
                    .iter()
                    .filter(|r| r.algorithm == a && r.budget == n && r.error.is_none())
                    .collect();
                let col =
                    |f: fn(&ResultRow) -> Option<f64>| opt(mean_of(rows.iter().map(|r| f(r))));
                let mut row = vec![
                    a.to_string(),
                    n.to_string(),
                    rows.len().to_string(),
                    col(|r| r.registration_error),
                    col(|r| r.closest_share),
                    col(|r| r.classification_rate),
                    col(|r| r.train_error),
                    col(|r| r.test_error),
                ];
                if self.timing {
                    row.push(col(|r| r.wall_time));
                }
                row
            }),
        )?;
        let mut rkeys: Vec<(&str, usize, usize)> = Vec::new();
        for r in &self.registration {
            if !rkeys.contains(&(r.algorithm.as_str(), r.budget, r.manifold)) {
                rkeys.push((&r.algorithm, r.budget, r.manifold));
            }
        }
        write_csv(
            &dir.join("registration_summary.csv"),
            &[
                "algorithm",
                "budget",
                "manifold",
                "repetitions_ok",
                "registration_error",
                "closest_share",
            ],
            rkeys.iter().map(|&(a, n, m)| {
                let rows: Vec<&RegistrationRow> = self
                    .registration
                    .iter()
                    .filter(|r| {
                        r.algorithm == a && r.budget == n && r.manifold == m && r.error.is_none()
                    })
                    .collect();
                vec![
                    a.to_string(),
                    n.to_string(),
                    m.to_string(),
                    rows.len().to_string(),
                    opt(mean_of(rows.iter().map(|r| r.registration_error))),
                    opt(mean_of(rows.iter().map(|r| r.closest_share))),
                ]
            }),
        )
    }
}
