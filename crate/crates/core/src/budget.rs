//! Splitting a fixed total number of samples across class manifolds.
//!
//! `mdpa` prunes dense regular grids down to the budget and then runs CMD.
//! `dmd` starts from an equal split and moves samples between manifolds
//! while optimizing, keeping only transfers that lower the training error.

use serde::{Deserialize, Serialize};

use crate::baselines::regular_grid;
use crate::cmd::{cmd_with, CmdConfig, CmdEngine, LabeledCloud, MultiSampleSet, SweepOrder};
use crate::error::{usage, Result};
use crate::geometry::{Manifold, Projector};

fn default_poor() -> f64 {
    2.0
}

fn default_stall() -> usize {
    2
}

fn default_attempts() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetConfig {
    pub total_budget: usize,
    /// Initial regular grid size per manifold for pruning.
    pub dense_grid_per_manifold: usize,
    /// A sample is poorly represented when its theta count exceeds this
    /// multiple of the average theta count.
    #[serde(default = "default_poor")]
    pub dmd_poor_factor: f64,
    /// Non-improving sweeps a sample must sit through before a transfer.
    #[serde(default = "default_stall")]
    pub dmd_stall_sweeps: usize,
    /// Transfer attempts per round before giving up.
    #[serde(default = "default_attempts")]
    pub dmd_attempts: usize,
    /// Sweep-order seed handed to CMD.
    #[serde(default)]
    pub seed: u64,
}

impl BudgetConfig {
    pub fn new(total_budget: usize, dense_grid_per_manifold: usize) -> Self {
        Self {
            total_budget,
            dense_grid_per_manifold,
            dmd_poor_factor: default_poor(),
            dmd_stall_sweeps: default_stall(),
            dmd_attempts: default_attempts(),
            seed: 0,
        }
    }

    fn check(&self, classes: usize) -> Result<()> {
        if classes < 2 {
            return usage("budget allocation needs at least two manifolds");
        }
        if self.total_budget < classes {
            return usage(format!(
                "budget {} cannot give each of {classes} manifolds a sample",
                self.total_budget
            ));
        }
        if !(self.dmd_poor_factor > 0.0) {
            return usage("dmd_poor_factor must be positive");
        }
        Ok(())
    }

    fn cmd_config(&self, cmd_cfg: &CmdConfig) -> CmdConfig {
        CmdConfig {
            seed: self.seed,
            ..cmd_cfg.clone()
        }
    }
}

/// Equal split of `total` over `classes`, remainder to the lowest indices.
pub fn equal_split(total: usize, classes: usize) -> Vec<usize> {
    (0..classes)
        .map(|m| total / classes + usize::from(m < total % classes))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetOutput {
    pub sets: MultiSampleSet,
    pub allocation: Vec<usize>,
    /// Training error after each stage (pruning end, each CMD run).
    pub trace: Vec<f64>,
}

/// Deletion target: smallest `(|theta|, |phi|, m, i)` among samples whose
/// manifold keeps at least one other sample, optionally skipping one sample.
fn weakest(counts: &[Vec<(usize, usize)>], skip: Option<(usize, usize)>) -> Option<(usize, usize)> {
    let mut best: Option<((usize, usize), (usize, usize))> = None;
    for (m, c) in counts.iter().enumerate() {
        if c.len() < 2 {
            continue;
        }
        for (i, &k) in c.iter().enumerate() {
            if Some((m, i)) == skip {
                continue;
            }
            if best.is_none_or(|(bk, _)| k < bk) {
                best = Some((k, (m, i)));
            }
        }
    }
    best.map(|b| b.1)
}

fn projectors(manifolds: &[Manifold], cmd_cfg: &CmdConfig) -> Result<Vec<Projector>> {
    manifolds
        .iter()
        .map(|m| Projector::new(m, &cmd_cfg.grid, cmd_cfg.refine))
        .collect()
}

pub fn mdpa(
    manifolds: &[Manifold],
    cloud: &LabeledCloud,
    cfg: &BudgetConfig,
    cmd_cfg: &CmdConfig,
) -> Result<BudgetOutput> {
    let projectors = projectors(manifolds, cmd_cfg)?;
    mdpa_with(&projectors, cloud, cfg, cmd_cfg)
}

/// Like [`mdpa`] with prebuilt per-manifold projectors.
pub fn mdpa_with(
    projectors: &[Projector],
    cloud: &LabeledCloud,
    cfg: &BudgetConfig,
    cmd_cfg: &CmdConfig,
) -> Result<BudgetOutput> {
    cfg.check(projectors.len())?;
    if cfg.dense_grid_per_manifold * projectors.len() < cfg.total_budget {
        return usage("dense grids hold fewer samples than the budget");
    }
    let dense = projectors
        .iter()
        .map(|p| regular_grid(p.manifold(), cfg.dense_grid_per_manifold))
        .collect::<Result<Vec<_>>>()?;
    let cmd_cfg = cfg.cmd_config(cmd_cfg);
    let mut engine = CmdEngine::new(projectors, MultiSampleSet::new(dense)?, cloud, &cmd_cfg)?;
    while engine.sets().total() > cfg.total_budget {
        let (m, i) = weakest(&engine.region_counts(), None)
            .expect("budget of at least one sample per manifold");
        engine.remove_sample(m, i)?;
    }
    let pruned = engine.error();
    let out = cmd_with(projectors, engine.into_sets(), cloud, &cmd_cfg)?;
    let mut trace = vec![pruned];
    trace.extend(out.trace.into_iter().skip(1));
    Ok(BudgetOutput {
        allocation: out.sets.allocation(),
        sets: out.sets,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    /// Transfer round (0 after the first CMD convergence).
    pub round: usize,
    pub donor: (usize, usize),
    pub recipient: usize,
    pub error_before: f64,
    pub error_after: f64,
    pub committed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmdOutput {
    pub sets: MultiSampleSet,
    pub allocation: Vec<usize>,
    pub trace: Vec<f64>,
    pub transfers: Vec<Transfer>,
}

/// DMD from regular grids of an equal split.
pub fn dmd(
    manifolds: &[Manifold],
    cloud: &LabeledCloud,
    cfg: &BudgetConfig,
    cmd_cfg: &CmdConfig,
) -> Result<DmdOutput> {
    cfg.check(manifolds.len())?;
    let init = manifolds
        .iter()
        .zip(equal_split(cfg.total_budget, manifolds.len()))
        .map(|(m, n)| regular_grid(m, n))
        .collect::<Result<Vec<_>>>()?;
    let projectors = projectors(manifolds, cmd_cfg)?;
    dmd_from(&projectors, MultiSampleSet::new(init)?, cloud, cfg, cmd_cfg)
}

/// DMD from given initial sets, whose total must equal the budget.
pub fn dmd_from(
    projectors: &[Projector],
    init: MultiSampleSet,
    cloud: &LabeledCloud,
    cfg: &BudgetConfig,
    cmd_cfg: &CmdConfig,
) -> Result<DmdOutput> {
    cfg.check(init.classes())?;
    if init.total() != cfg.total_budget {
        return usage("initial sets do not match the budget");
    }
    let cmd_cfg = cfg.cmd_config(cmd_cfg);
    let mut engine = CmdEngine::new(projectors, init, cloud, &cmd_cfg)?;
    let (mut trace, _) = engine.run()?;
    let mut transfers = Vec::new();
    for round in 0..cmd_cfg.outer_max {
        if engine.errors() == 0 {
            break;
        }
        if !settle(&mut engine, cfg, &mut trace)? {
            continue;
        }
        if !transfer_round(&mut engine, cfg, round, &mut transfers)? {
            break;
        }
        trace.push(engine.error());
        let (more, _) = engine.run()?;
        trace.extend(more.into_iter().skip(1));
    }
    let sets = engine.into_sets();
    Ok(DmdOutput {
        allocation: sets.allocation(),
        sets,
        trace,
        transfers,
    })
}

/// Extra non-improving sweeps so every sample has stalled for
/// `dmd_stall_sweeps` sweeps. With round-robin order a non-improving sweep
/// leaves the state unchanged, so the repeats are skipped. Returns false if
/// a sweep improved and CMD was resumed to convergence without settling.
fn settle(engine: &mut CmdEngine<'_>, cfg: &BudgetConfig, trace: &mut Vec<f64>) -> Result<bool> {
    if engine.sweep_order() == SweepOrder::RoundRobin {
        return Ok(true);
    }
    for _ in 1..cfg.dmd_stall_sweeps {
        let order = engine.sample_order();
        if engine.sweep(&order)? > 0 {
            trace.push(engine.error());
            let (more, _) = engine.run()?;
            trace.extend(more.into_iter().skip(1));
            return Ok(false);
        }
    }
    Ok(true)
}

/// Tries to move one sample to a poorly represented region. Returns whether
/// a transfer was committed.
fn transfer_round(
    engine: &mut CmdEngine<'_>,
    cfg: &BudgetConfig,
    round: usize,
    log: &mut Vec<Transfer>,
) -> Result<bool> {
    let counts = engine.region_counts();
    let flat: Vec<((usize, usize), usize)> = counts
        .iter()
        .enumerate()
        .flat_map(|(m, c)| c.iter().enumerate().map(move |(i, k)| ((m, i), k.0)))
        .collect();
    let avg = flat.iter().map(|f| f.1 as f64).sum::<f64>() / flat.len() as f64;
    let mut poor: Vec<((usize, usize), usize)> = flat
        .into_iter()
        .filter(|&(_, theta)| theta > 0 && theta as f64 > cfg.dmd_poor_factor * avg)
        .collect();
    poor.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

    for &((mr, ir), _) in poor.iter().take(cfg.dmd_attempts) {
        let Some((md, id)) = weakest(&counts, Some((mr, ir))) else {
            break;
        };
        let theta = engine
            .regions(mr, ir)
            .theta_centroid
            .expect("poor sample has theta points");
        let param = engine.project(mr, &theta)?;
        let before = engine.errors();
        let error_before = engine.error();
        let snapshot = engine.snapshot();

        engine.remove_sample(md, id)?;
        engine.insert_sample(mr, param);
        let touched: Vec<(usize, usize)> = engine
            .sample_order()
            .into_iter()
            .filter(|&(m, _)| m == md || m == mr)
            .collect();
        engine.sweep(&touched)?;

        let committed = engine.errors() < before;
        log.push(Transfer {
            round,
            donor: (md, id),
            recipient: mr,
            error_before,
            error_after: engine.error(),
            committed,
        });
        if committed {
            return Ok(true);
        }
        engine.restore(snapshot);
    }
    Ok(false)
}
