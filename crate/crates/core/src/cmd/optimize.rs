use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{DistanceTable, LabeledCloud, MisclassRegions, MultiSampleSet};
use crate::error::{usage, Result};
use crate::geometry::{GridSpec, Manifold, ManifoldSample, Projector, RefineConfig};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    #[default]
    RoundRobin,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `lambda + alpha * (mu - lambda)`
    Toward,
    /// `lambda + beta * (lambda - nu)`
    Away,
}

fn default_steps() -> Vec<f64> {
    vec![0.125, 0.25, 0.375, 0.5, 0.75, 1.0]
}

fn default_inner() -> usize {
    10
}

fn default_outer() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CmdConfig {
    #[serde(default = "default_steps")]
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_steps")]
    pub beta_grid: Vec<f64>,
    #[serde(default = "default_inner")]
    pub inner_max: usize,
    #[serde(default = "default_outer")]
    pub outer_max: usize,
    pub tol: f64,
    pub seed: u64,
    pub sweep_order: SweepOrder,
    pub grid: GridSpec,
    pub refine: RefineConfig,
}

impl Default for CmdConfig {
    fn default() -> Self {
        Self {
            alpha_grid: default_steps(),
            beta_grid: default_steps(),
            inner_max: default_inner(),
            outer_max: default_outer(),
            tol: 0.0,
            seed: 0,
            sweep_order: SweepOrder::RoundRobin,
            grid: GridSpec::default(),
            refine: RefineConfig::default(),
        }
    }
}

impl CmdConfig {
    pub fn validate(&self) -> Result<()> {
        for s in self.alpha_grid.iter().chain(&self.beta_grid) {
            if !(s.is_finite() && *s > 0.0) {
                return usage(format!("step candidate {s} is not strictly positive"));
            }
        }
        if !(self.tol >= 0.0) {
            return usage("tol must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmdOutput {
    pub sets: MultiSampleSet,
    /// Training error before the first sweep and after every sweep.
    pub trace: Vec<f64>,
    pub commits: usize,
}

/// Evaluated candidate position for one sample.
#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub sample: ManifoldSample,
    pub col: Vec<f64>,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct State {
    pub sets: MultiSampleSet,
    pub table: DistanceTable,
    pub errors: usize,
}

/// Mutable joint discretization bound to a fixed labeled cloud.
pub struct CmdEngine<'a> {
    projectors: &'a [Projector],
    cloud: &'a LabeledCloud,
    cfg: &'a CmdConfig,
    state: State,
}

impl<'a> CmdEngine<'a> {
    /// `projectors` holds one working-density projector per class manifold.
    pub fn new(
        projectors: &'a [Projector],
        sets: MultiSampleSet,
        cloud: &'a LabeledCloud,
        cfg: &'a CmdConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let manifolds: Vec<Manifold> = projectors.iter().map(|p| p.manifold().clone()).collect();
        sets.check_manifolds(&manifolds)?;
        cloud.check(&sets)?;
        let table = DistanceTable::build(&sets, cloud);
        let errors = table.errors(cloud.labels());
        Ok(Self {
            projectors,
            cloud,
            cfg,
            state: State {
                sets,
                table,
                errors,
            },
        })
    }

    pub fn errors(&self) -> usize {
        self.state.errors
    }

    pub fn error(&self) -> f64 {
        if self.cloud.is_empty() {
            0.0
        } else {
            self.state.errors as f64 / self.cloud.len() as f64
        }
    }

    pub fn sets(&self) -> &MultiSampleSet {
        &self.state.sets
    }

    pub fn into_sets(self) -> MultiSampleSet {
        self.state.sets
    }

    pub fn manifold(&self, m: usize) -> &Manifold {
        self.projectors[m].manifold()
    }

    pub fn sweep_order(&self) -> SweepOrder {
        self.cfg.sweep_order
    }

    pub(crate) fn snapshot(&self) -> State {
        self.state.clone()
    }

    pub(crate) fn restore(&mut self, state: State) {
        self.state = state;
    }

    pub fn regions(&self, m: usize, i: usize) -> MisclassRegions {
        let (theta, phi) = self.state.table.regions(m, i, self.cloud.labels());
        MisclassRegions::from_indices(self.cloud, theta, phi)
    }

    /// `(|theta|, |phi|)` of every sample, grouped by class.
    pub fn region_counts(&self) -> Vec<Vec<(usize, usize)>> {
        let flat = self.state.table.region_counts(self.cloud.labels());
        let mut out = Vec::new();
        let mut it = flat.into_iter();
        for s in &self.state.sets.sets {
            out.push(it.by_ref().take(s.len()).collect());
        }
        out
    }

    pub(crate) fn candidate(&self, m: usize, i: usize, param: Vec<f64>) -> Candidate {
        let sample = ManifoldSample::at(self.manifold(m), param);
        let col = DistanceTable::column(self.cloud, &sample.point);
        let g = self.state.table.global(m, i);
        let errors = self
            .state
            .table
            .candidate_errors(g, &col, self.cloud.labels());
        Candidate {
            sample,
            col,
            errors,
        }
    }

    pub(crate) fn remove_sample(&mut self, m: usize, i: usize) -> Result<()> {
        if self.state.sets.sets[m].len() < 2 {
            return usage(format!(
                "removing sample ({m}, {i}) would empty its manifold"
            ));
        }
        self.state.table.remove(m, i);
        self.state.sets.sets[m].samples.remove(i);
        self.state.errors = self.state.table.errors(self.cloud.labels());
        Ok(())
    }

    /// Appends a sample at `param` as the last sample of class `m`.
    pub(crate) fn insert_sample(&mut self, m: usize, param: Vec<f64>) {
        let sample = ManifoldSample::at(self.manifold(m), param);
        let col = DistanceTable::column(self.cloud, &sample.point);
        self.state.table.insert(m, &col);
        self.state.sets.sets[m].samples.push(sample);
        self.state.errors = self.state.table.errors(self.cloud.labels());
    }

    pub(crate) fn project(&self, m: usize, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.projectors[m].project(x)?.param)
    }

    pub(crate) fn commit(&mut self, m: usize, i: usize, c: Candidate) {
        let g = self.state.table.global(m, i);
        self.state.table.set_column(g, &c.col);
        self.state.sets.sets[m].samples[i] = c.sample;
        self.state.errors = c.errors;
    }

    /// Line search along the toward/away direction over the step grid plus
    /// step 0. Commits the best candidate only if it strictly lowers the error;
    /// ties keep the earliest candidate. Returns whether the sample moved.
    pub fn perturb(&mut self, m: usize, i: usize, target: &[f64], dir: Direction) -> Result<bool> {
        let dom = self.manifold(m).domain();
        if target.len() != dom.dims() {
            return usage("target parameter has the wrong dimension");
        }
        let target = dom.normalize(target)?;
        let lambda = self.state.sets.sets[m].samples[i].param.clone();
        let (direction, steps) = match dir {
            Direction::Toward => (dom.displacement(&lambda, &target), &self.cfg.alpha_grid),
            Direction::Away => (dom.displacement(&target, &lambda), &self.cfg.beta_grid),
        };
        let mut best: Option<Candidate> = None;
        let mut best_errors = self.state.errors;
        for &t in steps {
            let c = self.candidate(m, i, dom.step(&lambda, &direction, t));
            if c.errors < best_errors {
                best_errors = c.errors;
                best = Some(c);
            }
        }
        match best {
            Some(c) => {
                self.commit(m, i, c);
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Alternates toward-theta and away-from-phi moves until neither moves the
    /// sample or `inner_max` rounds pass. Returns whether the error dropped.
    pub fn optimize_sample(&mut self, m: usize, i: usize) -> Result<bool> {
        let start = self.state.errors;
        for _ in 0..self.cfg.inner_max {
            if self.state.errors == 0 {
                break;
            }
            let mut moved = false;
            let mut r = self.regions(m, i);
            if let Some(theta) = &r.theta_centroid {
                let mu = self.project(m, theta)?;
                if self.perturb(m, i, &mu, Direction::Toward)? {
                    moved = true;
                    r = self.regions(m, i);
                }
            }
            if let Some(phi) = &r.phi_centroid {
                let nu = self.project(m, phi)?;
                moved |= self.perturb(m, i, &nu, Direction::Away)?;
            }
            if !moved {
                break;
            }
        }
        Ok(self.state.errors < start)
    }

    pub fn sample_order(&self) -> Vec<(usize, usize)> {
        self.state
            .sets
            .sets
            .iter()
            .enumerate()
            .flat_map(|(m, s)| (0..s.len()).map(move |i| (m, i)))
            .collect()
    }

    /// One pass of [`Self::optimize_sample`] over `order`; returns the number
    /// of samples whose optimization lowered the error.
    pub fn sweep(&mut self, order: &[(usize, usize)]) -> Result<usize> {
        let mut improved = 0;
        for &(m, i) in order {
            improved += usize::from(self.optimize_sample(m, i)?);
        }
        Ok(improved)
    }

    /// Sweeps until a sweep lowers the error by no more than `tol`, the error
    /// reaches zero, or `outer_max` sweeps pass.
    pub fn run(&mut self) -> Result<(Vec<f64>, usize)> {
        let mut rng = seeded(self.cfg.seed);
        let mut trace = vec![self.error()];
        let mut commits = 0;
        for _ in 0..self.cfg.outer_max {
            if self.state.errors == 0 {
                break;
            }
            let mut order = self.sample_order();
            if self.cfg.sweep_order == SweepOrder::Random {
                order.shuffle(&mut rng);
            }
            commits += self.sweep(&order)?;
            let prev = *trace.last().unwrap();
            trace.push(self.error());
            if prev - self.error() <= self.cfg.tol {
                break;
            }
        }
        Ok((trace, commits))
    }
}

pub(crate) fn working_projectors(
    manifolds: &[Manifold],
    cfg: &CmdConfig,
) -> Result<Vec<Projector>> {
    manifolds
        .iter()
        .map(|m| Projector::new(m, &cfg.grid, cfg.refine))
        .collect()
}

pub fn cmd(
    manifolds: &[Manifold],
    msets: MultiSampleSet,
    cloud: &LabeledCloud,
    cfg: &CmdConfig,
) -> Result<CmdOutput> {
    let projectors = working_projectors(manifolds, cfg)?;
    cmd_with(&projectors, msets, cloud, cfg)
}

pub fn cmd_with(
    projectors: &[Projector],
    msets: MultiSampleSet,
    cloud: &LabeledCloud,
    cfg: &CmdConfig,
) -> Result<CmdOutput> {
    let mut engine = CmdEngine::new(projectors, msets, cloud, cfg)?;
    let (trace, commits) = engine.run()?;
    Ok(CmdOutput {
        sets: engine.into_sets(),
        trace,
        commits,
    })
}

/// Single line search of sample `i` of class `m` toward (or away from) the
/// parameter `target`. Returns the updated sets and their training error.
#[allow(clippy::too_many_arguments)]
pub fn perturb_sample(
    manifolds: &[Manifold],
    msets: MultiSampleSet,
    cloud: &LabeledCloud,
    m: usize,
    i: usize,
    target: &[f64],
    direction: Direction,
    cfg: &CmdConfig,
) -> Result<(MultiSampleSet, f64)> {
    if m >= msets.classes() || i >= msets.sets[m].len() {
        return usage(format!("no sample ({m}, {i})"));
    }
    let projectors = working_projectors(manifolds, cfg)?;
    let mut engine = CmdEngine::new(&projectors, msets, cloud, cfg)?;
    engine.perturb(m, i, target, direction)?;
    let e = engine.error();
    Ok((engine.into_sets(), e))
}
