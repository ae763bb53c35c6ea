//! Reference discretizations: uniform random parameters, a regular parameter
//! grid, and simulated annealing on the joint classification error.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cmd::{CmdConfig, CmdEngine, LabeledCloud, MultiSampleSet};
use crate::error::{usage, Result};
use crate::geometry::{GridSpec, Manifold, ManifoldSample, Projector, RefineConfig, SampleSet};
use crate::rng::seeded;

/// `n` parameters drawn uniformly per dimension, in draw order.
pub fn random_sampling(manifold: &Manifold, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return usage("sample count must be at least 1");
    }
    let dom = manifold.domain();
    let mut rng = seeded(seed);
    let samples = (0..n)
        .map(|_| {
            let u: Vec<f64> = (0..dom.dims()).map(|_| rng.random::<f64>()).collect();
            ManifoldSample::at(manifold, dom.from_unit(&u))
        })
        .collect();
    SampleSet::new(manifold.id(), samples)
}

/// Per-dimension counts with product at most `n`, proportional to `widths`.
pub fn grid_counts(widths: &[f64], n: usize) -> Vec<usize> {
    let d = widths.len() as f64;
    let scale = (n as f64 / widths.iter().product::<f64>()).powf(1.0 / d);
    let ideal: Vec<f64> = widths.iter().map(|w| w * scale).collect();
    let mut k: Vec<usize> = ideal.iter().map(|&x| (x.floor() as usize).max(1)).collect();
    // flooring to at least one can overshoot when some widths are tiny
    while k.iter().product::<usize>() > n {
        let j = (0..k.len()).max_by_key(|&j| k[j]).unwrap();
        k[j] -= 1;
    }
    loop {
        let prod: usize = k.iter().product();
        let mut order: Vec<usize> = (0..k.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = ideal[a] - k[a] as f64;
            let rb = ideal[b] - k[b] as f64;
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let Some(j) = order.into_iter().find(|&j| prod / k[j] * (k[j] + 1) <= n) else {
            break;
        };
        k[j] += 1;
    }
    k
}

/// Cell-centred lattice over the parameter domain (first dimension slowest);
/// any budget the lattice cannot use is filled by seed-0 random samples.
pub fn regular_grid(manifold: &Manifold, n: usize) -> Result<SampleSet> {
    if n == 0 {
        return usage("sample count must be at least 1");
    }
    let dom = manifold.domain();
    let widths: Vec<f64> = (0..dom.dims()).map(|j| dom.width(j)).collect();
    let k = grid_counts(&widths, n);
    let total: usize = k.iter().product();
    let mut samples = Vec::with_capacity(n);
    for flat in 0..total {
        let mut rem = flat;
        let mut param = vec![0.0; k.len()];
        for j in (0..k.len()).rev() {
            let i = rem % k[j];
            rem /= k[j];
            let b = dom.bound(j);
            param[j] = b.lo + (2 * i + 1) as f64 * b.width() / (2 * k[j]) as f64;
        }
        samples.push(ManifoldSample::at(manifold, param));
    }
    if total < n {
        samples.extend(random_sampling(manifold, n - total, 0)?.samples);
    }
    SampleSet::new(manifold.id(), samples)
}

fn default_t0() -> f64 {
    0.005
}

fn default_cooling() -> f64 {
    0.997
}

fn default_steps() -> usize {
    2000
}

fn default_sigma() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    #[serde(default = "default_t0")]
    pub t0: f64,
    /// Geometric factor applied to the temperature after every step.
    #[serde(default = "default_cooling")]
    pub cooling: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Proposal standard deviation as a fraction of each dimension's width.
    #[serde(default = "default_sigma")]
    pub sigma_frac: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            t0: default_t0(),
            cooling: default_cooling(),
            steps: default_steps(),
            sigma_frac: default_sigma(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdsaOutput {
    /// Best sets seen over the whole run.
    pub sets: MultiSampleSet,
    /// Current training error after every step, preceded by the initial error.
    pub trace: Vec<f64>,
    /// Best-so-far training error, aligned with `trace`.
    pub best_trace: Vec<f64>,
    pub accepted: usize,
}

/// Simulated annealing over sample parameters with the training
/// classification error as cost.
pub fn mdsa(
    manifolds: &[Manifold],
    msets: MultiSampleSet,
    cloud: &LabeledCloud,
    schedule: &AnnealSchedule,
    seed: u64,
) -> Result<MdsaOutput> {
    if !(schedule.t0 > 0.0) || !(schedule.cooling > 0.0 && schedule.cooling < 1.0) {
        return usage("annealing needs t0 > 0 and cooling in (0, 1)");
    }
    if !(schedule.sigma_frac > 0.0) {
        return usage("proposal width must be positive");
    }
    // the engine is used only for error bookkeeping; a one-point grid suffices
    let projectors = manifolds
        .iter()
        .map(|m| Projector::new(m, &GridSpec::Uniform(1), RefineConfig::default()))
        .collect::<Result<Vec<_>>>()?;
    let cfg = CmdConfig::default();
    let mut engine = CmdEngine::new(&projectors, msets, cloud, &cfg)?;
    let order = engine.sample_order();
    let n_points = cloud.len().max(1) as f64;
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = seeded(seed);

    let mut best_sets = engine.sets().clone();
    let mut best = engine.errors();
    let mut trace = vec![engine.error()];
    let mut best_trace = trace.clone();
    let mut accepted = 0;
    let mut temp = schedule.t0;
    for _ in 0..schedule.steps {
        let (m, i) = order[rng.random_range(0..order.len())];
        let dom = engine.manifold(m).domain().clone();
        let mut param = engine.sets().sets[m].samples[i].param.clone();
        for (j, v) in param.iter_mut().enumerate() {
            *v += schedule.sigma_frac * dom.width(j) * std.sample(&mut rng);
        }
        dom.retract(&mut param);
        let c = engine.candidate(m, i, param);
        let delta = (c.errors as f64 - engine.errors() as f64) / n_points;
        let u: f64 = rng.random();
        if delta <= 0.0 || u < (-delta / temp).exp() {
            engine.commit(m, i, c);
            accepted += 1;
            if engine.errors() < best {
                best = engine.errors();
                best_sets = engine.sets().clone();
            }
        }
        trace.push(engine.error());
        best_trace.push(best as f64 / n_points);
        temp *= schedule.cooling;
    }
    Ok(MdsaOutput {
        sets: best_sets,
        trace,
        best_trace,
        accepted,
    })
}
