//! Single-manifold discretization that minimizes the error of estimating
//! manifold distances by distances to the nearest sample.
//!
//! Each iteration partitions the training cloud by nearest sample, takes the
//! centroid of every cell and moves the cell's sample to the projection of
//! that centroid onto the manifold. Within a fixed cell the squared-distance
//! cost of a sample differs from `||S - G||^2` only by a positive factor and a
//! constant, so the projected centroid is the best on-manifold replacement.
//! A replacement is kept only if it lowers the cell cost on the cloud, which
//! makes the error trace non-increasing even with approximate projections.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::baselines::random_sampling;
use crate::error::{usage, Result};
use crate::geometry::{
    nearest, sq_dist, GridSpec, Manifold, ManifoldSample, PointCloud, Projector, RefineConfig,
    SampleSet,
};
use crate::par;
use crate::rng::seeded;

/// Nearest-sample assignment of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub assignment: Vec<usize>,
    pub counts: Vec<usize>,
    /// Squared distance of each point to its assigned sample.
    pub sq_dists: Vec<f64>,
}

impl Partition {
    /// Point indices of every cell, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.counts.len()];
        for (p, &i) in self.assignment.iter().enumerate() {
            cells[i].push(p);
        }
        cells
    }

    /// Mean squared distance to the sample set.
    pub fn distortion(&self) -> f64 {
        par::ordered_sum(&self.sq_dists) / self.sq_dists.len() as f64
    }
}

pub fn partition(cloud: &PointCloud, set: &SampleSet) -> Result<Partition> {
    if set.is_empty() {
        return usage("partition against an empty sample set");
    }
    if cloud.dim() != set.samples[0].point.len() {
        return usage("cloud and sample set differ in ambient dimension");
    }
    let found = par::map_range(cloud.len(), |p| {
        nearest(
            cloud.point(p),
            set.samples.iter().map(|s| s.point.as_slice()),
        )
    });
    let mut counts = vec![0; set.len()];
    let mut assignment = Vec::with_capacity(found.len());
    let mut sq_dists = Vec::with_capacity(found.len());
    for (i, d2) in found {
        counts[i] += 1;
        assignment.push(i);
        sq_dists.push(d2);
    }
    Ok(Partition {
        assignment,
        counts,
        sq_dists,
    })
}

/// Coordinate-wise arithmetic mean; `None` for an empty list.
pub fn centroid<'a>(points: impl IntoIterator<Item = &'a [f64]>) -> Option<Vec<f64>> {
    let mut it = points.into_iter();
    let first = it.next()?;
    let mut acc = first.to_vec();
    let mut n = 1usize;
    for p in it {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
        n += 1;
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    Some(acc)
}

/// Monte Carlo distance-estimation error: mean over the cloud of
/// `D(x,S)^2 - D(x,M)^2`, given precomputed manifold distances `D(x,M)`.
pub fn distance_error(cloud: &PointCloud, set: &SampleSet, manifold_dists: &[f64]) -> Result<f64> {
    if manifold_dists.len() != cloud.len() {
        return usage(format!(
            "{} manifold distances for {} points",
            manifold_dists.len(),
            cloud.len()
        ));
    }
    if cloud.is_empty() {
        return usage("distance error over an empty cloud");
    }
    let part = partition(cloud, set)?;
    let excess: Vec<f64> = part
        .sq_dists
        .iter()
        .zip(manifold_dists)
        .map(|(s, m)| s - m * m)
        .collect();
    Ok(par::ordered_sum(&excess) / cloud.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmptyCellPolicy {
    /// Move the sample to the projection of the cloud point farthest from the set.
    #[default]
    ReseedToFarthestPoint,
    Keep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemdConfig {
    pub n_samples: usize,
    pub max_iters: usize,
    /// Stop when the relative error decrease of an iteration falls below this.
    pub tol: f64,
    pub seed: u64,
    /// Minimum pairwise ambient distance at initialization; `None` means 5% of
    /// the cloud's bounding-box diagonal.
    pub min_init_spacing: Option<f64>,
    pub empty_cell_policy: EmptyCellPolicy,
    pub grid: GridSpec,
    pub refine: RefineConfig,
}

impl Default for RemdConfig {
    fn default() -> Self {
        Self {
            n_samples: 8,
            max_iters: 100,
            tol: 1e-5,
            seed: 0,
            min_init_spacing: None,
            empty_cell_policy: EmptyCellPolicy::default(),
            grid: GridSpec::working(),
            refine: RefineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemdOutput {
    pub samples: SampleSet,
    /// Mean squared distance of the cloud to the sample set, before the first
    /// iteration and after each one. Differs from the distance-estimation
    /// error only by the constant mean of `D(x,M)^2`.
    pub trace: Vec<f64>,
    /// Set when the spacing constraint could not be met and the initial set
    /// was drawn unconstrained.
    pub init_fallback: bool,
    pub converged: bool,
}

const INIT_ATTEMPTS: usize = 1000;

/// Random initial samples with a minimum pairwise ambient spacing. Returns
/// the set and whether it fell back to unconstrained sampling.
pub fn initial_samples(
    manifold: &Manifold,
    cloud: &PointCloud,
    cfg: &RemdConfig,
) -> Result<(SampleSet, bool)> {
    if cfg.n_samples == 0 {
        return usage("n_samples must be at least 1");
    }
    let spacing = cfg
        .min_init_spacing
        .unwrap_or_else(|| 0.05 * cloud.bbox_diagonal());
    let spacing2 = spacing * spacing;
    let dom = manifold.domain();
    let mut rng = seeded(cfg.seed);
    let mut samples: Vec<ManifoldSample> = Vec::with_capacity(cfg.n_samples);
    'outer: for _ in 0..cfg.n_samples {
        for _ in 0..INIT_ATTEMPTS {
            let u: Vec<f64> = (0..dom.dims()).map(|_| rng.random::<f64>()).collect();
            let s = ManifoldSample::at(manifold, dom.from_unit(&u));
            if samples
                .iter()
                .all(|o| sq_dist(&o.point, &s.point) >= spacing2)
            {
                samples.push(s);
                continue 'outer;
            }
        }
        return Ok((random_sampling(manifold, cfg.n_samples, cfg.seed)?, true));
    }
    Ok((SampleSet::new(manifold.id(), samples)?, false))
}

pub fn remd(manifold: &Manifold, cloud: &PointCloud, cfg: &RemdConfig) -> Result<RemdOutput> {
    let projector = Projector::new(manifold, &cfg.grid, cfg.refine)?;
    remd_with(&projector, cloud, cfg)
}

/// Like [`remd`] but reuses a prebuilt projection grid.
pub fn remd_with(
    projector: &Projector,
    cloud: &PointCloud,
    cfg: &RemdConfig,
) -> Result<RemdOutput> {
    check_cloud(projector.manifold(), cloud, cfg.n_samples)?;
    let (init, fallback) = initial_samples(projector.manifold(), cloud, cfg)?;
    let mut out = remd_from(projector, cloud, init, cfg)?;
    out.init_fallback = fallback;
    Ok(out)
}

fn check_cloud(manifold: &Manifold, cloud: &PointCloud, n: usize) -> Result<()> {
    if cloud.is_empty() {
        return usage("training cloud is empty");
    }
    if cloud.dim() != manifold.ambient_dim() {
        return usage("cloud dimension differs from the manifold's ambient dimension");
    }
    if n == 0 || n > cloud.len() {
        return usage(format!(
            "need 1 <= n_samples <= cloud size ({}), got {n}",
            cloud.len()
        ));
    }
    Ok(())
}

/// Runs the iterations from a given initial sample set.
pub fn remd_from(
    projector: &Projector,
    cloud: &PointCloud,
    init: SampleSet,
    cfg: &RemdConfig,
) -> Result<RemdOutput> {
    let manifold = projector.manifold();
    check_cloud(manifold, cloud, init.len())?;
    let mut set = init;
    let mut part = partition(cloud, &set)?;
    let mut trace = vec![part.distortion()];
    let mut converged = false;

    for _ in 0..cfg.max_iters {
        let members = part.members();
        let updates = par::map_range(set.len(), |i| -> Result<Option<ManifoldSample>> {
            let cell = &members[i];
            let Some(g) = centroid(cell.iter().map(|&p| cloud.point(p))) else {
                return Ok(None);
            };
            let proj = projector.project(&g)?;
            let old: f64 = cell.iter().map(|&p| part.sq_dists[p]).sum();
            let new: f64 = cell
                .iter()
                .map(|&p| sq_dist(cloud.point(p), &proj.point))
                .sum();
            Ok((new < old).then_some(ManifoldSample {
                param: proj.param,
                point: proj.point,
            }))
        });
        for (i, u) in updates.into_iter().enumerate() {
            if let Some(s) = u? {
                set.samples[i] = s;
            }
        }

        if cfg.empty_cell_policy == EmptyCellPolicy::ReseedToFarthestPoint
            && part.counts.contains(&0)
        {
            reseed_empty(projector, cloud, &mut set, &part.counts)?;
        }

        let prev = *trace.last().unwrap();
        part = partition(cloud, &set)?;
        let e = part.distortion();
        trace.push(e);
        if prev <= 0.0 || prev - e <= cfg.tol * prev {
            converged = true;
            break;
        }
    }

    Ok(RemdOutput {
        samples: set,
        trace,
        init_fallback: false,
        converged,
    })
}

/// Samples whose cell was empty move to the projection of the currently
/// farthest cloud point. Their cells held no points, so the move cannot raise
/// the error bound of the iteration.
fn reseed_empty(
    projector: &Projector,
    cloud: &PointCloud,
    set: &mut SampleSet,
    counts: &[usize],
) -> Result<()> {
    let mut d2 = partition(cloud, set)?.sq_dists;
    for (i, _) in counts.iter().enumerate().filter(|(_, &c)| c == 0) {
        let far = d2
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |best, (p, &v)| {
                if v > best.1 {
                    (p, v)
                } else {
                    best
                }
            })
            .0;
        let x = cloud.point(far);
        let proj = projector.project(x)?;
        if sq_dist(x, &proj.point) < d2[far] {
            for (p, v) in d2.iter_mut().enumerate() {
                *v = v.min(sq_dist(cloud.point(p), &proj.point));
            }
            set.samples[i] = ManifoldSample {
                param: proj.param,
                point: proj.point,
            };
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn line_set(xs: &[f64]) -> SampleSet {
        let m = Manifold::segment(0, vec![-10.0], vec![10.0]).unwrap();
        SampleSet::from_params(
            &m,
            &xs.iter()
                .map(|x| vec![(x + 10.0) / 20.0])
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    fn cloud_1d(xs: &[f64]) -> PointCloud {
        PointCloud::new(1, xs.to_vec()).unwrap()
    }

    #[test]
    fn partition_examples() {
        let p = partition(&cloud_1d(&[-1.0, 0.4, 2.0]), &line_set(&[0.0, 1.0])).unwrap();
        assert_eq!(p.assignment, vec![0, 0, 1]);
        assert_eq!(p.counts, vec![2, 1]);
        let p = partition(&cloud_1d(&[0.5]), &line_set(&[0.0, 1.0])).unwrap();
        assert_eq!(p.assignment, vec![0]);
        let p = partition(&cloud_1d(&[-3.0, 4.0, 9.0]), &line_set(&[2.0])).unwrap();
        assert_eq!(p.assignment, vec![0, 0, 0]);
    }

    #[test]
    fn centroid_examples() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]];
        assert_eq!(
            centroid(pts.iter().map(|p| p.as_slice())),
            Some(vec![1.0, 1.0])
        );
        assert_eq!(centroid([[4.0, -2.0].as_slice()]), Some(vec![4.0, -2.0]));
        assert_eq!(
            centroid([[1.5, -2.0].as_slice(), [-1.5, 2.0].as_slice()]),
            Some(vec![0.0, 0.0])
        );
        assert_eq!(centroid(std::iter::empty::<&[f64]>()), None);
    }

    #[test]
    fn distance_error_zero_when_samples_are_projections() {
        let m = Manifold::circle(0, [0.0, 0.0], 1.0).unwrap();
        let angles = [0.3, 1.7, -2.2];
        let set = SampleSet::from_params(&m, &angles.map(|a| vec![a])).unwrap();
        let pts: Vec<Vec<f64>> = angles
            .iter()
            .map(|a| vec![1.8 * a.cos(), 1.8 * a.sin()])
            .collect();
        let cloud = PointCloud::from_points(&pts).unwrap();
        let e = distance_error(&cloud, &set, &[0.8, 0.8, 0.8]).unwrap();
        assert!(e.abs() < 1e-9);
        assert!(distance_error(&cloud, &set, &[0.8]).is_err());
    }

    #[test]
    fn distance_error_on_manifold_is_mean_sq_distance() {
        let m = Manifold::circle(0, [0.0, 0.0], 1.0).unwrap();
        let set = SampleSet::from_params(&m, &[vec![0.0], vec![PI / 2.0]]).unwrap();
        let pts: Vec<Vec<f64>> = [0.4, 2.5, -1.0]
            .iter()
            .map(|a: &f64| vec![a.cos(), a.sin()])
            .collect();
        let cloud = PointCloud::from_points(&pts).unwrap();
        let e = distance_error(&cloud, &set, &[0.0; 3]).unwrap();
        let direct = partition(&cloud, &set).unwrap().distortion();
        assert_eq!(e, direct);
    }

    #[test]
    fn single_sample_converges_to_projected_midpoint() {
        let m = Manifold::segment(0, vec![0.0, 0.0], vec![4.0, 0.0]).unwrap();
        let cloud = PointCloud::from_points(&[vec![1.0, 1.0], vec![3.0, -1.0]]).unwrap();
        let cfg = RemdConfig {
            n_samples: 1,
            ..Default::default()
        };
        let out = remd(&m, &cloud, &cfg).unwrap();
        assert!((out.samples.samples[0].param[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn empty_cells_are_reseeded() {
        let m = Manifold::segment(0, vec![0.0], vec![10.0]).unwrap();
        let cloud = cloud_1d(&[0.5, 1.0, 1.5, 8.5, 9.0, 9.5]);
        // duplicate samples: the second never owns a point
        let init = SampleSet::from_params(&m, &[vec![0.1], vec![0.1]]).unwrap();
        let projector = Projector::new(&m, &GridSpec::working(), RefineConfig::default()).unwrap();
        let out = remd_from(&projector, &cloud, init.clone(), &RemdConfig::default()).unwrap();
        let mut xs: Vec<f64> = out.samples.samples.iter().map(|s| s.point[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!(
            (xs[0] - 1.0).abs() < 1e-6 && (xs[1] - 9.0).abs() < 1e-6,
            "{xs:?}"
        );

        let keep = RemdConfig {
            empty_cell_policy: EmptyCellPolicy::Keep,
            ..Default::default()
        };
        let out = remd_from(&projector, &cloud, init, &keep).unwrap();
        assert_eq!(out.samples.samples[1].param, vec![0.1]);
    }

    #[test]
    fn rejects_bad_sizes() {
        let m = Manifold::segment(0, vec![0.0], vec![1.0]).unwrap();
        let cloud = cloud_1d(&[0.1, 0.2]);
        let cfg = RemdConfig {
            n_samples: 3,
            ..Default::default()
        };
        assert!(remd(&m, &cloud, &cfg).is_err());
    }

    #[test]
    fn infeasible_spacing_falls_back() {
        let m = Manifold::segment(0, vec![0.0], vec![1.0]).unwrap();
        let cloud = cloud_1d(&[0.1, 0.2, 0.3, 0.9]);
        let cfg = RemdConfig {
            n_samples: 4,
            min_init_spacing: Some(0.5),
            ..Default::default()
        };
        let out = remd(&m, &cloud, &cfg).unwrap();
        assert!(out.init_fallback);
        assert_eq!(out.samples.len(), 4);
    }
}
