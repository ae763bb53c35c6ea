//! Coarse-to-fine projection onto a manifold: nearest point of a dense
//! parameter grid, then damped Gauss-Newton descent with backtracking on
//! `||x - U(lambda)||^2`, using central finite-difference Jacobians.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::manifold::Manifold;
use super::sample::sq_dist;
use crate::error::{usage, Result};
use crate::par;

/// Per-dimension density of the coarse projection grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Uniform(usize),
    PerDim(Vec<usize>),
}

impl GridSpec {
    /// Working density used while optimizing.
    pub const WORKING: usize = 64;
    /// Density reserved for ground-truth projections.
    pub const ORACLE: usize = 256;

    pub fn working() -> Self {
        GridSpec::Uniform(Self::WORKING)
    }

    pub fn oracle() -> Self {
        GridSpec::Uniform(Self::ORACLE)
    }

    pub fn counts(&self, dims: usize) -> Result<Vec<usize>> {
        let counts = match self {
            GridSpec::Uniform(k) => vec![*k; dims],
            GridSpec::PerDim(v) => {
                if v.len() != dims {
                    return usage(format!(
                        "grid spec has {} densities for a {dims}-dimensional domain",
                        v.len()
                    ));
                }
                v.clone()
            }
        };
        if counts.contains(&0) {
            return usage("grid needs at least one point per dimension");
        }
        Ok(counts)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::working()
    }
}

/// Settings of the local descent stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub max_iters: usize,
    /// Finite-difference step as a fraction of each dimension's width.
    pub fd_step: f64,
    /// Stop once the parameter step is below this fraction of the width.
    pub step_tol: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            fd_step: 1e-4,
            step_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub param: Vec<f64>,
    pub point: Vec<f64>,
    pub distance: f64,
    /// Distance of the best coarse grid point.
    pub coarse_distance: f64,
    /// False when descent hit its iteration cap.
    pub converged: bool,
}

// Grids larger than this many stored floats are refused.
const MAX_GRID_FLOATS: usize = 1 << 26;

/// Precomputed coarse grid on one manifold, reusable across queries.
#[derive(Debug, Clone)]
pub struct Projector {
    manifold: Manifold,
    grid_params: Vec<f64>,
    grid_points: Vec<f64>,
    refine: RefineConfig,
}

/// Coordinates of the grid along one dimension: `k` evenly spaced values over
/// `[lo, hi)` for periodic dims, endpoints included otherwise.
fn axis(manifold: &Manifold, j: usize, k: usize) -> Vec<f64> {
    let b = manifold.domain().bound(j);
    let w = b.width();
    if manifold.domain().is_periodic(j) {
        (0..k).map(|i| b.lo + i as f64 * w / k as f64).collect()
    } else if k == 1 {
        vec![0.5 * (b.lo + b.hi)]
    } else {
        (0..k)
            .map(|i| b.lo + i as f64 * w / (k - 1) as f64)
            .collect()
    }
}

impl Projector {
    pub fn new(manifold: &Manifold, grid: &GridSpec, refine: RefineConfig) -> Result<Self> {
        let d = manifold.param_dim();
        let n = manifold.ambient_dim();
        let counts = grid.counts(d)?;
        let total = counts
            .iter()
            .try_fold(1usize, |acc, &k| acc.checked_mul(k))
            .filter(|t| t.checked_mul(n + d).is_some_and(|f| f <= MAX_GRID_FLOATS));
        let Some(total) = total else {
            return usage(format!(
                "projection grid {counts:?} on a {n}-dimensional manifold is too large"
            ));
        };
        let axes: Vec<Vec<f64>> = counts
            .iter()
            .enumerate()
            .map(|(j, &k)| axis(manifold, j, k))
            .collect();
        let mut grid_params = Vec::with_capacity(total * d);
        // lexicographic, first dimension slowest
        for flat in 0..total {
            let mut rem = flat;
            let mut coords = vec![0.0; d];
            for j in (0..d).rev() {
                coords[j] = axes[j][rem % counts[j]];
                rem /= counts[j];
            }
            grid_params.extend_from_slice(&coords);
        }
        let points = par::map_range(total, |g| manifold.point(&grid_params[g * d..(g + 1) * d]));
        Ok(Self {
            manifold: manifold.clone(),
            grid_params,
            grid_points: points.concat(),
            refine,
        })
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn grid_len(&self) -> usize {
        self.grid_params.len() / self.manifold.param_dim()
    }

    pub fn grid_param(&self, g: usize) -> &[f64] {
        let d = self.manifold.param_dim();
        &self.grid_params[g * d..(g + 1) * d]
    }

    pub fn grid_point(&self, g: usize) -> &[f64] {
        let n = self.manifold.ambient_dim();
        &self.grid_points[g * n..(g + 1) * n]
    }

    /// Nearest grid point and its squared distance. Distances within round-off
    /// of the minimum count as ties, which go to the lowest index.
    pub fn coarse(&self, x: &[f64]) -> (usize, f64) {
        let n = self.manifold.ambient_dim();
        let (_, min) = super::sample::nearest(x, self.grid_points.chunks_exact(n));
        let cut = min * (1.0 + 1e-12);
        self.grid_points
            .chunks_exact(n)
            .map(|p| sq_dist(x, p))
            .enumerate()
            .find(|&(_, d)| d <= cut)
            .expect("grid is not empty")
    }

    pub fn project(&self, x: &[f64]) -> Result<Projection> {
        if x.len() != self.manifold.ambient_dim() {
            return usage(format!(
                "point has dimension {}, manifold ambient dimension is {}",
                x.len(),
                self.manifold.ambient_dim()
            ));
        }
        let (g, d2) = self.coarse(x);
        let start = self.grid_param(g).to_vec();
        let y = self.grid_point(g).to_vec();
        Ok(refine(&self.manifold, x, start, y, d2, &self.refine))
    }

    pub fn project_many(&self, points: &[&[f64]]) -> Result<Vec<Projection>> {
        par::map_range(points.len(), |i| self.project(points[i]))
            .into_iter()
            .collect()
    }
}

/// One-shot projection; builds the grid on every call.
pub fn project(
    manifold: &Manifold,
    x: &[f64],
    grid: &GridSpec,
    refine: RefineConfig,
) -> Result<Projection> {
    Projector::new(manifold, grid, refine)?.project(x)
}

fn refine(
    manifold: &Manifold,
    x: &[f64],
    mut param: Vec<f64>,
    mut y: Vec<f64>,
    mut f: f64,
    cfg: &RefineConfig,
) -> Projection {
    let dom = manifold.domain();
    let d = manifold.param_dim();
    let n = manifold.ambient_dim();
    let coarse_distance = f.sqrt();
    let mut converged = false;
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];

    for _ in 0..cfg.max_iters {
        if f == 0.0 {
            converged = true;
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(n, d);
        for j in 0..d {
            let h = cfg.fd_step * dom.width(j);
            let mut lp = param.clone();
            let mut lm = param.clone();
            lp[j] += h;
            lm[j] -= h;
            dom.retract(&mut lp);
            dom.retract(&mut lm);
            let span = dom.displacement(&lm, &lp)[j];
            if span == 0.0 {
                continue;
            }
            manifold.point_into(&lp, &mut plus);
            manifold.point_into(&lm, &mut minus);
            for k in 0..n {
                jac[(k, j)] = (plus[k] - minus[k]) / span;
            }
        }
        let resid = DVector::from_iterator(n, x.iter().zip(&y).map(|(a, b)| a - b));
        let grad = jac.transpose() * &resid;

        // Coordinates pinned at a bound with the descent direction pointing out.
        let free: Vec<usize> = (0..d)
            .filter(|&j| {
                if dom.is_periodic(j) {
                    return true;
                }
                let b = dom.bound(j);
                !((param[j] <= b.lo && grad[j] < 0.0) || (param[j] >= b.hi && grad[j] > 0.0))
            })
            .collect();
        if free.is_empty() {
            converged = true;
            break;
        }
        let jf = DMatrix::from_fn(n, free.len(), |r, c| jac[(r, free[c])]);
        let gf = DVector::from_iterator(free.len(), free.iter().map(|&j| grad[j]));
        let mut h = jf.transpose() * &jf;
        let scale = (0..free.len()).map(|i| h[(i, i)]).fold(0.0, f64::max);
        if scale == 0.0 {
            converged = true;
            break;
        }
        for i in 0..free.len() {
            h[(i, i)] += 1e-10 * scale;
        }
        let step = match h.cholesky() {
            Some(ch) => ch.solve(&gf),
            None => gf.clone() / scale,
        };
        let mut direction = vec![0.0; d];
        for (c, &j) in free.iter().enumerate() {
            direction[j] = step[c];
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = dom.step(&param, &direction, t);
            let yc = manifold.point(&cand);
            let fc = sq_dist(x, &yc);
            // relative margin so round-off alone never counts as progress
            if fc < f * (1.0 - 1e-12) {
                accepted = Some((cand, yc, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((mut cand, mut yc, mut fc)) = accepted else {
            converged = true;
            break;
        };
        // keep halving while it helps; full Gauss-Newton steps overshoot on
        // strongly curved manifolds
        for _ in 0..40 {
            t *= 0.5;
            let c2 = dom.step(&param, &direction, t);
            let y2 = manifold.point(&c2);
            let f2 = sq_dist(x, &y2);
            if f2 >= fc {
                break;
            }
            (cand, yc, fc) = (c2, y2, f2);
        }
        let moved = dom
            .displacement(&param, &cand)
            .iter()
            .enumerate()
            .map(|(j, v)| v.abs() / dom.width(j))
            .fold(0.0, f64::max);
        param = cand;
        y = yc;
        f = fc;
        if moved < cfg.step_tol {
            converged = true;
            break;
        }
    }

    Projection {
        param,
        point: y,
        distance: f.sqrt(),
        coarse_distance,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pattern::Canvas;
    use crate::geometry::{Interval, Manifold, Shape};

    fn circle() -> Manifold {
        Manifold::circle(0, [0.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn projects_onto_unit_circle() {
        let p = project(
            &circle(),
            &[2.0, 0.0],
            &GridSpec::working(),
            RefineConfig::default(),
        )
        .unwrap();
        assert!(p.param[0].abs() < 1e-6);
        assert!((p.distance - 1.0).abs() < 1e-6);
        let p = project(
            &circle(),
            &[3.0, 4.0],
            &GridSpec::working(),
            RefineConfig::default(),
        )
        .unwrap();
        assert!((p.point[0] - 0.6).abs() < 1e-6 && (p.point[1] - 0.8).abs() < 1e-6);
        assert!((p.distance - 4.0).abs() < 1e-6);
    }

    #[test]
    fn equidistant_point_keeps_first_grid_point() {
        let p = project(
            &circle(),
            &[0.0, 0.0],
            &GridSpec::working(),
            RefineConfig::default(),
        )
        .unwrap();
        assert_eq!(p.param, vec![-std::f64::consts::PI]);
        assert!((p.distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clamps_at_segment_end() {
        let m = Manifold::segment(0, vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        let p = project(
            &m,
            &[1.7, 0.3],
            &GridSpec::Uniform(5),
            RefineConfig::default(),
        )
        .unwrap();
        assert_eq!(p.param, vec![1.0]);
        let p = project(
            &m,
            &[0.37, 0.3],
            &GridSpec::Uniform(5),
            RefineConfig::default(),
        )
        .unwrap();
        assert!((p.param[0] - 0.37).abs() < 1e-7);
    }

    #[test]
    fn refinement_never_worse_than_coarse() {
        let raster = Shape::Ell.render(12, 3.2).unwrap();
        let m = Manifold::pattern(
            0,
            raster,
            Canvas {
                width: 12,
                height: 12,
            },
            Some((Interval::new(-1.0, 1.0), Interval::new(-1.0, 1.0))),
        )
        .unwrap();
        let proj = Projector::new(
            &m,
            &GridSpec::PerDim(vec![16, 3, 3]),
            RefineConfig::default(),
        )
        .unwrap();
        let x = m.map(&[0.77, 0.31, -0.42]).unwrap();
        let p = proj.project(&x).unwrap();
        assert!(p.distance <= p.coarse_distance);
        assert!(p.distance < 1e-4, "distance {}", p.distance);
    }

    #[test]
    fn oversized_grid_rejected() {
        let raster = Shape::Ell.render(16, 4.0).unwrap();
        let m = Manifold::pattern(
            0,
            raster,
            Canvas {
                width: 16,
                height: 16,
            },
            Some((Interval::new(-1.0, 1.0), Interval::new(-1.0, 1.0))),
        )
        .unwrap();
        assert!(Projector::new(&m, &GridSpec::oracle(), RefineConfig::default()).is_err());
    }
}
