//! Joint discretization of several class manifolds for nearest-sample
//! classification.
//!
//! A point is classified by its nearest sample over all manifolds. Ties are
//! resolved by the key `(squared distance, global sample index)`, where the
//! global index orders samples lexicographically by `(manifold, sample)`.
//! The misclassification predicates below compare such keys, so they agree
//! exactly with [`classify`] even on exact distance ties.

mod optimize;
mod table;

pub use optimize::{
    cmd, cmd_with, perturb_sample, CmdConfig, CmdEngine, CmdOutput, Direction, SweepOrder,
};
pub(crate) use table::DistanceTable;

use crate::error::{usage, Result};
use crate::geometry::{sq_dist, Manifold, PointCloud, Projector, SampleSet};
use crate::par;
use crate::remd::centroid;

/// One sample set per class manifold, in class order.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSampleSet {
    pub sets: Vec<SampleSet>,
}

impl MultiSampleSet {
    pub fn new(sets: Vec<SampleSet>) -> Result<Self> {
        if sets.len() < 2 {
            return usage("joint discretization needs at least two manifolds");
        }
        if sets.iter().any(|s| s.is_empty()) {
            return usage("every manifold needs at least one sample");
        }
        let n = sets[0].samples[0].point.len();
        if sets
            .iter()
            .flat_map(|s| &s.samples)
            .any(|s| s.point.len() != n)
        {
            return usage("sample sets differ in ambient dimension");
        }
        Ok(Self { sets })
    }

    pub fn classes(&self) -> usize {
        self.sets.len()
    }

    pub fn total(&self) -> usize {
        self.sets.iter().map(|s| s.len()).sum()
    }

    pub fn allocation(&self) -> Vec<usize> {
        self.sets.iter().map(|s| s.len()).collect()
    }

    pub fn ambient_dim(&self) -> usize {
        self.sets[0].samples[0].point.len()
    }

    /// Samples in global order with their `(class, index)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &[f64])> {
        self.sets.iter().enumerate().flat_map(|(m, s)| {
            s.samples
                .iter()
                .enumerate()
                .map(move |(i, smp)| (m, i, smp.point.as_slice()))
        })
    }

    pub fn check_manifolds(&self, manifolds: &[Manifold]) -> Result<()> {
        if manifolds.len() != self.sets.len() {
            return usage("one manifold per sample set required");
        }
        for (m, s) in manifolds.iter().zip(&self.sets) {
            if m.ambient_dim() != s.samples[0].point.len() {
                return usage("sample points differ from manifold ambient dimension");
            }
            if s.samples.iter().any(|smp| smp.param.len() != m.param_dim()) {
                return usage("sample parameters differ from manifold parameter dimension");
            }
        }
        Ok(())
    }
}

/// Point cloud with a true class (manifold position) per point.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud {
    points: PointCloud,
    labels: Vec<usize>,
}

impl LabeledCloud {
    pub fn new(points: PointCloud, labels: Vec<usize>) -> Result<Self> {
        let points = points.with_labels(labels.clone())?;
        Ok(Self { points, labels })
    }

    /// Uses the labels already attached to the cloud.
    pub fn from_cloud(points: PointCloud) -> Result<Self> {
        let Some(labels) = points.labels().map(|l| l.to_vec()) else {
            return usage("cloud carries no labels");
        };
        Ok(Self { points, labels })
    }

    pub fn points(&self) -> &PointCloud {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.point(i)
    }

    /// Indices of the points of one class, ascending.
    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.labels[i] == class)
            .collect()
    }

    pub(crate) fn check(&self, msets: &MultiSampleSet) -> Result<()> {
        if self.points.dim() != msets.ambient_dim() {
            return usage("cloud and samples differ in ambient dimension");
        }
        if let Some(l) = self.labels.iter().find(|&&l| l >= msets.classes()) {
            return usage(format!("label {l} has no manifold"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub label: usize,
    pub index: usize,
    pub distance: f64,
}

#[inline]
pub(crate) fn key_less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Nearest sample over all manifolds; ties go to the lowest `(class, index)`.
pub fn classify(x: &[f64], msets: &MultiSampleSet) -> Classification {
    let mut best = (f64::INFINITY, usize::MAX);
    let mut at = (0, 0);
    for (g, (m, i, p)) in msets.iter().enumerate() {
        let k = (sq_dist(x, p), g);
        if key_less(k, best) {
            best = k;
            at = (m, i);
        }
    }
    Classification {
        label: at.0,
        index: at.1,
        distance: best.0.sqrt(),
    }
}

/// Per-class nearest keys `(d^2, global index)` and in-class sample index.
fn class_keys(x: &[f64], msets: &MultiSampleSet) -> Vec<((f64, usize), usize)> {
    let mut g = 0;
    msets
        .sets
        .iter()
        .map(|s| {
            let mut best = ((f64::INFINITY, usize::MAX), 0);
            for (i, smp) in s.samples.iter().enumerate() {
                let k = (sq_dist(x, &smp.point), g + i);
                if key_less(k, best.0) {
                    best = (k, i);
                }
            }
            g += s.len();
            best
        })
        .collect()
}

fn foreign_best(keys: &[((f64, usize), usize)], m: usize) -> (f64, usize) {
    keys.iter()
        .enumerate()
        .filter(|(r, _)| *r != m)
        .map(|(_, k)| k.0)
        .fold((f64::INFINITY, usize::MAX), |a, k| {
            if key_less(k, a) {
                k
            } else {
                a
            }
        })
}

/// Misclassification counted three ways on the same cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErrorCounts {
    /// Points of class `m` lost by their own cell to a foreign sample, summed over cells.
    pub e_form: usize,
    /// Foreign-class points captured by a cell of `m`, summed over cells.
    pub f_form: usize,
    /// Points whose nearest-sample label differs from the true label.
    pub misclassified: usize,
    pub total: usize,
}

/// Direct evaluation of all three counts.
pub fn error_counts(msets: &MultiSampleSet, cloud: &LabeledCloud) -> Result<ErrorCounts> {
    cloud.check(msets)?;
    let per_point = par::map_range(cloud.len(), |p| {
        let x = cloud.point(p);
        let l = cloud.labels[p];
        let keys = class_keys(x, msets);
        let e = key_less(foreign_best(&keys, l), keys[l].0);
        let f = (0..keys.len())
            .filter(|&m| m != l && key_less(keys[m].0, foreign_best(&keys, m)))
            .count();
        let wrong = classify(x, msets).label != l;
        (e as usize, f, wrong as usize)
    });
    let (e_form, f_form, misclassified) = per_point
        .iter()
        .fold((0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    Ok(ErrorCounts {
        e_form,
        f_form,
        misclassified,
        total: cloud.len(),
    })
}

/// Fraction of misclassified points. Panics if the two cell-wise forms of the
/// count disagree with each other or with direct classification.
pub fn classification_error(msets: &MultiSampleSet, cloud: &LabeledCloud) -> Result<f64> {
    let c = error_counts(msets, cloud)?;
    assert_eq!(c.e_form, c.f_form, "E-form and F-form counts differ");
    assert_eq!(
        c.e_form, c.misclassified,
        "cell-wise count differs from classification"
    );
    if c.total == 0 {
        return Ok(0.0);
    }
    Ok(c.misclassified as f64 / c.total as f64)
}

/// Misclassified parts of one sample's cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MisclassRegions {
    /// Points of this class in the cell that a foreign sample beats.
    pub theta_points: Vec<usize>,
    /// Foreign-class points in the cell that this sample wins.
    pub phi_points: Vec<usize>,
    pub theta_centroid: Option<Vec<f64>>,
    pub phi_centroid: Option<Vec<f64>>,
}

impl MisclassRegions {
    pub(crate) fn from_indices(cloud: &LabeledCloud, theta: Vec<usize>, phi: Vec<usize>) -> Self {
        let theta_centroid = centroid(theta.iter().map(|&p| cloud.point(p)));
        let phi_centroid = centroid(phi.iter().map(|&p| cloud.point(p)));
        Self {
            theta_points: theta,
            phi_points: phi,
            theta_centroid,
            phi_centroid,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.theta_points.is_empty() && self.phi_points.is_empty()
    }
}

/// Direct evaluation of the misclassified regions of sample `i` of class `m`.
pub fn misclassified_regions(
    m: usize,
    i: usize,
    msets: &MultiSampleSet,
    cloud: &LabeledCloud,
) -> Result<MisclassRegions> {
    cloud.check(msets)?;
    if m >= msets.classes() || i >= msets.sets[m].len() {
        return usage(format!("no sample ({m}, {i})"));
    }
    let mut theta = Vec::new();
    let mut phi = Vec::new();
    for p in 0..cloud.len() {
        let keys = class_keys(cloud.point(p), msets);
        if keys[m].1 != i {
            continue;
        }
        let foreign = foreign_best(&keys, m);
        if cloud.labels[p] == m {
            if key_less(foreign, keys[m].0) {
                theta.push(p);
            }
        } else if key_less(keys[m].0, foreign) {
            phi.push(p);
        }
    }
    Ok(MisclassRegions::from_indices(cloud, theta, phi))
}

/// Labels every point by its nearest manifold. Labels already attached to the
/// cloud (from data generation) take precedence. `oracles` must hold one
/// projector per manifold.
pub fn true_labels(cloud: &PointCloud, oracles: &[Projector]) -> Result<LabeledCloud> {
    if let Some(l) = cloud.labels() {
        if let Some(bad) = l.iter().find(|&&v| v >= oracles.len()) {
            return usage(format!("label {bad} has no manifold"));
        }
        return LabeledCloud::from_cloud(cloud.clone());
    }
    if oracles.is_empty() {
        return usage("no manifolds to label against");
    }
    let labels = par::map_range(cloud.len(), |p| -> Result<usize> {
        let mut best = (f64::INFINITY, 0);
        for (m, proj) in oracles.iter().enumerate() {
            let d = proj.project(cloud.point(p))?.distance;
            if d < best.0 {
                best = (d, m);
            }
        }
        Ok(best.1)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    LabeledCloud::new(cloud.clone(), labels)
}
