use super::manifold::Manifold;
use crate::error::{usage, Result};

/// Squared Euclidean distance. Every nearest-point decision in the crate goes
/// through this function so that ties are detected consistently.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldSample {
    pub param: Vec<f64>,
    pub point: Vec<f64>,
}

impl ManifoldSample {
    /// Samples `manifold` at `param` (periodic coordinates wrapped).
    pub fn new(manifold: &Manifold, param: &[f64]) -> Result<Self> {
        let param = manifold.domain().normalize(param)?;
        let point = manifold.point(&param);
        Ok(Self { param, point })
    }

    /// Sample at a parameter already known to be in the domain.
    pub(crate) fn at(manifold: &Manifold, param: Vec<f64>) -> Self {
        let point = manifold.point(&param);
        Self { param, point }
    }
}

/// Ordered samples of one manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub manifold_id: usize,
    pub samples: Vec<ManifoldSample>,
}

impl SampleSet {
    pub fn new(manifold_id: usize, samples: Vec<ManifoldSample>) -> Result<Self> {
        if samples.is_empty() {
            return usage("sample set must hold at least one sample");
        }
        Ok(Self {
            manifold_id,
            samples,
        })
    }

    pub fn from_params(manifold: &Manifold, params: &[Vec<f64>]) -> Result<Self> {
        let samples = params
            .iter()
            .map(|p| ManifoldSample::new(manifold, p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(manifold.id(), samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.samples[i].point
    }

    pub fn params(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.param.clone()).collect()
    }

    /// Largest absolute deviation between stored points and `map(param)`.
    pub fn recompute_error(&self, manifold: &Manifold) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for s in &self.samples {
            let p = manifold.map(&s.param)?;
            for (a, b) in p.iter().zip(&s.point) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }
}

/// Nearest sample (lowest index on ties) and its Euclidean distance.
pub fn distance_to_set(x: &[f64], set: &SampleSet) -> Result<(usize, f64)> {
    if set.is_empty() {
        return usage("distance to an empty sample set");
    }
    if x.len() != set.samples[0].point.len() {
        return usage("ambient dimensions differ");
    }
    let (i, d2) = nearest(x, set.samples.iter().map(|s| s.point.as_slice()));
    Ok((i, d2.sqrt()))
}

/// Index and squared distance of the nearest point; strict comparison keeps
/// the lowest index on ties. Panics on an empty iterator.
pub(crate) fn nearest<'a>(x: &[f64], points: impl Iterator<Item = &'a [f64]>) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, p) in points.enumerate() {
        let d = sq_dist(x, p);
        if d < best.1 || best.0 == usize::MAX {
            best = (i, d);
        }
    }
    assert!(best.0 != usize::MAX, "nearest() over no points");
    best
}

/// Finite set of ambient points, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
    labels: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return usage("point dimension must be positive");
        }
        if !data.len().is_multiple_of(dim) {
            return usage("point data length is not a multiple of the dimension");
        }
        Ok(Self {
            dim,
            data,
            labels: None,
        })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = points.first() else {
            return usage("cannot infer dimension of an empty point list");
        };
        let dim = first.len();
        if points.iter().any(|p| p.len() != dim) {
            return usage("points differ in dimension");
        }
        Self::new(dim, points.concat())
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.len() {
            return usage("label count differs from point count");
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Points whose indices are listed, in the given order.
    pub fn subset(&self, indices: &[usize]) -> PointCloud {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        PointCloud {
            dim: self.dim,
            data,
            labels,
        }
    }

    /// Bounding-box diagonal length.
    pub fn bbox_diagonal(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let mut lo = self.point(0).to_vec();
        let mut hi = lo.clone();
        for p in self.iter() {
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        sq_dist(&lo, &hi).sqrt()
    }
}
