use crate::error::{usage, Result};
use crate::geometry::{distance_to_set, sq_dist, PointCloud, Projector, SampleSet};
use crate::par;

/// Oracle projections of every point of `cloud`.
pub fn oracle_points(oracle: &Projector, cloud: &PointCloud) -> Result<Vec<Vec<f64>>> {
    let pts: Vec<&[f64]> = cloud.iter().collect();
    Ok(oracle
        .project_many(&pts)?
        .into_iter()
        .map(|p| p.point)
        .collect())
}

/// Distance between each test point's oracle projection and its nearest
/// sample; returns the mean and the per-point values.
pub fn registration_metrics(
    oracle: &Projector,
    set: &SampleSet,
    test: &PointCloud,
) -> Result<(f64, Vec<f64>)> {
    let proj = oracle_points(oracle, test)?;
    registration_from(&proj, set, test)
}

/// [`registration_metrics`] with precomputed oracle projections.
pub fn registration_from(
    projections: &[Vec<f64>],
    set: &SampleSet,
    test: &PointCloud,
) -> Result<(f64, Vec<f64>)> {
    if test.is_empty() {
        return usage("no test points");
    }
    if projections.len() != test.len() {
        return usage("one projection per test point expected");
    }
    let errs = par::map_range(test.len(), |p| -> Result<f64> {
        let (i, _) = distance_to_set(test.point(p), set)?;
        Ok(sq_dist(&projections[p], set.point(i)).sqrt())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok((par::ordered_sum(&errs) / errs.len() as f64, errs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shares {
    /// Test points won by each method.
    pub counts: Vec<usize>,
    pub percent: Vec<f64>,
}

/// For every test point, the method owning the globally nearest sample wins;
/// ties go to the method listed first.
pub fn closest_sample_share(sets: &[&SampleSet], test: &PointCloud) -> Result<Shares> {
    if sets.len() < 2 {
        return usage("closest-sample share needs at least two methods");
    }
    if test.is_empty() {
        return usage("no test points");
    }
    let winners = par::map_range(test.len(), |p| -> Result<usize> {
        let mut best = (f64::INFINITY, usize::MAX);
        for (k, s) in sets.iter().enumerate() {
            let (_, d) = distance_to_set(test.point(p), s)?;
            if d < best.0 || best.1 == usize::MAX {
                best = (d, k);
            }
        }
        Ok(best.1)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0; sets.len()];
    for w in winners {
        counts[w] += 1;
    }
    let percent = counts
        .iter()
        .map(|&c| 100.0 * c as f64 / test.len() as f64)
        .collect();
    Ok(Shares { counts, percent })
}
