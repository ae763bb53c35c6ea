use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::config::DatasetConfig;
use crate::cmd::LabeledCloud;
use crate::error::{usage, Result};
use crate::geometry::{Manifold, PointCloud};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: LabeledCloud,
    pub test: LabeledCloud,
    /// Generating parameters, aligned with the points.
    pub train_params: Vec<Vec<f64>>,
    pub test_params: Vec<Vec<f64>>,
}

const TRAIN: u64 = 0;
const TEST: u64 = 1;

/// Class-major draws: uniform parameters per class, mapped, plus isotropic
/// Gaussian noise. Pattern images are renormalized to unit norm afterwards.
/// Labels are manifold positions.
pub fn generate_dataset(manifolds: &[Manifold], cfg: &DatasetConfig, seed: u64) -> Result<Dataset> {
    let Some(first) = manifolds.first() else {
        return usage("no manifolds to draw from");
    };
    let dim = first.ambient_dim();
    if manifolds.iter().any(|m| m.ambient_dim() != dim) {
        return usage("manifolds differ in ambient dimension");
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return usage("noise must be finite and nonnegative");
    }
    let (train, train_params) = draw(manifolds, cfg.train_per_class, cfg.noise, seed, TRAIN)?;
    let (test, test_params) = draw(manifolds, cfg.test_per_class, cfg.noise, seed, TEST)?;
    Ok(Dataset {
        train,
        test,
        train_params,
        test_params,
    })
}

fn draw(
    manifolds: &[Manifold],
    per_class: usize,
    noise: f64,
    seed: u64,
    split: u64,
) -> Result<(LabeledCloud, Vec<Vec<f64>>)> {
    let dim = manifolds[0].ambient_dim();
    let mut data = Vec::with_capacity(per_class * manifolds.len() * dim);
    let mut labels = Vec::new();
    let mut params = Vec::new();
    for (m, man) in manifolds.iter().enumerate() {
        let dom = man.domain();
        let mut rng = seeded(derive_seed(seed, &[split, m as u64]));
        for _ in 0..per_class {
            let u: Vec<f64> = (0..dom.dims()).map(|_| rng.random::<f64>()).collect();
            let lambda = dom.from_unit(&u);
            let mut x = man.map(&lambda)?;
            if noise > 0.0 {
                for v in &mut x {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v += noise * z;
                }
            }
            if man.is_pattern() {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    x.iter_mut().for_each(|v| *v /= norm);
                }
            }
            data.extend(x);
            labels.push(m);
            params.push(lambda);
        }
    }
    let cloud = LabeledCloud::new(PointCloud::new(dim, data)?, labels)?;
    Ok((cloud, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project, GridSpec, RefineConfig};

    fn cfg(noise: f64) -> DatasetConfig {
        DatasetConfig {
            train_per_class: 40,
            test_per_class: 20,
            noise,
        }
    }

    fn two() -> Vec<Manifold> {
        vec![
            Manifold::circle(0, [0.0, 0.0], 1.0).unwrap(),
            Manifold::segment(1, vec![-1.0, 2.0], vec![1.0, 2.0]).unwrap(),
        ]
    }

    #[test]
    fn seeded_and_split() {
        let ms = two();
        let a = generate_dataset(&ms, &cfg(0.1), 5).unwrap();
        assert_eq!(a, generate_dataset(&ms, &cfg(0.1), 5).unwrap());
        assert_ne!(a, generate_dataset(&ms, &cfg(0.1), 6).unwrap());
        assert_eq!(a.train.len(), 80);
        assert_eq!(a.test.class_indices(1), (20..40).collect::<Vec<_>>());
        assert_ne!(a.train_params[..20], a.test_params[..20]);
    }

    #[test]
    fn noiseless_points_lie_on_manifolds() {
        let ms = two();
        let d = generate_dataset(&ms, &cfg(0.0), 1).unwrap();
        for p in 0..d.train.len() {
            let m = &ms[d.train.labels()[p]];
            let pr = project(
                m,
                d.train.point(p),
                &GridSpec::oracle(),
                RefineConfig::default(),
            )
            .unwrap();
            assert!(pr.distance < 1e-5);
        }
    }
}
