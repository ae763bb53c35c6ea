use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::AnnealSchedule;
use crate::cmd::CmdConfig;
use crate::error::{Error, Result};
use crate::geometry::{Canvas, GridSpec, Interval, Manifold, Raster, RefineConfig, Shape};
use crate::remd::EmptyCellPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternSource {
    /// 8-bit binary PGM file, relative to the config file.
    Pgm(PathBuf),
    /// Headerless CSV matrix, relative to the config file.
    Csv(PathBuf),
    Synthetic {
        shape: Shape,
        size: usize,
        /// Content radius in pixels.
        radius: f64,
    },
    Pixels {
        width: usize,
        height: usize,
        data: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldKind {
    Segment {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    Circle {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
    },
    Arc {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
        start: f64,
        end: f64,
    },
    Torus {
        major: f64,
        minor: f64,
    },
    /// Rotation (and optionally translation by up to `translation` pixels on
    /// each axis) of a pattern on a square canvas.
    Pattern {
        pattern: PatternSource,
        canvas: usize,
        #[serde(default)]
        translation: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldDecl {
    /// Class id; defaults to the position in the list.
    #[serde(default)]
    pub class: Option<usize>,
    #[serde(flatten)]
    pub kind: ManifoldKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Standard deviation of the isotropic Gaussian ambient noise.
    #[serde(default)]
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemdParams {
    pub max_iters: usize,
    pub tol: f64,
    pub min_init_spacing: Option<f64>,
    pub empty_cell_policy: EmptyCellPolicy,
}

impl Default for RemdParams {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-5,
            min_init_spacing: None,
            empty_cell_policy: EmptyCellPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetParams {
    /// Dense grid size per manifold as a multiple of the per-manifold budget.
    pub dense_factor: usize,
    pub dmd_poor_factor: f64,
    pub dmd_stall_sweeps: usize,
    pub dmd_attempts: usize,
    pub cmd: CmdConfig,
}

impl Default for BudgetParams {
    fn default() -> Self {
        Self {
            dense_factor: 2,
            dmd_poor_factor: 2.0,
            dmd_stall_sweeps: 2,
            dmd_attempts: 3,
            cmd: CmdConfig::default(),
        }
    }
}

/// Algorithm with its parameters. Projection grids for every algorithm come
/// from [`ProjectionConfig::working`]; grid fields inside `params` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    Random,
    Regular,
    Remd {
        #[serde(default)]
        params: RemdParams,
    },
    Cmd {
        #[serde(default)]
        params: CmdConfig,
    },
    Mdsa {
        #[serde(default)]
        params: AnnealSchedule,
    },
    Mdpa {
        #[serde(default)]
        params: BudgetParams,
    },
    Dmd {
        #[serde(default)]
        params: BudgetParams,
    },
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::Regular => "regular",
            Self::Remd { .. } => "remd",
            Self::Cmd { .. } => "cmd",
            Self::Mdsa { .. } => "mdsa",
            Self::Mdpa { .. } => "mdpa",
            Self::Dmd { .. } => "dmd",
        }
    }

    /// Whether the algorithm optimizes all manifolds jointly.
    pub fn is_joint(&self) -> bool {
        matches!(
            self,
            Self::Cmd { .. } | Self::Mdsa { .. } | Self::Mdpa { .. } | Self::Dmd { .. }
        )
    }
}

/// Unset grids default to 64 (working) and 256 (oracle) points per
/// dimension, or `[64, 9, 9]` and `[128, 13, 13]` for three-parameter
/// manifolds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionConfig {
    /// Coarse grid used inside the algorithms.
    pub working: Option<GridSpec>,
    /// Coarse grid used for ground-truth projections in metrics.
    pub oracle: Option<GridSpec>,
    pub refine: RefineConfig,
}

impl ProjectionConfig {
    pub fn working_for(&self, manifold: &Manifold) -> GridSpec {
        self.working
            .clone()
            .unwrap_or_else(|| match manifold.param_dim() {
                3 => GridSpec::PerDim(vec![64, 9, 9]),
                _ => GridSpec::working(),
            })
    }

    pub fn oracle_for(&self, manifold: &Manifold) -> GridSpec {
        self.oracle
            .clone()
            .unwrap_or_else(|| match manifold.param_dim() {
                3 => GridSpec::PerDim(vec![128, 13, 13]),
                _ => GridSpec::oracle(),
            })
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub manifolds: Vec<ManifoldDecl>,
    pub dataset: DatasetConfig,
    pub algorithms: Vec<AlgorithmSpec>,
    /// Samples per manifold; joint budget-allocation methods use
    /// `budget x number of manifolds` in total.
    pub budgets: Vec<usize>,
    #[serde(default = "one")]
    pub repetitions: usize,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub projection: ProjectionConfig,
    /// Adds a wall-time column; makes outputs run-dependent.
    #[serde(default)]
    pub timing: bool,
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg = Self::from_json(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn validate(&self) -> Result<()> {
        if self.manifolds.is_empty() {
            return config_err("at least one manifold is required");
        }
        let mut classes: Vec<usize> = self.class_order();
        classes.sort_unstable();
        if classes != (0..self.manifolds.len()).collect::<Vec<_>>() {
            return config_err("manifold classes must be 0..M-1 without repeats");
        }
        if self.dataset.train_per_class == 0 || self.dataset.test_per_class == 0 {
            return config_err("dataset sizes must be positive");
        }
        if !(self.dataset.noise >= 0.0) {
            return config_err("noise must be nonnegative");
        }
        if self.algorithms.is_empty() {
            return config_err("no algorithms listed");
        }
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return config_err("budgets must be a non-empty list of positive sizes");
        }
        if self.repetitions == 0 {
            return config_err("repetitions must be positive");
        }
        if self.manifolds.len() < 2 && self.algorithms.iter().any(AlgorithmSpec::is_joint) {
            return config_err("classification algorithms need at least two manifolds");
        }
        Ok(())
    }

    fn class_order(&self) -> Vec<usize> {
        self.manifolds
            .iter()
            .enumerate()
            .map(|(i, d)| d.class.unwrap_or(i))
            .collect()
    }

    /// Builds the manifolds ordered by class id.
    pub fn build_manifolds(&self, base: &Path) -> Result<Vec<Manifold>> {
        let mut out: Vec<(usize, Manifold)> = self
            .manifolds
            .iter()
            .zip(self.class_order())
            .map(|(d, c)| Ok((c, build_manifold(c, &d.kind, base)?)))
            .collect::<Result<_>>()?;
        out.sort_by_key(|(c, _)| *c);
        Ok(out.into_iter().map(|(_, m)| m).collect())
    }
}

fn load_pattern(src: &PatternSource, base: &Path) -> Result<Raster> {
    match src {
        PatternSource::Pgm(p) => crate::io::read_pgm(&base.join(p)),
        PatternSource::Csv(p) => {
            let f = std::fs::File::open(base.join(p))?;
            crate::io::read_matrix(f)
        }
        PatternSource::Synthetic {
            shape,
            size,
            radius,
        } => shape.render(*size, *radius),
        PatternSource::Pixels {
            width,
            height,
            data,
        } => Raster::new(*width, *height, data.clone()),
    }
}

pub fn build_manifold(id: usize, kind: &ManifoldKind, base: &Path) -> Result<Manifold> {
    let m = match kind {
        ManifoldKind::Segment { a, b } => Manifold::segment(id, a.clone(), b.clone()),
        ManifoldKind::Circle { center, radius } => Manifold::circle(id, *center, *radius),
        ManifoldKind::Arc {
            center,
            radius,
            start,
            end,
        } => Manifold::arc(id, *center, *radius, *start, *end),
        ManifoldKind::Torus { major, minor } => Manifold::torus(id, *major, *minor),
        ManifoldKind::Pattern {
            pattern,
            canvas,
            translation,
        } => {
            let raster = load_pattern(pattern, base)?;
            let canvas = Canvas {
                width: *canvas,
                height: *canvas,
            };
            let t = translation.map(|t| (Interval::new(-t, t), Interval::new(-t, t)));
            Manifold::pattern(id, raster, canvas, t)
        }
    };
    m.map_err(|e| Error::Config(format!("manifold {id}: {e}")))
}
