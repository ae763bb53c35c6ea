//! Parametrizable manifolds, sampling primitives and projections.

mod domain;
mod manifold;
mod pattern;
mod project;
mod sample;

pub use domain::{Interval, ParameterDomain};
pub use manifold::{Manifold, Mapping, PatternMapping};
pub use pattern::{check_fits, rasterize_pattern, Canvas, Raster, Shape};
pub use project::{project, GridSpec, Projection, Projector, RefineConfig};
pub use sample::{distance_to_set, sq_dist, ManifoldSample, PointCloud, SampleSet};

pub(crate) use sample::nearest;
