use std::f64::consts::PI;
use std::sync::Arc;

use super::domain::{Interval, ParameterDomain};
use super::pattern::{check_fits, render_into, Canvas, Raster};
use crate::error::{usage, Result};

/// Closed-form mappings from parameters to ambient points.
#[derive(Debug, Clone)]
pub enum Mapping {
    /// `a + t (b - a)`, `t in [0, 1]`. `a == b` gives a single-point manifold.
    Segment { a: Vec<f64>, b: Vec<f64> },
    /// `center + radius (cos t, sin t)` in the plane.
    Circle { center: [f64; 2], radius: f64 },
    /// Torus of revolution around the z axis.
    Torus { major: f64, minor: f64 },
    /// Rotated (and optionally translated) raster pattern, unit-normalized.
    Pattern(PatternMapping),
}

#[derive(Debug, Clone)]
pub struct PatternMapping {
    pub pattern: Arc<Raster>,
    pub canvas: Canvas,
    /// When false the parameter vector is `(psi)` only.
    pub translate: bool,
}

/// A parametrizable manifold: parameter domain plus mapping into `R^n`.
#[derive(Debug, Clone)]
pub struct Manifold {
    id: usize,
    domain: ParameterDomain,
    mapping: Mapping,
    ambient_dim: usize,
}

impl Manifold {
    pub fn segment(id: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return usage("segment endpoints must be non-empty and of equal length");
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return usage("segment endpoints must be finite");
        }
        let n = a.len();
        Ok(Self {
            id,
            domain: ParameterDomain::interval(0.0, 1.0)?,
            mapping: Mapping::Segment { a, b },
            ambient_dim: n,
        })
    }

    /// Full circle with periodic angle in `[-pi, pi)`.
    pub fn circle(id: usize, center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return usage("circle radius must be positive");
        }
        Ok(Self {
            id,
            domain: ParameterDomain::angle(),
            mapping: Mapping::Circle { center, radius },
            ambient_dim: 2,
        })
    }

    /// Circular arc over the closed angle range `[start, end]`.
    pub fn arc(id: usize, center: [f64; 2], radius: f64, start: f64, end: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return usage("arc radius must be positive");
        }
        if !(end > start) {
            return usage("arc length must be positive");
        }
        if end - start > 2.0 * PI {
            return usage("arc longer than a full turn; use a full circle");
        }
        Ok(Self {
            id,
            domain: ParameterDomain::interval(start, end)?,
            mapping: Mapping::Circle { center, radius },
            ambient_dim: 2,
        })
    }

    pub fn torus(id: usize, major: f64, minor: f64) -> Result<Self> {
        if !(major > 0.0 && minor > 0.0 && major.is_finite() && minor.is_finite()) {
            return usage("torus radii must be positive");
        }
        Ok(Self {
            id,
            domain: ParameterDomain::new(
                vec![Interval::new(-PI, PI), Interval::new(-PI, PI)],
                vec![true, true],
            )?,
            mapping: Mapping::Torus { major, minor },
            ambient_dim: 3,
        })
    }

    /// Pattern transformation manifold with parameters `(psi, tx, ty)`, or
    /// `(psi)` alone when `translation` is `None`.
    pub fn pattern(
        id: usize,
        pattern: Raster,
        canvas: Canvas,
        translation: Option<(Interval, Interval)>,
    ) -> Result<Self> {
        if pattern.is_zero() {
            return usage("pattern is identically zero; normalization undefined");
        }
        let (bounds, periodic) = match translation {
            None => {
                check_fits(&pattern, canvas, 0.0, 0.0)?;
                (vec![Interval::new(-PI, PI)], vec![true])
            }
            Some((tx, ty)) => {
                let mx = tx.lo.abs().max(tx.hi.abs());
                let my = ty.lo.abs().max(ty.hi.abs());
                check_fits(&pattern, canvas, mx, my)?;
                (
                    vec![Interval::new(-PI, PI), tx, ty],
                    vec![true, false, false],
                )
            }
        };
        Ok(Self {
            id,
            domain: ParameterDomain::new(bounds, periodic)?,
            mapping: Mapping::Pattern(PatternMapping {
                pattern: Arc::new(pattern),
                translate: translation.is_some(),
                canvas,
            }),
            ambient_dim: canvas.len(),
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    pub fn mapping(&self) -> &Mapping {
        &self.mapping
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn param_dim(&self) -> usize {
        self.domain.dims()
    }

    pub fn is_pattern(&self) -> bool {
        matches!(self.mapping, Mapping::Pattern(_))
    }

    /// `U(param)`. Periodic coordinates are wrapped first; regular
    /// coordinates outside their interval are a domain error.
    pub fn map(&self, param: &[f64]) -> Result<Vec<f64>> {
        let p = self.domain.normalize(param)?;
        Ok(self.point(&p))
    }

    /// Mapping of an already normalized parameter vector.
    pub(crate) fn point(&self, param: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim];
        self.point_into(param, &mut out);
        out
    }

    pub(crate) fn point_into(&self, param: &[f64], out: &mut [f64]) {
        debug_assert_eq!(param.len(), self.param_dim());
        debug_assert_eq!(out.len(), self.ambient_dim);
        match &self.mapping {
            Mapping::Segment { a, b } => {
                let t = param[0];
                for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
                    *o = x + t * (y - x);
                }
            }
            Mapping::Circle { center, radius } => {
                let (s, c) = param[0].sin_cos();
                out[0] = center[0] + radius * c;
                out[1] = center[1] + radius * s;
            }
            Mapping::Torus { major, minor } => {
                let (st, ct) = param[0].sin_cos();
                let (sp, cp) = param[1].sin_cos();
                let ring = major + minor * cp;
                out[0] = ring * ct;
                out[1] = ring * st;
                out[2] = minor * sp;
            }
            Mapping::Pattern(pm) => {
                let (tx, ty) = if pm.translate {
                    (param[1], param[2])
                } else {
                    (0.0, 0.0)
                };
                render_into(&pm.pattern, param[0], tx, ty, pm.canvas, out);
                let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
                // nonzero by the fit check at construction
                out.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }
}
