use serde::{Deserialize, Serialize};

use crate::error::{domain, usage, Result};

/// Closed interval of admissible values for one parameter coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Box-shaped parameter domain with optionally periodic coordinates.
///
/// A periodic coordinate covers `[lo, hi)` and wraps around; a regular one
/// covers the closed interval `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    bounds: Vec<Interval>,
    periodic: Vec<bool>,
}

impl ParameterDomain {
    pub fn new(bounds: Vec<Interval>, periodic: Vec<bool>) -> Result<Self> {
        if bounds.is_empty() {
            return usage("parameter domain needs at least one dimension");
        }
        if bounds.len() != periodic.len() {
            return usage("bounds and periodic flags differ in length");
        }
        for (j, b) in bounds.iter().enumerate() {
            if !(b.lo.is_finite() && b.hi.is_finite() && b.lo < b.hi) {
                return usage(format!(
                    "dimension {j}: need lo < hi, got [{}, {}]",
                    b.lo, b.hi
                ));
            }
        }
        Ok(Self { bounds, periodic })
    }

    /// Single closed interval.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![Interval::new(lo, hi)], vec![false])
    }

    /// Full angle `[-pi, pi)`, periodic.
    pub fn angle() -> Self {
        Self {
            bounds: vec![Interval::new(-std::f64::consts::PI, std::f64::consts::PI)],
            periodic: vec![true],
        }
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    pub fn bound(&self, j: usize) -> Interval {
        self.bounds[j]
    }

    pub fn is_periodic(&self, j: usize) -> bool {
        self.periodic[j]
    }

    pub fn width(&self, j: usize) -> f64 {
        self.bounds[j].width()
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| 0.5 * (b.lo + b.hi)).collect()
    }

    fn wrap_coord(&self, j: usize, v: f64) -> f64 {
        let b = self.bounds[j];
        let w = b.width();
        let r = b.lo + (v - b.lo).rem_euclid(w);
        if r >= b.hi {
            b.lo
        } else {
            r
        }
    }

    /// Wraps periodic coordinates into range and rejects out-of-range regular ones.
    pub fn normalize(&self, param: &[f64]) -> Result<Vec<f64>> {
        if param.len() != self.dims() {
            return usage(format!(
                "parameter has {} coordinates, domain has {}",
                param.len(),
                self.dims()
            ));
        }
        param
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if !v.is_finite() {
                    return domain(format!("coordinate {j} is not finite"));
                }
                if self.periodic[j] {
                    Ok(self.wrap_coord(j, v))
                } else {
                    let b = self.bounds[j];
                    if v < b.lo || v > b.hi {
                        domain(format!("coordinate {j} = {v} outside [{}, {}]", b.lo, b.hi))
                    } else {
                        Ok(v)
                    }
                }
            })
            .collect()
    }

    pub fn contains(&self, param: &[f64]) -> bool {
        self.normalize(param).is_ok()
    }

    /// Projects an arbitrary vector onto the domain: wrap periodic, clamp the rest.
    pub fn retract(&self, param: &mut [f64]) {
        for (j, v) in param.iter_mut().enumerate() {
            if self.periodic[j] {
                *v = self.wrap_coord(j, *v);
            } else {
                let b = self.bounds[j];
                *v = v.clamp(b.lo, b.hi);
            }
        }
    }

    /// Coordinate-wise displacement from `from` to `to`, taking the shorter arc
    /// on periodic coordinates.
    pub fn displacement(&self, from: &[f64], to: &[f64]) -> Vec<f64> {
        from.iter()
            .zip(to)
            .enumerate()
            .map(|(j, (&a, &b))| {
                let d = b - a;
                if self.periodic[j] {
                    let w = self.width(j);
                    (d + 0.5 * w).rem_euclid(w) - 0.5 * w
                } else {
                    d
                }
            })
            .collect()
    }

    /// `from + step * direction`, retracted onto the domain.
    pub fn step(&self, from: &[f64], direction: &[f64], step: f64) -> Vec<f64> {
        let mut out: Vec<f64> = from
            .iter()
            .zip(direction)
            .map(|(&a, &d)| a + step * d)
            .collect();
        self.retract(&mut out);
        out
    }

    /// Maps a point of the unit cube onto the domain (used for uniform draws).
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = u
            .iter()
            .zip(&self.bounds)
            .map(|(&u, b)| b.lo + u * b.width())
            .collect();
        self.retract(&mut out);
        out
    }
}
