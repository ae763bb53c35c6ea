//! Rotation/translation of raster patterns onto a fixed canvas.

use serde::{Deserialize, Serialize};

use crate::error::{domain, usage, Result};

/// Greyscale image, row-major, nonnegative intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return usage("raster must be non-empty");
        }
        if data.len() != width * height {
            return usage(format!(
                "raster data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            ));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return usage("raster intensities must be finite and nonnegative");
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    fn center(&self) -> (f64, f64) {
        (
            (self.width as f64 - 1.0) * 0.5,
            (self.height as f64 - 1.0) * 0.5,
        )
    }

    /// Largest distance from the raster center to the center of a nonzero pixel.
    pub fn support_radius(&self) -> f64 {
        let (cx, cy) = self.center();
        let mut r2: f64 = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) > 0.0 {
                    let dx = x as f64 - cx;
                    let dy = y as f64 - cy;
                    r2 = r2.max(dx * dx + dy * dy);
                }
            }
        }
        r2.sqrt()
    }

    /// Bilinear lookup with a zero background.
    fn sample_bilinear(&self, sx: f64, sy: f64) -> f64 {
        let x0f = sx.floor();
        let y0f = sy.floor();
        let fx = sx - x0f;
        let fy = sy - y0f;
        let x0 = x0f as i64;
        let y0 = y0f as i64;
        let px = |x: i64, y: i64| -> f64 {
            if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
                0.0
            } else {
                self.data[y as usize * self.width + x as usize]
            }
        };
        let top = px(x0, y0) * (1.0 - fx) + px(x0 + 1, y0) * fx;
        let bottom = px(x0, y0 + 1) * (1.0 - fx) + px(x0 + 1, y0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Output canvas size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canvas {
    pub width: usize,
    pub height: usize,
}

impl Canvas {
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

// A nonzero source pixel influences output pixels within this distance of
// its transformed center (circumradius of the rotated bilinear footprint).
const FOOTPRINT: f64 = std::f64::consts::SQRT_2;

/// Checks that the pattern, translated by up to `|tx|`, `|ty|` and rotated
/// arbitrarily, never reaches outside the canvas.
pub fn check_fits(pattern: &Raster, canvas: Canvas, max_tx: f64, max_ty: f64) -> Result<()> {
    if pattern.width > canvas.width || pattern.height > canvas.height {
        return domain(format!(
            "pattern {}x{} larger than canvas {}x{}",
            pattern.width, pattern.height, canvas.width, canvas.height
        ));
    }
    let r = pattern.support_radius() + FOOTPRINT;
    let half_w = (canvas.width as f64 + 1.0) * 0.5;
    let half_h = (canvas.height as f64 + 1.0) * 0.5;
    if max_tx.abs() + r > half_w || max_ty.abs() + r > half_h {
        return domain(format!(
            "pattern support radius {:.3} with translation ({max_tx}, {max_ty}) overflows {}x{} canvas",
            pattern.support_radius(),
            canvas.width,
            canvas.height
        ));
    }
    Ok(())
}

/// Rotates `pattern` by `psi` about its center, shifts it by `(tx, ty)` pixels
/// relative to the canvas center, resamples bilinearly and returns the
/// row-major canvas scaled to unit Euclidean norm.
pub fn rasterize_pattern(
    pattern: &Raster,
    psi: f64,
    tx: f64,
    ty: f64,
    canvas: Canvas,
) -> Result<Vec<f64>> {
    check_fits(pattern, canvas, tx, ty)?;
    let mut out = vec![0.0; canvas.len()];
    render_into(pattern, psi, tx, ty, canvas, &mut out);
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return domain("rendered pattern is identically zero");
    }
    out.iter_mut().for_each(|v| *v /= norm);
    Ok(out)
}

/// Unchecked, unnormalized render. Caller guarantees the fit.
pub(crate) fn render_into(
    pattern: &Raster,
    psi: f64,
    tx: f64,
    ty: f64,
    canvas: Canvas,
    out: &mut [f64],
) {
    let (pcx, pcy) = pattern.center();
    let ccx = (canvas.width as f64 - 1.0) * 0.5 + tx;
    let ccy = (canvas.height as f64 - 1.0) * 0.5 + ty;
    let (s, c) = psi.sin_cos();
    for v in 0..canvas.height {
        let qy = v as f64 - ccy;
        for u in 0..canvas.width {
            let qx = u as f64 - ccx;
            // inverse rotation
            let sx = c * qx + s * qy + pcx;
            let sy = -s * qx + c * qy + pcy;
            out[v * canvas.width + u] = pattern.sample_bilinear(sx, sy);
        }
    }
}

/// Procedural test patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Bar,
    Ell,
    Tee,
    Cross,
    Disk,
    Ring,
    Wedge,
    Gauss,
    Dot,
}

impl Shape {
    /// Coverage of the point `(u, v)` in normalized coordinates, where the unit
    /// disc is the content area.
    fn value(self, u: f64, v: f64) -> f64 {
        let inside = |b: bool| if b { 1.0 } else { 0.0 };
        let r2 = u * u + v * v;
        if r2 > 1.0 {
            return 0.0;
        }
        match self {
            Shape::Bar => inside(u.abs() <= 0.25 && v.abs() <= 0.8),
            Shape::Ell => inside(
                (-0.6..=-0.2).contains(&u) && v.abs() <= 0.7
                    || u.abs() <= 0.6 && (0.3..=0.7).contains(&v),
            ),
            Shape::Tee => inside(
                u.abs() <= 0.65 && (-0.7..=-0.35).contains(&v) || u.abs() <= 0.18 && v.abs() <= 0.7,
            ),
            Shape::Cross => {
                inside((u.abs() <= 0.2 || v.abs() <= 0.2) && u.abs().max(v.abs()) <= 0.7)
            }
            Shape::Disk => inside(r2 <= 0.36),
            Shape::Ring => inside((0.1225..=0.49).contains(&r2)),
            Shape::Wedge => inside((-0.7..=0.6).contains(&v) && u.abs() <= 0.5 * (v + 0.7)),
            Shape::Gauss => (-r2 / (2.0 * 0.35 * 0.35)).exp(),
            Shape::Dot => inside(r2 <= 0.04),
        }
    }

    /// Renders the shape on a `size x size` raster with its content confined to
    /// a disc of `radius` pixels around the raster center (4x4 supersampled).
    pub fn render(self, size: usize, radius: f64) -> Result<Raster> {
        if size == 0 || radius <= 0.0 {
            return usage("synthetic pattern needs size > 0 and radius > 0");
        }
        const SS: usize = 4;
        let c = (size as f64 - 1.0) * 0.5;
        let mut data = vec![0.0; size * size];
        for y in 0..size {
            for x in 0..size {
                let mut acc = 0.0;
                for sy in 0..SS {
                    for sx in 0..SS {
                        let px = x as f64 - 0.5 + (sx as f64 + 0.5) / SS as f64;
                        let py = y as f64 - 0.5 + (sy as f64 + 0.5) / SS as f64;
                        acc += self.value((px - c) / radius, (py - c) / radius);
                    }
                }
                data[y * size + x] = acc / (SS * SS) as f64;
            }
        }
        let raster = Raster::new(size, size, data)?;
        if raster.is_zero() {
            return usage("synthetic pattern rendered empty; increase radius");
        }
        Ok(raster)
    }
}
