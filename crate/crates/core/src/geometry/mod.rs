//! Exact polygon mathematics, box representations and metric scale
//! recovery from reference markers.
//!
//! Everything here is a pure function on immutable inputs and safe for
//! arbitrary parallel invocation.

mod mask;

pub use mask::{
    fill_holes, mask_iou, rasterize, rasterize_polygon, trace_boundary, BinaryMask, SemanticMask,
};

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::annot::{MarkerAnnotation, MarkerClass, Polygon};
use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates, `x_min < x_max`, `y_min < y_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAlignedBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl AxisAlignedBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<AxisAlignedBox> {
        if !(x_min < x_max && y_min < y_max) {
            return Err(Error::Geometry(format!(
                "empty box [{x_min}, {y_min}, {x_max}, {y_max}]"
            )));
        }
        Ok(AxisAlignedBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

/// Intersection-over-union of two axis-aligned boxes; 0 when they merely
/// touch edge to edge.
pub fn aabb_iou(a: &AxisAlignedBox, b: &AxisAlignedBox) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Oriented box in canonical form: `width >= height`, angle in `[0, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: [f64; 2],
    pub width: f64,
    pub height: f64,
    /// Rotation of the width axis against +x, radians.
    pub angle: f64,
}

impl OrientedBox {
    pub fn new(center: [f64; 2], width: f64, height: f64, angle: f64) -> Result<OrientedBox> {
        if width <= 0.0 || height <= 0.0 {
            return Err(Error::Geometry(format!(
                "oriented box with empty side {width}x{height}"
            )));
        }
        let (width, height, angle) = if width >= height {
            (width, height, angle)
        } else {
            (height, width, angle + FRAC_PI_2)
        };
        let mut angle = angle.rem_euclid(PI);
        if angle >= PI {
            angle = 0.0;
        }
        Ok(OrientedBox {
            center,
            width,
            height,
            angle,
        })
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Corner points in winding order.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (sin, cos) = self.angle.sin_cos();
        let u = [cos, sin];
        let v = [-sin, cos];
        let hw = self.width / 2.0;
        let hh = self.height / 2.0;
        let at = |su: f64, sv: f64| {
            [
                self.center[0] + su * hw * u[0] + sv * hh * v[0],
                self.center[1] + su * hw * u[1] + sv * hh * v[1],
            ]
        };
        [at(-1.0, -1.0), at(1.0, -1.0), at(1.0, 1.0), at(-1.0, 1.0)]
    }

    /// Point containment, boundary inclusive.
    pub fn contains(&self, point: [f64; 2]) -> bool {
        let (sin, cos) = self.angle.sin_cos();
        let dx = point[0] - self.center[0];
        let dy = point[1] - self.center[1];
        let lu = dx * cos + dy * sin;
        let lv = -dx * sin + dy * cos;
        lu.abs() <= self.width / 2.0 && lv.abs() <= self.height / 2.0
    }
}

/// Unsigned shoelace area of a polygon in pixel^2.
pub fn polygon_area(polygon: &Polygon) -> f64 {
    crate::annot::signed_area(polygon.vertices()).abs()
}

/// Unsigned shoelace area of a raw vertex loop.
pub fn loop_area(vertices: &[[f64; 2]]) -> f64 {
    crate::annot::signed_area(vertices).abs()
}

/// Convex hull (Andrew's monotone chain), collinear points dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let build = |iter: &mut dyn Iterator<Item = [f64; 2]>| {
        let mut chain: Vec<[f64; 2]> = Vec::new();
        for p in iter {
            while chain.len() >= 2 && cross(chain[chain.len() - 2], chain[chain.len() - 1], p) <= 0.0
            {
                chain.pop();
            }
            chain.push(p);
        }
        chain
    };
    let mut lower = build(&mut pts.iter().copied());
    let mut upper = build(&mut pts.iter().rev().copied());
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Minimum-area enclosing oriented rectangle of a point set.
///
/// Rotating calipers: the optimal rectangle is aligned with one hull edge,
/// so every hull edge is tried.
pub fn min_area_rect(points: &[[f64; 2]]) -> Result<OrientedBox> {
    let hull = convex_hull(points);
    if hull.len() < 3 {
        return Err(Error::Geometry(
            "degenerate point set: no enclosing rectangle with positive area".into(),
        ));
    }
    let mut best: Option<(f64, OrientedBox)> = None;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let u = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
        let v = [-u[1], u[0]];
        let mut min_u = f64::INFINITY;
        let mut max_u = f64::NEG_INFINITY;
        let mut min_v = f64::INFINITY;
        let mut max_v = f64::NEG_INFINITY;
        for p in &hull {
            let pu = p[0] * u[0] + p[1] * u[1];
            let pv = p[0] * v[0] + p[1] * v[1];
            min_u = min_u.min(pu);
            max_u = max_u.max(pu);
            min_v = min_v.min(pv);
            max_v = max_v.max(pv);
        }
        let w = max_u - min_u;
        let h = max_v - min_v;
        let area = w * h;
        if best.as_ref().is_none_or(|(best_area, _)| area < *best_area) {
            let cu = (min_u + max_u) / 2.0;
            let cv = (min_v + max_v) / 2.0;
            let center = [cu * u[0] + cv * v[0], cu * u[1] + cv * v[1]];
            best = Some((area, OrientedBox::new(center, w, h, u[1].atan2(u[0]))?));
        }
    }
    Ok(best.expect("hull has edges").1)
}

/// Minimum-area enclosing oriented rectangle of four marker corners.
pub fn obb_from_corners(corners: &[[f64; 2]; 4]) -> Result<OrientedBox> {
    min_area_rect(corners)
}

/// Clip a polygon against one convex polygon (Sutherland-Hodgman).
///
/// `clip` may wind either way; points exactly on a clip edge are kept.
pub fn convex_clip(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let orientation = crate::annot::signed_area(clip).signum();
    if orientation == 0.0 {
        return Vec::new();
    }
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let side = |p: [f64; 2]| {
            orientation * ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]))
        };
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let current = input[j];
            let previous = input[(j + input.len() - 1) % input.len()];
            let side_current = side(current);
            let side_previous = side(previous);
            if side_current >= 0.0 {
                if side_previous < 0.0 {
                    output.push(edge_intersection(previous, current, a, b));
                }
                output.push(current);
            } else if side_previous >= 0.0 {
                output.push(edge_intersection(previous, current, a, b));
            }
        }
    }
    output
}

fn edge_intersection(p0: [f64; 2], p1: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let d = [p1[0] - p0[0], p1[1] - p0[1]];
    let e = [b[0] - a[0], b[1] - a[1]];
    let denom = d[0] * e[1] - d[1] * e[0];
    let t = ((a[0] - p0[0]) * e[1] - (a[1] - p0[1]) * e[0]) / denom;
    [p0[0] + t * d[0], p0[1] + t * d[1]]
}

/// Intersection-over-union of two oriented boxes via convex polygon
/// clipping.
pub fn obb_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let clipped = convex_clip(&a.corners(), &b.corners());
    let inter = if clipped.len() < 3 { 0.0 } else { loop_area(&clipped) };
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Physical dimensions of a marker type; `length_mm` is the longer side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerDims {
    pub length_mm: f64,
    pub width_mm: f64,
}

/// Recovered metric scale of an image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleEstimate {
    #[serde(rename = "mm_per_px")]
    pub mm_per_pixel: f64,
    pub marker: MarkerClass,
    /// Largest relative deviation of the four per-side ratios from their
    /// mean. Perspective skew and detection noise show up here.
    pub residual: f64,
}

/// Estimate mm-per-pixel from a marker of known physical size.
///
/// Each side contributes the ratio of its physical length to its pixel
/// length; opposite sides pair up, and the longer pixel pair is matched
/// with `length_mm`.
pub fn estimate_scale(marker: &MarkerAnnotation, physical: MarkerDims) -> Result<ScaleEstimate> {
    if physical.length_mm <= 0.0 || physical.width_mm <= 0.0 {
        return Err(Error::Geometry("marker physical dimensions must be positive".into()));
    }
    let corners = marker.corners();
    let mut sides = [0.0f64; 4];
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        sides[i] = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        if sides[i] <= 1.0 {
            return Err(Error::Geometry(format!(
                "marker side {i} is only {:.3} px; marker too small for scale estimation",
                sides[i]
            )));
        }
    }
    // opposite pairs (0, 2) and (1, 3); the longer pixel pair carries the
    // physical length
    let even_pair_is_longer = sides[0] + sides[2] >= sides[1] + sides[3];
    let ratios: Vec<f64> = sides
        .iter()
        .enumerate()
        .map(|(i, side)| {
            let in_even_pair = i == 0 || i == 2;
            let physical_side = if in_even_pair == even_pair_is_longer {
                physical.length_mm
            } else {
                physical.width_mm
            };
            physical_side / side
        })
        .collect();
    let mean = ratios.iter().sum::<f64>() / 4.0;
    let residual = ratios
        .iter()
        .map(|r| (r - mean).abs() / mean)
        .fold(0.0, f64::max);
    Ok(ScaleEstimate {
        mm_per_pixel: mean,
        marker: marker.class(),
        residual,
    })
}

/// Convert a pixel area into mm^2 under a recovered scale.
pub fn mask_area_mm2(pixel_area: f64, scale: &ScaleEstimate) -> f64 {
    pixel_area * scale.mm_per_pixel * scale.mm_per_pixel
}
