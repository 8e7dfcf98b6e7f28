//! Oriented 3D boxes and the overlap kernels shared by every suppression variant.
//!
//! Boxes live in a right-handed, z-up frame: `(cx, cy)` is the position on the
//! ground plane, `cz` the height of the geometric center, and `yaw` rotates the
//! `dx` (length) axis about +z. Bird's-eye-view (BEV) overlap clips the two
//! rotated footprints against each other (Sutherland–Hodgman) and measures the
//! result with the shoelace formula.

use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Signed-distance tolerance for the clipping inside/outside predicate, meters.
pub const CLIP_EPS: f64 = 1e-9;

/// Intersections smaller than this (m²) count as no overlap.
pub const MIN_INTERSECTION_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box dimension {name} must be positive and finite, got {value}")]
    InvalidDimension { name: &'static str, value: f64 },
    #[error("box field {name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("score must lie in [0, 1], got {0}")]
    InvalidScore(f64),
}

/// Which overlap measure the suppression step uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum IouMode {
    #[default]
    #[serde(rename = "bev")]
    Bev,
    #[serde(rename = "3d")]
    ThreeD,
}

impl IouMode {
    pub fn as_str(self) -> &'static str {
        match self {
            IouMode::Bev => "bev",
            IouMode::ThreeD => "3d",
        }
    }
}

impl std::str::FromStr for IouMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bev" => Ok(IouMode::Bev),
            "3d" => Ok(IouMode::ThreeD),
            other => Err(format!("unknown iou mode '{other}' (expected bev or 3d)")),
        }
    }
}

impl std::fmt::Display for IouMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A planar point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Oriented 3D bounding box with a class label and a detection confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    /// Length along the heading direction.
    pub dx: f64,
    /// Width.
    pub dy: f64,
    /// Height.
    pub dz: f64,
    pub yaw: f64,
    pub label: u32,
    pub score: f64,
}

impl Box3D {
    /// Builds a validated box; `yaw` is normalized into `[-π, π)`.
    pub fn new(
        center: [f64; 3],
        dims: [f64; 3],
        yaw: f64,
        label: u32,
        score: f64,
    ) -> Result<Self, GeometryError> {
        let b = Self {
            cx: center[0],
            cy: center[1],
            cz: center[2],
            dx: dims[0],
            dy: dims[1],
            dz: dims[2],
            yaw: normalize_yaw(yaw),
            label,
            score,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for (name, value) in [("cx", self.cx), ("cy", self.cy), ("cz", self.cz), ("yaw", self.yaw)] {
            if !value.is_finite() {
                return Err(GeometryError::NonFinite { name, value });
            }
        }
        for (name, value) in [("dx", self.dx), ("dy", self.dy), ("dz", self.dz)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(GeometryError::InvalidDimension { name, value });
            }
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(GeometryError::InvalidScore(self.score));
        }
        Ok(())
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score;
        self
    }

    pub fn volume(&self) -> f64 {
        volume(self)
    }

    pub fn bev_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn center(&self) -> [f64; 3] {
        [self.cx, self.cy, self.cz]
    }

    pub fn z_range(&self) -> (f64, f64) {
        let half = 0.5 * self.dz;
        (self.cz - half, self.cz + half)
    }

    pub fn bev_corners(&self) -> [Point2; 4] {
        bev_corners(self)
    }

    /// Ordering key used to evaluate symmetric kernels in a canonical operand order.
    fn canonical_cmp(&self, other: &Self) -> Ordering {
        let lhs = [self.cx, self.cy, self.cz, self.dx, self.dy, self.dz, self.yaw];
        let rhs = [other.cx, other.cy, other.cz, other.dx, other.dy, other.dz, other.yaw];
        lhs.iter()
            .zip(rhs.iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

/// One candidate set for a single point-cloud frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub frame_id: String,
    pub boxes: Vec<Box3D>,
    /// Score fields of ground-truth boxes are ignored.
    pub ground_truth: Option<Vec<Box3D>>,
}

impl Frame {
    pub fn new(frame_id: impl Into<String>, boxes: Vec<Box3D>) -> Self {
        Self { frame_id: frame_id.into(), boxes, ground_truth: None }
    }

    pub fn scores(&self) -> Vec<f64> {
        self.boxes.iter().map(|b| b.score).collect()
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    if (-PI..PI).contains(&yaw) {
        return yaw;
    }
    (yaw + PI).rem_euclid(2.0 * PI) - PI
}

pub fn volume(b: &Box3D) -> f64 {
    b.dx * b.dy * b.dz
}

fn corner_offsets(b: &Box3D) -> [Point2; 4] {
    let (s, c) = b.yaw.sin_cos();
    let hx = 0.5 * b.dx;
    let hy = 0.5 * b.dy;
    let local = [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)];
    local.map(|(x, y)| Point2::new(x * c - y * s, x * s + y * c))
}

/// Footprint corners in counter-clockwise order.
pub fn bev_corners(b: &Box3D) -> [Point2; 4] {
    corner_offsets(b).map(|p| Point2::new(b.cx + p.x, b.cy + p.y))
}

/// A box with its footprint offsets precomputed, for repeated overlap queries.
#[derive(Debug, Clone, Copy)]
pub struct PreparedBox {
    pub bx: Box3D,
    offsets: [Point2; 4],
    radius: f64,
}

impl PreparedBox {
    pub fn new(bx: Box3D) -> Self {
        Self {
            bx,
            offsets: corner_offsets(&bx),
            radius: 0.5 * bx.dx.hypot(bx.dy),
        }
    }

    pub fn bev_intersection(&self, other: &PreparedBox) -> f64 {
        match self.bx.canonical_cmp(&other.bx) {
            Ordering::Greater => footprint_intersection(other, self),
            _ => footprint_intersection(self, other),
        }
    }

    pub fn iou_bev(&self, other: &PreparedBox) -> f64 {
        let inter = self.bev_intersection(other);
        overlap_ratio(inter, self.bx.bev_area() + other.bx.bev_area())
    }

    pub fn iou_3d(&self, other: &PreparedBox) -> f64 {
        let dz = vertical_overlap(&self.bx, &other.bx);
        if dz <= 0.0 {
            return 0.0;
        }
        let inter = self.bev_intersection(other) * dz;
        overlap_ratio(inter, self.bx.volume() + other.bx.volume())
    }

    pub fn iou(&self, other: &PreparedBox, mode: IouMode) -> f64 {
        match mode {
            IouMode::Bev => self.iou_bev(other),
            IouMode::ThreeD => self.iou_3d(other),
        }
    }

    /// Axis-aligned bounds of the footprint: `(min, max)`.
    pub fn bev_bounds(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for o in &self.offsets {
            lo.x = lo.x.min(self.bx.cx + o.x);
            lo.y = lo.y.min(self.bx.cy + o.y);
            hi.x = hi.x.max(self.bx.cx + o.x);
            hi.y = hi.y.max(self.bx.cy + o.y);
        }
        (lo, hi)
    }
}

fn vertical_overlap(a: &Box3D, b: &Box3D) -> f64 {
    let (alo, ahi) = a.z_range();
    let (blo, bhi) = b.z_range();
    (ahi.min(bhi) - alo.max(blo)).max(0.0)
}

fn overlap_ratio(inter: f64, total: f64) -> f64 {
    if inter <= 0.0 {
        return 0.0;
    }
    let union = total - inter;
    if union <= 0.0 {
        return 1.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Small fixed-capacity polygon; two convex quads clip to at most eight vertices.
#[derive(Clone, Copy)]
struct Poly {
    pts: [Point2; 16],
    len: usize,
}

impl Poly {
    fn empty() -> Self {
        Self { pts: [Point2::default(); 16], len: 0 }
    }

    fn push(&mut self, p: Point2) {
        if self.len < self.pts.len() {
            self.pts[self.len] = p;
            self.len += 1;
        }
    }

    fn as_slice(&self) -> &[Point2] {
        &self.pts[..self.len]
    }
}

/// Shoelace area of a simple polygon (positive for CCW order).
pub fn polygon_area(pts: &[Point2]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..pts.len() {
        let p = pts[i];
        let q = pts[(i + 1) % pts.len()];
        acc += p.x * q.y - q.x * p.y;
    }
    0.5 * acc
}

/// Clips a polygon against a convex CCW clip polygon.
pub fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut poly = Poly::empty();
    for &p in subject {
        poly.push(p);
    }
    clip_into(&mut poly, clip);
    poly.as_slice().to_vec()
}

fn clip_into(poly: &mut Poly, clip: &[Point2]) {
    for i in 0..clip.len() {
        if poly.len == 0 {
            return;
        }
        let p = clip[i];
        let q = clip[(i + 1) % clip.len()];
        let ex = q.x - p.x;
        let ey = q.y - p.y;
        let norm = ex.hypot(ey);
        if norm <= 0.0 {
            continue;
        }
        let dist = |v: Point2| (ex * (v.y - p.y) - ey * (v.x - p.x)) / norm;

        let input = *poly;
        let src = input.as_slice();
        let mut out = Poly::empty();
        let mut prev = src[src.len() - 1];
        let mut d_prev = dist(prev);
        for &cur in src {
            let d_cur = dist(cur);
            let cur_in = d_cur >= -CLIP_EPS;
            let prev_in = d_prev >= -CLIP_EPS;
            if cur_in {
                if !prev_in {
                    out.push(edge_cross(prev, cur, d_prev, d_cur));
                }
                out.push(cur);
            } else if prev_in {
                out.push(edge_cross(prev, cur, d_prev, d_cur));
            }
            prev = cur;
            d_prev = d_cur;
        }
        *poly = out;
    }
}

fn edge_cross(s: Point2, e: Point2, ds: f64, de: f64) -> Point2 {
    let denom = ds - de;
    if denom == 0.0 {
        return e;
    }
    let t = ds / denom;
    Point2::new(s.x + t * (e.x - s.x), s.y + t * (e.y - s.y))
}

/// Intersection area of two footprints, computed in `a`'s local translation.
fn footprint_intersection(a: &PreparedBox, b: &PreparedBox) -> f64 {
    let tx = b.bx.cx - a.bx.cx;
    let ty = b.bx.cy - a.bx.cy;
    let reach = a.radius + b.radius + CLIP_EPS;
    if tx * tx + ty * ty > reach * reach {
        return 0.0;
    }
    let mut poly = Poly::empty();
    for &o in &a.offsets {
        poly.push(o);
    }
    let clip = b.offsets.map(|o| Point2::new(tx + o.x, ty + o.y));
    clip_into(&mut poly, &clip);
    let area = polygon_area(poly.as_slice()).abs();
    if area < MIN_INTERSECTION_AREA {
        0.0
    } else {
        area
    }
}

/// Ground-plane intersection-over-union of the two rotated footprints.
pub fn iou_bev(a: &Box3D, b: &Box3D) -> f64 {
    PreparedBox::new(*a).iou_bev(&PreparedBox::new(*b))
}

/// Volumetric intersection-over-union (BEV intersection times vertical overlap).
pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    PreparedBox::new(*a).iou_3d(&PreparedBox::new(*b))
}

pub fn iou(a: &Box3D, b: &Box3D, mode: IouMode) -> f64 {
    match mode {
        IouMode::Bev => iou_bev(a, b),
        IouMode::ThreeD => iou_3d(a, b),
    }
}
