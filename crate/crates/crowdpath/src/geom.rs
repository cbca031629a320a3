//! Planar geometry primitives: points, trajectories, obstacle polygons, the
//! window rectangle, and the rigid transform into the local prediction frame.
//!
//! Local-frame conventions used throughout the crate:
//! the window rectangle is `[0, length] x [0, width]` in meters, the agent's
//! last observed position sits at the anchor `(length/4, width/2)`, and the
//! agent's mean heading over the observation window points along `+x`.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// 2D point / displacement in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product (signed parallelogram area).
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// One tracked position: timestep index plus position in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub t: usize,
    pub pos: Vec2,
}

impl TrackPoint {
    pub fn new(t: usize, x: f64, y: f64) -> Self {
        TrackPoint {
            t,
            pos: Vec2::new(x, y),
        }
    }
}

/// Time-ordered sequence of positions at a uniform timestep.
///
/// Invariants: at least one point, timestep indices strictly increasing by 1,
/// all coordinates finite, `dt > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Vec<TrackPoint>,
    dt: f64,
}

impl Trajectory {
    pub fn new(points: Vec<TrackPoint>, dt: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Shape("trajectory must have at least one point".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Data(format!("timestep duration must be positive, got {dt}")));
        }
        for w in points.windows(2) {
            if w[1].t != w[0].t + 1 {
                return Err(Error::Data(format!(
                    "timestep indices must increase by 1 ({} then {})",
                    w[0].t, w[1].t
                )));
            }
        }
        if let Some(p) = points.iter().find(|p| !p.pos.is_finite()) {
            return Err(Error::Data(format!("non-finite coordinate at step {}", p.t)));
        }
        Ok(Trajectory { points, dt })
    }

    pub fn points(&self) -> &[TrackPoint] {
        &self.points
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: length >= 1
    }

    pub fn first(&self) -> TrackPoint {
        self.points[0]
    }

    pub fn last(&self) -> TrackPoint {
        *self.points.last().unwrap()
    }

    /// Point at local index (not timestep).
    pub fn at(&self, i: usize) -> TrackPoint {
        self.points[i]
    }

    /// Total polyline length in meters.
    pub fn arc_length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[0].pos.distance(w[1].pos))
            .sum()
    }

    /// Mean displacement per step over the whole trajectory; zero for a
    /// single-point trajectory.
    pub fn mean_step(&self) -> Vec2 {
        let n = self.points.len();
        if n < 2 {
            return Vec2::ZERO;
        }
        (self.last().pos - self.first().pos) * (1.0 / (n - 1) as f64)
    }

    /// Copy with every position mapped through `f`, keeping timesteps.
    pub fn map_positions(&self, mut f: impl FnMut(Vec2) -> Vec2) -> Trajectory {
        Trajectory {
            points: self
                .points
                .iter()
                .map(|p| TrackPoint { t: p.t, pos: f(p.pos) })
                .collect(),
            dt: self.dt,
        }
    }

    /// Copy with timesteps shifted so the first point has index `start`.
    pub fn reindexed(&self, start: usize) -> Trajectory {
        let t0 = self.points[0].t;
        Trajectory {
            points: self
                .points
                .iter()
                .map(|p| TrackPoint { t: p.t - t0 + start, pos: p.pos })
                .collect(),
            dt: self.dt,
        }
    }

    /// Sub-trajectory with timestep indices in `[t_from, t_to]` (inclusive),
    /// or None if no point falls inside.
    pub fn slice_time(&self, t_from: usize, t_to: usize) -> Option<Trajectory> {
        let pts: Vec<TrackPoint> = self
            .points
            .iter()
            .filter(|p| p.t >= t_from && p.t <= t_to)
            .copied()
            .collect();
        if pts.is_empty() {
            None
        } else {
            Some(Trajectory { points: pts, dt: self.dt })
        }
    }
}

/// Simple polygon obstacle. Vertices are stored in input order; validation
/// rejects polygons with fewer than three vertices, zero area, or
/// self-intersections.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstaclePolygon {
    vertices: Vec<Vec2>,
}

/// Tolerance for on-boundary tests and degenerate-area checks, in meters.
const GEOM_EPS: f64 = 1e-9;

impl ObstaclePolygon {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Geometry(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::Geometry("polygon has non-finite vertex".into()));
        }
        let poly = ObstaclePolygon { vertices };
        if poly.area().abs() <= GEOM_EPS {
            return Err(Error::Geometry("polygon has zero area".into()));
        }
        if !poly.is_simple() {
            return Err(Error::Geometry("polygon is self-intersecting".into()));
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    /// Signed area (shoelace), positive for counter-clockwise order.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            acc += a.cross(b);
        }
        acc * 0.5
    }

    fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let (a1, a2) = (self.vertices[i], self.vertices[(i + 1) % n]);
            for j in (i + 1)..n {
                // Skip edges sharing a vertex.
                if j == i || (j + 1) % n == i || (i + 1) % n == j {
                    continue;
                }
                let (b1, b2) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if segments_properly_intersect(a1, a2, b1, b2) {
                    return false;
                }
            }
        }
        true
    }

    /// Clip against an axis-aligned window rectangle (Sutherland-Hodgman).
    /// Returns None when nothing with positive area survives.
    pub fn clip_to_window(&self, window: &Window) -> Option<ObstaclePolygon> {
        let mut pts = self.vertices.clone();
        // Each half-plane keeps points with keep(p) >= 0.
        let planes: [(fn(Vec2, f64) -> f64, f64); 4] = [
            (|p, _| p.x, 0.0),
            (|p, b| b - p.x, window.length),
            (|p, _| p.y, 0.0),
            (|p, b| b - p.y, window.width),
        ];
        for (side, bound) in planes {
            if pts.is_empty() {
                return None;
            }
            let mut out = Vec::with_capacity(pts.len() + 2);
            for i in 0..pts.len() {
                let cur = pts[i];
                let prev = pts[(i + pts.len() - 1) % pts.len()];
                let dc = side(cur, bound);
                let dp = side(prev, bound);
                if dc >= 0.0 {
                    if dp < 0.0 {
                        out.push(line_crossing(prev, cur, dp, dc));
                    }
                    out.push(cur);
                } else if dp >= 0.0 {
                    out.push(line_crossing(prev, cur, dp, dc));
                }
            }
            pts = out;
        }
        // Remove consecutive duplicates introduced by clipping.
        pts.dedup_by(|a, b| a.distance(*b) <= GEOM_EPS);
        if pts.len() > 1 && pts[0].distance(pts[pts.len() - 1]) <= GEOM_EPS {
            pts.pop();
        }
        if pts.len() < 3 {
            return None;
        }
        ObstaclePolygon::new(pts).ok()
    }
}

fn line_crossing(a: Vec2, b: Vec2, da: f64, db: f64) -> Vec2 {
    let t = da / (da - db);
    a + (b - a) * t
}

fn segments_properly_intersect(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> bool {
    let d1 = (a2 - a1).cross(b1 - a1);
    let d2 = (a2 - a1).cross(b2 - a1);
    let d3 = (b2 - b1).cross(a1 - b1);
    let d4 = (b2 - b1).cross(a2 - b1);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Boundary-inclusive point-in-polygon test (even-odd rule for the interior).
pub fn point_in_polygon(p: Vec2, poly: &ObstaclePolygon) -> bool {
    let verts = poly.vertices();
    let n = verts.len();
    // Boundary check first: point on any edge counts as inside.
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        if point_on_segment(p, a, b) {
            return true;
        }
    }
    // Even-odd ray cast along +x.
    let mut inside = false;
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

fn point_on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    let ab = b - a;
    let ap = p - a;
    if ab.cross(ap).abs() > GEOM_EPS {
        return false;
    }
    let t = ap.dot(ab);
    t >= -GEOM_EPS && t <= ab.dot(ab) + GEOM_EPS
}

/// The local prediction window: `[0, length] x [0, width]` meters, with the
/// agent anchored at `(length/4, width/2)` heading along `+x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub length: f64,
    pub width: f64,
}

impl Window {
    pub fn new(length: f64, width: f64) -> Result<Self> {
        if !(length > 0.0 && width > 0.0) {
            return Err(Error::Config(format!(
                "window dimensions must be positive, got {length} x {width}"
            )));
        }
        Ok(Window { length, width })
    }

    /// Agent anchor: a quarter of the window length from the rear edge,
    /// laterally centered, so most of the window lies ahead of the agent.
    pub fn anchor(&self) -> Vec2 {
        Vec2::new(self.length * 0.25, self.width * 0.5)
    }

    /// Closed containment test.
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= 0.0 && p.x <= self.length && p.y >= 0.0 && p.y <= self.width
    }
}

/// Rigid transform between the scene frame and the local window frame:
/// `local = R(rotation) * scene + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTransform {
    pub rotation: f64,
    pub translation: Vec2,
}

impl FrameTransform {
    pub const IDENTITY: FrameTransform = FrameTransform {
        rotation: 0.0,
        translation: Vec2::ZERO,
    };

    /// Transform mapping `pivot` to `target` and rotating by `rotation`.
    pub fn about(pivot: Vec2, target: Vec2, rotation: f64) -> Self {
        let (s, c) = rotation.sin_cos();
        let rp = Vec2::new(c * pivot.x - s * pivot.y, s * pivot.x + c * pivot.y);
        FrameTransform {
            rotation,
            translation: target - rp,
        }
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        let (s, c) = self.rotation.sin_cos();
        Vec2::new(
            c * p.x - s * p.y + self.translation.x,
            s * p.x + c * p.y + self.translation.y,
        )
    }

    pub fn apply_inverse(&self, p: Vec2) -> Vec2 {
        let q = p - self.translation;
        let (s, c) = self.rotation.sin_cos();
        Vec2::new(c * q.x + s * q.y, -s * q.x + c * q.y)
    }
}

/// Split a trajectory into maximal contiguous runs of points inside the
/// window. Timestep indices are preserved; order is preserved.
pub fn clip_trajectory_to_window(t: &Trajectory, window: &Window) -> Vec<Trajectory> {
    let mut fragments = Vec::new();
    let mut run: Vec<TrackPoint> = Vec::new();
    for p in t.points() {
        if window.contains(p.pos) {
            run.push(*p);
        } else if !run.is_empty() {
            fragments.push(Trajectory {
                points: std::mem::take(&mut run),
                dt: t.dt(),
            });
        }
    }
    if !run.is_empty() {
        fragments.push(Trajectory { points: run, dt: t.dt() });
    }
    fragments
}
