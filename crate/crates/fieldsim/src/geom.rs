//! Planar primitives shared by every layer: vectors, poses, segments.
//!
//! All operations here are pure and deterministic. Angles are radians,
//! normalized to (-pi, pi]; distances are meters.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const TAU: f64 = std::f64::consts::TAU;
pub const PI: f64 = std::f64::consts::PI;

/// Normalize an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

pub const fn vec2(x: f64, y: f64) -> Vec2 {
    Vec2 { x, y }
}

impl Vec2 {
    pub const ZERO: Vec2 = vec2(0.0, 0.0);

    pub fn from_angle(theta: f64) -> Vec2 {
        vec2(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product; positive when `o` is to the left.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Unit vector, or zero if the input is (exactly) zero.
    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n == 0.0 {
            Vec2::ZERO
        } else {
            self / n
        }
    }

    /// Rotate by +90 degrees.
    pub fn perp(self) -> Vec2 {
        vec2(-self.y, self.x)
    }

    pub fn rotated(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        vec2(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        vec2(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        vec2(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        vec2(self.x * k, self.y * k)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, k: f64) -> Vec2 {
        vec2(self.x / k, self.y / k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        vec2(-self.x, -self.y)
    }
}

/// Planar pose: position plus heading in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

pub const fn pose(x: f64, y: f64, theta: f64) -> Pose2D {
    Pose2D { x, y, theta }
}

impl Pose2D {
    pub fn position(self) -> Vec2 {
        vec2(self.x, self.y)
    }

    pub fn heading(self) -> Vec2 {
        Vec2::from_angle(self.theta)
    }

    /// Euclidean position distance, ignoring heading.
    pub fn dist(self, o: Pose2D) -> f64 {
        self.position().dist(o.position())
    }

    /// Position distance plus weighted heading mismatch; used to match
    /// executed motion against planned tree children.
    pub fn weighted_dist(self, o: Pose2D, heading_weight: f64) -> f64 {
        self.dist(o) + heading_weight * wrap_angle(self.theta - o.theta).abs()
    }
}

/// Closed segment between two points. A degenerate segment (a == b) acts
/// as a point for every query below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment2D {
    pub a: Vec2,
    pub b: Vec2,
}

pub const fn seg(a: Vec2, b: Vec2) -> Segment2D {
    Segment2D { a, b }
}

impl Segment2D {
    pub fn length(self) -> f64 {
        self.a.dist(self.b)
    }

    /// Point at parameter t in [0, 1].
    pub fn at(self, t: f64) -> Vec2 {
        self.a + (self.b - self.a) * t
    }

    /// Closest point on the segment to `p`, as a parameter in [0, 1].
    pub fn project(self, p: Vec2) -> f64 {
        let d = self.b - self.a;
        let len_sq = d.norm_sq();
        if len_sq == 0.0 {
            return 0.0;
        }
        ((p - self.a).dot(d) / len_sq).clamp(0.0, 1.0)
    }

    pub fn dist_to_point(self, p: Vec2) -> f64 {
        self.at(self.project(p)).dist(p)
    }
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment_collinear(s: Segment2D, p: Vec2) -> bool {
    p.x >= s.a.x.min(s.b.x)
        && p.x <= s.a.x.max(s.b.x)
        && p.y >= s.a.y.min(s.b.y)
        && p.y <= s.a.y.max(s.b.y)
}

/// Exact segment intersection test, including touching endpoints and
/// collinear overlap.
pub fn segment_intersects(s: Segment2D, t: Segment2D) -> bool {
    let d1 = orient(t.a, t.b, s.a);
    let d2 = orient(t.a, t.b, s.b);
    let d3 = orient(s.a, s.b, t.a);
    let d4 = orient(s.a, s.b, t.b);

    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment_collinear(t, s.a))
        || (d2 == 0.0 && on_segment_collinear(t, s.b))
        || (d3 == 0.0 && on_segment_collinear(s, t.a))
        || (d4 == 0.0 && on_segment_collinear(s, t.b))
}

/// Minimum distance between two segments: exactly 0 iff they intersect,
/// otherwise the least of the four endpoint-to-segment distances.
pub fn segment_clearance(s: Segment2D, t: Segment2D) -> f64 {
    if segment_intersects(s, t) {
        return 0.0;
    }
    let d = [
        t.dist_to_point(s.a),
        t.dist_to_point(s.b),
        s.dist_to_point(t.a),
        s.dist_to_point(t.b),
    ];
    d.into_iter().fold(f64::INFINITY, f64::min)
}

/// Distance from `p` to the nearest point of an open polyline, along with
/// the index of the nearest segment and the parameter on it.
pub fn polyline_nearest(points: &[Vec2], p: Vec2) -> (f64, usize, f64) {
    assert!(!points.is_empty(), "polyline must have at least one point");
    if points.len() == 1 {
        return (points[0].dist(p), 0, 0.0);
    }
    let mut best = (f64::INFINITY, 0usize, 0.0f64);
    for i in 0..points.len() - 1 {
        let s = seg(points[i], points[i + 1]);
        let t = s.project(p);
        let d = s.at(t).dist(p);
        if d < best.0 {
            best = (d, i, t);
        }
    }
    best
}

/// Cumulative arc length of a polyline at each vertex.
pub fn polyline_cumlen(points: &[Vec2]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in points.windows(2) {
        acc += w[0].dist(w[1]);
        out.push(acc);
    }
    out
}

/// Point at arc length `s` along a polyline, clamped to its ends.
pub fn polyline_at(points: &[Vec2], cumlen: &[f64], s: f64) -> Vec2 {
    debug_assert_eq!(points.len(), cumlen.len());
    if s <= 0.0 || points.len() == 1 {
        return points[0];
    }
    let total = *cumlen.last().unwrap();
    if s >= total {
        return *points.last().unwrap();
    }
    let i = match cumlen.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
        Ok(i) => i,
        Err(i) => i - 1,
    };
    let span = cumlen[i + 1] - cumlen[i];
    if span == 0.0 {
        return points[i];
    }
    let t = (s - cumlen[i]) / span;
    seg(points[i], points[i + 1]).at(t)
}
