//! Exact 2D geometry on obstacles.
//!
//! Rectangles, crosses and L-shapes decompose into at most three oriented
//! rectangles; cylinders are circles. Every query here is exact (no
//! sampling): point containment, point and segment distance, segment
//! intersection and ray casting against obstacles inflated by a radius.

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::math::{cos, point_segment_dist, sin, sqrt, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ShapeKind {
    Cross,
    Rectangle,
    LShape,
    Cylinder,
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShapeKind::Cross => "Cross",
            ShapeKind::Rectangle => "Rectangle",
            ShapeKind::LShape => "LShape",
            ShapeKind::Cylinder => "Cylinder",
        })
    }
}

impl FromStr for ShapeKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cross" => Ok(ShapeKind::Cross),
            "rectangle" | "rect" => Ok(ShapeKind::Rectangle),
            "lshape" | "l-shape" | "l" => Ok(ShapeKind::LShape),
            "cylinder" | "circle" => Ok(ShapeKind::Cylinder),
            _ => Err(()),
        }
    }
}

/// Per-shape dimensions in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ShapeSize {
    Cylinder { radius: f64 },
    Rectangle { length: f64, width: f64 },
    Cross { span: f64, thickness: f64 },
    LShape { leg_x: f64, leg_y: f64, thickness: f64 },
}

impl ShapeSize {
    pub fn kind(&self) -> ShapeKind {
        match self {
            ShapeSize::Cylinder { .. } => ShapeKind::Cylinder,
            ShapeSize::Rectangle { .. } => ShapeKind::Rectangle,
            ShapeSize::Cross { .. } => ShapeKind::Cross,
            ShapeSize::LShape { .. } => ShapeKind::LShape,
        }
    }
}

/// Rectangle with arbitrary orientation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedRect {
    pub center: Vec2,
    pub half: Vec2,
    cos: f64,
    sin: f64,
}

impl OrientedRect {
    pub fn new(center: Vec2, half: Vec2, yaw: f64) -> Self {
        OrientedRect { center, half, cos: cos(yaw), sin: sin(yaw) }
    }

    #[inline]
    fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.center).rotate_cs(self.cos, -self.sin)
    }

    #[inline]
    fn to_world(&self, p: Vec2) -> Vec2 {
        p.rotate_cs(self.cos, self.sin) + self.center
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let (hx, hy) = (self.half.x, self.half.y);
        [
            self.to_world(Vec2::new(-hx, -hy)),
            self.to_world(Vec2::new(hx, -hy)),
            self.to_world(Vec2::new(hx, hy)),
            self.to_world(Vec2::new(-hx, hy)),
        ]
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.half.x && l.y.abs() <= self.half.y
    }

    pub fn distance(&self, p: Vec2) -> f64 {
        let l = self.to_local(p);
        let dx = (l.x.abs() - self.half.x).max(0.0);
        let dy = (l.y.abs() - self.half.y).max(0.0);
        sqrt(dx * dx + dy * dy)
    }

    pub fn segment_intersects(&self, p: Vec2, q: Vec2) -> bool {
        let a = self.to_local(p);
        let b = self.to_local(q);
        clip_box(a, b - a, self.half.x, self.half.y, 0.0, 1.0).is_some()
    }

    pub fn segment_distance(&self, p: Vec2, q: Vec2) -> f64 {
        if self.segment_intersects(p, q) {
            return 0.0;
        }
        let mut d = self.distance(p).min(self.distance(q));
        for c in self.corners() {
            d = d.min(point_segment_dist(c, p, q));
        }
        d
    }

    /// First `t` in `[0, max_t]` with `distance(p + t u) <= inflate`.
    pub fn ray_entry(&self, p: Vec2, u: Vec2, inflate: f64, max_t: f64) -> Option<f64> {
        let a = self.to_local(p);
        let d = u.rotate_cs(self.cos, -self.sin);
        let (hx, hy) = (self.half.x, self.half.y);
        if inflate <= 0.0 {
            return clip_box(a, d, hx, hy, 0.0, max_t).map(|(t0, _)| t0);
        }
        let mut best: Option<f64> = None;
        let mut take = |t: Option<f64>| {
            if let Some(t) = t {
                best = Some(best.map_or(t, |b: f64| b.min(t)));
            }
        };
        take(clip_box(a, d, hx + inflate, hy, 0.0, max_t).map(|(t0, _)| t0));
        take(clip_box(a, d, hx, hy + inflate, 0.0, max_t).map(|(t0, _)| t0));
        for (cx, cy) in [(hx, hy), (-hx, hy), (hx, -hy), (-hx, -hy)] {
            take(ray_circle(a, d, Vec2::new(cx, cy), inflate, max_t));
        }
        best
    }
}

/// Liang–Barsky clip of `a + t d`, `t ∈ [t0, t1]`, against the centered box
/// `[-hx, hx] × [-hy, hy]`. Returns the clipped parameter interval.
fn clip_box(a: Vec2, d: Vec2, hx: f64, hy: f64, mut t0: f64, mut t1: f64) -> Option<(f64, f64)> {
    for (p, q) in [(-d.x, a.x + hx), (d.x, hx - a.x), (-d.y, a.y + hy), (d.y, hy - a.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                if r > t1 {
                    return None;
                }
                if r > t0 {
                    t0 = r;
                }
            } else {
                if r < t0 {
                    return None;
                }
                if r < t1 {
                    t1 = r;
                }
            }
        }
    }
    Some((t0, t1))
}

/// First `t ∈ [0, max_t]` where the ray `p + t u` is within `r` of `c`.
fn ray_circle(p: Vec2, u: Vec2, c: Vec2, r: f64, max_t: f64) -> Option<f64> {
    let m = p - c;
    let cc = m.norm_sq() - r * r;
    if cc <= 0.0 {
        return Some(0.0);
    }
    let a = u.norm_sq();
    if a == 0.0 {
        return None;
    }
    let b = m.dot(u);
    if b >= 0.0 {
        return None;
    }
    let disc = b * b - a * cc;
    if disc < 0.0 {
        return None;
    }
    let t = (-b - sqrt(disc)) / a;
    (t <= max_t).then_some(t.max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Part {
    Rect(OrientedRect),
    Circle { center: Vec2, radius: f64 },
}

impl Part {
    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Part::Rect(r) => r.contains(p),
            Part::Circle { center, radius } => p.dist_sq(*center) <= radius * radius,
        }
    }

    pub fn distance(&self, p: Vec2) -> f64 {
        match self {
            Part::Rect(r) => r.distance(p),
            Part::Circle { center, radius } => (p.dist(*center) - radius).max(0.0),
        }
    }

    pub fn segment_intersects(&self, p: Vec2, q: Vec2) -> bool {
        match self {
            Part::Rect(r) => r.segment_intersects(p, q),
            Part::Circle { center, radius } => point_segment_dist(*center, p, q) <= *radius,
        }
    }

    pub fn segment_distance(&self, p: Vec2, q: Vec2) -> f64 {
        match self {
            Part::Rect(r) => r.segment_distance(p, q),
            Part::Circle { center, radius } => (point_segment_dist(*center, p, q) - radius).max(0.0),
        }
    }

    pub fn ray_entry(&self, p: Vec2, u: Vec2, inflate: f64, max_t: f64) -> Option<f64> {
        match self {
            Part::Rect(r) => r.ray_entry(p, u, inflate, max_t),
            Part::Circle { center, radius } => ray_circle(p, u, *center, radius + inflate, max_t),
        }
    }

    /// Minimum distance between two parts (0 when they overlap).
    pub fn part_distance(&self, other: &Part) -> f64 {
        match (self, other) {
            (Part::Circle { center: a, radius: ra }, Part::Circle { center: b, radius: rb }) => {
                (a.dist(*b) - ra - rb).max(0.0)
            }
            (Part::Rect(r), Part::Circle { center, radius }) | (Part::Circle { center, radius }, Part::Rect(r)) => {
                (r.distance(*center) - radius).max(0.0)
            }
            (Part::Rect(a), Part::Rect(b)) => {
                let ca = a.corners();
                let cb = b.corners();
                let mut d = f64::INFINITY;
                for i in 0..4 {
                    let (p, q) = (ca[i], ca[(i + 1) % 4]);
                    d = d.min(b.segment_distance(p, q));
                    let (p, q) = (cb[i], cb[(i + 1) % 4]);
                    d = d.min(a.segment_distance(p, q));
                }
                if a.contains(b.center) || b.contains(a.center) {
                    0.0
                } else {
                    d
                }
            }
        }
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Vec2, Vec2) {
        match self {
            Part::Circle { center, radius } => {
                (Vec2::new(center.x - radius, center.y - radius), Vec2::new(center.x + radius, center.y + radius))
            }
            Part::Rect(r) => {
                let cs = r.corners();
                let mut lo = cs[0];
                let mut hi = cs[0];
                for c in &cs[1..] {
                    lo = Vec2::new(lo.x.min(c.x), lo.y.min(c.y));
                    hi = Vec2::new(hi.x.max(c.x), hi.y.max(c.y));
                }
                (lo, hi)
            }
        }
    }
}

/// Wire form of an obstacle; parts are derived from it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    pub center: Vec2,
    pub yaw: f64,
    pub size: ShapeSize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "ObstacleSpec", into = "ObstacleSpec")]
pub struct Obstacle {
    pub center: Vec2,
    pub yaw: f64,
    pub size: ShapeSize,
    parts: [Option<Part>; 3],
}

impl From<ObstacleSpec> for Obstacle {
    fn from(s: ObstacleSpec) -> Self {
        Obstacle::new(s.center, s.yaw, s.size)
    }
}

impl From<Obstacle> for ObstacleSpec {
    fn from(o: Obstacle) -> Self {
        ObstacleSpec { center: o.center, yaw: o.yaw, size: o.size }
    }
}

impl Obstacle {
    pub fn new(center: Vec2, yaw: f64, size: ShapeSize) -> Self {
        let rect = |c: Vec2, hx: f64, hy: f64| {
            let (cs, sn) = (cos(yaw), sin(yaw));
            Some(Part::Rect(OrientedRect::new(center + c.rotate_cs(cs, sn), Vec2::new(hx, hy), yaw)))
        };
        let parts = match size {
            ShapeSize::Cylinder { radius } => [Some(Part::Circle { center, radius }), None, None],
            ShapeSize::Rectangle { length, width } => [rect(Vec2::ZERO, length / 2.0, width / 2.0), None, None],
            ShapeSize::Cross { span, thickness } => [
                rect(Vec2::ZERO, span / 2.0, thickness / 2.0),
                rect(Vec2::ZERO, thickness / 2.0, span / 2.0),
                None,
            ],
            ShapeSize::LShape { leg_x, leg_y, thickness } => [
                // Bounding box centered on `center`; legs run along its
                // bottom and left edges.
                rect(Vec2::new(0.0, -leg_y / 2.0 + thickness / 2.0), leg_x / 2.0, thickness / 2.0),
                rect(Vec2::new(-leg_x / 2.0 + thickness / 2.0, 0.0), thickness / 2.0, leg_y / 2.0),
                None,
            ],
        };
        Obstacle { center, yaw, size, parts }
    }

    pub fn kind(&self) -> ShapeKind {
        self.size.kind()
    }

    pub fn parts(&self) -> impl Iterator<Item = &Part> + '_ {
        self.parts.iter().flatten()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.parts().any(|part| part.contains(p))
    }

    pub fn distance(&self, p: Vec2) -> f64 {
        self.parts().map(|part| part.distance(p)).fold(f64::INFINITY, f64::min)
    }

    /// True iff the closed segment `pq` meets the obstacle's closed region.
    pub fn segment_intersects(&self, p: Vec2, q: Vec2) -> bool {
        self.parts().any(|part| part.segment_intersects(p, q))
    }

    pub fn segment_distance(&self, p: Vec2, q: Vec2) -> f64 {
        self.parts().map(|part| part.segment_distance(p, q)).fold(f64::INFINITY, f64::min)
    }

    /// Segment against the obstacle grown by `inflate` meters.
    pub fn segment_intersects_inflated(&self, p: Vec2, q: Vec2, inflate: f64) -> bool {
        if inflate <= 0.0 {
            self.segment_intersects(p, q)
        } else {
            self.segment_distance(p, q) <= inflate
        }
    }

    pub fn ray_entry(&self, p: Vec2, u: Vec2, inflate: f64, max_t: f64) -> Option<f64> {
        self.parts().filter_map(|part| part.ray_entry(p, u, inflate, max_t)).reduce(f64::min)
    }

    pub fn obstacle_distance(&self, other: &Obstacle) -> f64 {
        let mut d = f64::INFINITY;
        for a in self.parts() {
            for b in other.parts() {
                d = d.min(a.part_distance(b));
            }
        }
        d
    }

    pub fn bounds(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for part in self.parts() {
            let (a, b) = part.bounds();
            lo = Vec2::new(lo.x.min(a.x), lo.y.min(a.y));
            hi = Vec2::new(hi.x.max(b.x), hi.y.max(b.y));
        }
        (lo, hi)
    }
}

/// True iff segment `pq` intersects the obstacle's closed region.
pub fn segment_intersects_obstacle(p: Vec2, q: Vec2, obstacle: &Obstacle) -> bool {
    obstacle.segment_intersects(p, q)
}

/// Line-of-sight visibility within `range` (full 360° sensing).
pub fn visible(from: Vec2, target: Vec2, obstacles: &[Obstacle], range: f64) -> bool {
    from.dist_sq(target) <= range * range && !obstacles.iter().any(|o| o.segment_intersects(from, target))
}

/// Distance along the unit ray `p + t u` to the square arena's boundary.
pub fn wall_distance(p: Vec2, u: Vec2, side: f64) -> f64 {
    let mut t = f64::INFINITY;
    if u.x > 0.0 {
        t = t.min((side - p.x) / u.x);
    } else if u.x < 0.0 {
        t = t.min(-p.x / u.x);
    }
    if u.y > 0.0 {
        t = t.min((side - p.y) / u.y);
    } else if u.y < 0.0 {
        t = t.min(-p.y / u.y);
    }
    t.max(0.0)
}

/// Free distance along a unit ray before touching any obstacle inflated by
/// `inflate`, capped at `max_t`.
pub fn obstacle_ray_distance(p: Vec2, u: Vec2, obstacles: &[Obstacle], inflate: f64, max_t: f64) -> f64 {
    obstacles.iter().filter_map(|o| o.ray_entry(p, u, inflate, max_t)).fold(max_t, f64::min)
}

pub fn in_arena(p: Vec2, side: f64) -> bool {
    p.x >= 0.0 && p.y >= 0.0 && p.x <= side && p.y <= side
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::PI;

    fn cyl(x: f64, y: f64, r: f64) -> Obstacle {
        Obstacle::new(Vec2::new(x, y), 0.0, ShapeSize::Cylinder { radius: r })
    }

    #[test]
    fn segment_through_cylinder_center() {
        assert!(segment_intersects_obstacle(Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), &cyl(5.0, 0.0, 1.0)));
    }

    #[test]
    fn segment_misses_far_cylinder() {
        assert!(!segment_intersects_obstacle(Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), &cyl(5.0, 5.0, 1.0)));
    }

    #[test]
    fn rotated_rectangle_containment() {
        let r = Obstacle::new(Vec2::new(10.0, 10.0), PI / 4.0, ShapeSize::Rectangle { length: 8.0, width: 2.0 });
        // Along the rotated long axis.
        assert!(r.contains(Vec2::new(10.0 + 2.5, 10.0 + 2.5)));
        // Along the unrotated x axis, beyond the half-width.
        assert!(!r.contains(Vec2::new(13.0, 10.0)));
    }

    #[test]
    fn lshape_parts_cover_bounding_box_edges() {
        let l = Obstacle::new(Vec2::new(0.0, 0.0), 0.0, ShapeSize::LShape { leg_x: 6.0, leg_y: 4.0, thickness: 1.0 });
        assert!(l.contains(Vec2::new(2.9, -1.9)));
        assert!(l.contains(Vec2::new(-2.9, 1.9)));
        assert!(!l.contains(Vec2::new(1.0, 1.0)));
        let (lo, hi) = l.bounds();
        assert!((lo.x + 3.0).abs() < 1e-12 && (hi.x - 3.0).abs() < 1e-12);
        assert!((lo.y + 2.0).abs() < 1e-12 && (hi.y - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cross_is_two_bars() {
        let c = Obstacle::new(Vec2::new(0.0, 0.0), 0.0, ShapeSize::Cross { span: 6.0, thickness: 1.0 });
        assert!(c.contains(Vec2::new(2.9, 0.0)));
        assert!(c.contains(Vec2::new(0.0, -2.9)));
        assert!(!c.contains(Vec2::new(2.0, 2.0)));
    }

    #[test]
    fn visibility_examples() {
        let from = Vec2::new(10.0, 10.0);
        assert!(!visible(from, Vec2::new(27.0, 10.0), &[], 16.0));
        assert!(visible(from, Vec2::new(20.0, 10.0), &[], 16.0));
        assert!(!visible(from, Vec2::new(20.0, 10.0), &[cyl(15.0, 10.0, 1.0)], 16.0));
    }

    #[test]
    fn rect_ray_entry_inflated() {
        let r = Obstacle::new(Vec2::new(10.0, 0.0), 0.0, ShapeSize::Rectangle { length: 2.0, width: 2.0 });
        let t = r.ray_entry(Vec2::ZERO, Vec2::new(1.0, 0.0), 0.5, 100.0).unwrap();
        assert!((t - 8.5).abs() < 1e-12);
        let t = r.ray_entry(Vec2::ZERO, Vec2::new(1.0, 0.0), 0.0, 100.0).unwrap();
        assert!((t - 9.0).abs() < 1e-12);
        // Grazing past the rounded corner: ray along y = 1.4 passes within
        // 0.4 of the corner (9, 1)... and enters the inflated region.
        let t = r.ray_entry(Vec2::new(0.0, 1.4), Vec2::new(1.0, 0.0), 0.5, 100.0).unwrap();
        let expect = 9.0 - sqrt(0.25 - 0.16);
        assert!((t - expect).abs() < 1e-9, "{t} vs {expect}");
        assert!(r.ray_entry(Vec2::new(0.0, 1.6), Vec2::new(1.0, 0.0), 0.5, 100.0).is_none());
        assert!(r.ray_entry(Vec2::ZERO, Vec2::new(1.0, 0.0), 0.5, 5.0).is_none());
    }

    #[test]
    fn wall_distance_axis() {
        assert!((wall_distance(Vec2::new(10.0, 20.0), Vec2::new(-1.0, 0.0), 50.0) - 10.0).abs() < 1e-12);
        let u = Vec2::new(1.0, 1.0).normalized();
        assert!((wall_distance(Vec2::new(45.0, 10.0), u, 50.0) - 5.0 * sqrt(2.0)).abs() < 1e-9);
    }

    #[test]
    fn part_distances() {
        let a = Obstacle::new(Vec2::new(0.0, 0.0), 0.0, ShapeSize::Rectangle { length: 2.0, width: 2.0 });
        let b = Obstacle::new(Vec2::new(5.0, 0.0), 0.0, ShapeSize::Rectangle { length: 2.0, width: 2.0 });
        assert!((a.obstacle_distance(&b) - 3.0).abs() < 1e-12);
        let c = cyl(0.0, 6.0, 1.0);
        assert!((a.obstacle_distance(&c) - 4.0).abs() < 1e-12);
        let d = Obstacle::new(Vec2::new(0.5, 0.5), 0.3, ShapeSize::Rectangle { length: 0.5, width: 0.5 });
        assert_eq!(a.obstacle_distance(&d), 0.0);
    }

    #[test]
    fn obstacle_serde_rebuilds_parts() {
        let o = Obstacle::new(Vec2::new(3.0, 4.0), 0.7, ShapeSize::Cross { span: 6.0, thickness: 1.5 });
        let spec: ObstacleSpec = o.clone().into();
        let back: Obstacle = spec.into();
        assert_eq!(o, back);
    }
}
