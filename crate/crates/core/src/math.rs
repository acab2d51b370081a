//! Small 2D vector type and float helpers.
//!
//! All transcendental functions go through `libm` so results are identical
//! across platforms and with or without `std`.

use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

pub const PI: f64 = core::f64::consts::PI;
pub const TAU: f64 = core::f64::consts::TAU;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

/// Wrap an angle into `(-PI, PI]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = libm::fmod(a, TAU);
    if r <= -PI {
        r += TAU;
    } else if r > PI {
        r -= TAU;
    }
    r
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector at angle `a` (radians, counter-clockwise from +x).
    #[inline]
    pub fn from_angle(a: f64) -> Self {
        Vec2::new(cos(a), sin(a))
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        sqrt(self.norm_sq())
    }

    #[inline]
    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    #[inline]
    pub fn dist_sq(self, o: Vec2) -> f64 {
        (self - o).norm_sq()
    }

    /// Unit vector in the same direction, or zero for a zero vector.
    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            Vec2::ZERO
        }
    }

    #[inline]
    pub fn angle(self) -> f64 {
        atan2(self.y, self.x)
    }

    /// Rotate counter-clockwise by an angle given as its (cos, sin).
    #[inline]
    pub fn rotate_cs(self, c: f64, s: f64) -> Vec2 {
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    #[inline]
    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Distance from `p` to the closed segment `ab`.
pub fn point_segment_dist(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sq();
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Earliest time at which a pursuer starting at `pursuer` with speed
/// `pursuer_speed` can meet a target starting at `target` moving with constant
/// velocity `target_vel` (constant-bearing intercept). `None` when no
/// non-negative solution exists.
pub fn intercept_time(target: Vec2, target_vel: Vec2, pursuer: Vec2, pursuer_speed: f64) -> Option<f64> {
    // |target + v t - pursuer| = s t
    let r = target - pursuer;
    let a = target_vel.norm_sq() - pursuer_speed * pursuer_speed;
    let b = 2.0 * r.dot(target_vel);
    let c = r.norm_sq();
    if c == 0.0 {
        return Some(0.0);
    }
    if a.abs() < 1e-12 {
        // Equal speeds: linear equation b t + c = 0.
        if b < 0.0 {
            return Some(-c / b);
        }
        return None;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sd = sqrt(disc);
    let t1 = (-b - sd) / (2.0 * a);
    let t2 = (-b + sd) / (2.0 * a);
    let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
    if lo >= 0.0 {
        Some(lo)
    } else if hi >= 0.0 {
        Some(hi)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-12);
        assert!((wrap_angle(-7.0) - (-7.0 + TAU)).abs() < 1e-12);
    }

    #[test]
    fn intercept_head_on() {
        // Target runs straight at the pursuer: closing speed 13.
        let t = intercept_time(Vec2::new(13.0, 0.0), Vec2::new(-8.0, 0.0), Vec2::ZERO, 5.0).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_faster_target_fleeing_is_none() {
        assert!(intercept_time(Vec2::new(10.0, 0.0), Vec2::new(8.0, 0.0), Vec2::ZERO, 5.0).is_none());
    }

    #[test]
    fn intercept_point_is_reachable() {
        let target = Vec2::new(10.0, 5.0);
        let vel = Vec2::new(-1.0, 3.0);
        let p = Vec2::new(-2.0, 1.0);
        let t = intercept_time(target, vel, p, 5.0).unwrap();
        let meet = target + vel * t;
        assert!((meet.dist(p) - 5.0 * t).abs() < 1e-9);
    }

    #[test]
    fn segment_distance() {
        let d = point_segment_dist(Vec2::new(5.0, 3.0), Vec2::ZERO, Vec2::new(10.0, 0.0));
        assert!((d - 3.0).abs() < 1e-12);
        let d = point_segment_dist(Vec2::new(-3.0, 4.0), Vec2::ZERO, Vec2::new(10.0, 0.0));
        assert!((d - 5.0).abs() < 1e-12);
    }
}
