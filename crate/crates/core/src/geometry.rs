//! Points on the torus, plane vectors and unoriented directions.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;

/// Reduce a coordinate to the half-open representative in `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Representative of `d` modulo 1 closest to zero.
#[inline]
pub fn wrap_delta(d: f64) -> f64 {
    d - d.round()
}

/// A point of T² = R²/Z², stored as its representative in `[0,1)²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    x: f64,
    y: f64,
}

impl TorusPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            x: wrap_unit(x),
            y: wrap_unit(y),
        }
    }

    pub fn from_lift(p: Vec2) -> Self {
        Self::new(p.x, p.y)
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// The representative in the fundamental domain, as a plane vector.
    pub fn lift(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn distance(&self, other: &TorusPoint) -> f64 {
        torus_distance(self.lift(), other.lift())
    }
}

/// Wrap-aware Euclidean distance between the projections of two plane points.
pub fn torus_distance(a: Vec2, b: Vec2) -> f64 {
    let dx = wrap_delta(a.x - b.x);
    let dy = wrap_delta(a.y - b.y);
    dx.hypot(dy)
}

#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Counter-clockwise quarter turn.
#[inline]
pub fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

#[inline]
pub fn unit_from_angle(theta: f64) -> Vec2 {
    let (s, c) = theta.sin_cos();
    Vec2::new(c, s)
}

/// Angle of the line spanned by `v`, in `[0, π)`.
pub fn line_angle(v: Vec2) -> f64 {
    let mut a = v.y.atan2(v.x);
    if a < 0.0 {
        a += PI;
    }
    if a >= PI {
        a -= PI;
    }
    a
}

/// Unsigned angle between the lines spanned by `a` and `b`, in `[0, π/2]`.
pub fn line_angle_between(a: Vec2, b: Vec2) -> f64 {
    let c = (a.dot(&b) / (a.norm() * b.norm())).abs().min(1.0);
    let s = (cross(a, b) / (a.norm() * b.norm())).abs().min(1.0);
    s.atan2(c).min(FRAC_PI_2)
}

/// Unsigned angle between two line angles given mod π, in `[0, π/2]`.
pub fn angle_mod_pi_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Sign convention for direction representatives: positive first coordinate,
/// or positive second coordinate when the first vanishes.
pub fn canonical_sign(v: Vec2) -> Vec2 {
    if v.x > 0.0 || (v.x == 0.0 && v.y > 0.0) {
        v
    } else {
        -v
    }
}

/// Eigenvalues of a real 2×2 matrix when they are real, ordered by modulus
/// (largest first). Complex pairs are reported by their common modulus.
pub fn eigenvalues_2x2(m: &Mat2) -> (f64, f64) {
    let tr = m.trace();
    let det = m.determinant();
    let disc = tr * tr - 4.0 * det;
    if disc < 0.0 {
        let r = det.abs().sqrt();
        return (r, r);
    }
    let sq = disc.sqrt();
    let big = if tr >= 0.0 {
        0.5 * (tr + sq)
    } else {
        0.5 * (tr - sq)
    };
    let small = if big != 0.0 { det / big } else { 0.0 };
    if big.abs() >= small.abs() {
        (big, small)
    } else {
        (small, big)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_unit(1.0), 0.0);
        assert_eq!(wrap_unit(-1e-18), 0.0);
        assert_eq!(wrap_unit(2.25), 0.25);
        assert_eq!(wrap_unit(-0.25), 0.75);
    }

    #[test]
    fn torus_distance_wraps() {
        let a = Vec2::new(0.01, 0.99);
        let b = Vec2::new(0.99, 0.01);
        assert!((torus_distance(a, b) - (0.02f64).hypot(0.02)).abs() < 1e-15);
    }

    #[test]
    fn line_angles() {
        assert!((line_angle(Vec2::new(-1.0, 0.0))).abs() < 1e-15);
        assert!((line_angle(Vec2::new(1.0, -1.0)) - 0.75 * PI).abs() < 1e-15);
        let a = Vec2::new(1.0, 0.618_033_988_749_895);
        let b = Vec2::new(1.0, -0.618_033_988_749_895);
        let expected = (1.0 / 5f64.sqrt()).acos();
        assert!((line_angle_between(a, b) - expected).abs() < 1e-14);
        assert!((angle_mod_pi_distance(0.1, PI - 0.1) - 0.2).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_of_cat_map() {
        let m = Mat2::new(2.0, 1.0, 1.0, 1.0);
        let (a, b) = eigenvalues_2x2(&m);
        assert!((a - 2.618_033_988_749_895).abs() < 1e-14);
        assert!((a * b - 1.0).abs() < 1e-14);
    }
}
