use crate::error::{Error, Result};
use crate::geometry::{cross, TorusPoint, Vec2};

use super::line_field::{FieldLabel, LineField};

pub const DEFAULT_LEAF_STEP: f64 = 1e-3;

/// Consecutive field directions closer to perpendicular than this are
/// treated as an orientation ambiguity.
const MAX_TURN: f64 = std::f64::consts::FRAC_PI_4;

/// Field direction at `p` with the sign nearest to `heading`.
pub(crate) fn oriented(field: &LineField, p: Vec2, heading: Vec2) -> Result<Vec2> {
    let d = field.direction_at(p);
    let c = d.dot(&heading);
    if c.abs() < MAX_TURN.cos() {
        return Err(Error::SignAmbiguity {
            angle: c.abs().min(1.0).acos(),
        });
    }
    Ok(if c < 0.0 { -d } else { d })
}

/// One classical RK4 step of length `h` along the unit field; returns the new
/// point and the field heading there.
pub(crate) fn rk4_step(field: &LineField, p: Vec2, heading: Vec2, h: f64) -> Result<(Vec2, Vec2)> {
    let k1 = oriented(field, p, heading)?;
    let k2 = oriented(field, p + 0.5 * h * k1, k1)?;
    let k3 = oriented(field, p + 0.5 * h * k2, k2)?;
    let k4 = oriented(field, p + h * k3, k3)?;
    let q = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    let next = oriented(field, q, k4)?;
    Ok((q, next))
}

/// Foot point of a point on a leaf segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub param: f64,
    pub point: Vec2,
    pub tangent: Vec2,
    /// `cross(tangent, p − point)`: positive to the left of the leaf.
    pub signed_distance: f64,
    pub(crate) vertex: usize,
}

/// A leaf curve in the universal cover, parametrized by arc length from its
/// base point and oriented along the field's reference direction.
#[derive(Clone, Debug)]
pub struct LeafSegment {
    base: Vec2,
    params: Vec<f64>,
    lifts: Vec<Vec2>,
    tangents: Vec<Vec2>,
    label: FieldLabel,
}

impl LeafSegment {
    /// Straight segment `base + s·direction`, `s ∈ [lo, hi]`.
    pub fn straight(base: Vec2, direction: Vec2, lo: f64, hi: f64, step: f64, label: FieldLabel) -> Self {
        let d = direction.normalize();
        let lo_k = (lo / step).floor() as i64;
        let hi_k = (hi / step).ceil() as i64;
        let params: Vec<f64> = (lo_k..=hi_k).map(|k| k as f64 * step).collect();
        let lifts = params.iter().map(|&s| base + s * d).collect();
        let tangents = vec![d; params.len()];
        Self {
            base,
            params,
            lifts,
            tangents,
            label,
        }
    }

    pub fn base(&self) -> Vec2 {
        self.base
    }

    pub fn base_point(&self) -> TorusPoint {
        TorusPoint::from_lift(self.base)
    }

    pub fn label(&self) -> FieldLabel {
        self.label
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn lifts(&self) -> &[Vec2] {
        &self.lifts
    }

    pub fn tangents(&self) -> &[Vec2] {
        &self.tangents
    }

    pub fn param_range(&self) -> (f64, f64) {
        (self.params[0], *self.params.last().unwrap())
    }

    pub fn contains_param(&self, s: f64) -> bool {
        let (lo, hi) = self.param_range();
        s >= lo && s <= hi
    }

    fn segment(&self, s: f64) -> usize {
        let k = self.params.partition_point(|&v| v <= s);
        k.clamp(1, self.params.len() - 1) - 1
    }

    /// Point, first and second derivative of the cubic Hermite curve through
    /// the vertices; beyond the ends the curve continues along the end
    /// tangent.
    pub fn eval(&self, s: f64) -> (Vec2, Vec2, Vec2) {
        let (lo, hi) = self.param_range();
        if s < lo {
            let t = self.tangents[0];
            return (self.lifts[0] + (s - lo) * t, t, Vec2::zeros());
        }
        if s > hi {
            let last = self.params.len() - 1;
            let t = self.tangents[last];
            return (self.lifts[last] + (s - hi) * t, t, Vec2::zeros());
        }
        let k = self.segment(s);
        let h = self.params[k + 1] - self.params[k];
        let u = (s - self.params[k]) / h;
        let (p0, p1) = (self.lifts[k], self.lifts[k + 1]);
        let (m0, m1) = (self.tangents[k] * h, self.tangents[k + 1] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        let p = (2.0 * u3 - 3.0 * u2 + 1.0) * p0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * p1
            + (u3 - u2) * m1;
        let dp = (6.0 * u2 - 6.0 * u) * p0
            + (3.0 * u2 - 4.0 * u + 1.0) * m0
            + (-6.0 * u2 + 6.0 * u) * p1
            + (3.0 * u2 - 2.0 * u) * m1;
        let ddp = (12.0 * u - 6.0) * p0
            + (6.0 * u - 4.0) * m0
            + (-12.0 * u + 6.0) * p1
            + (6.0 * u - 2.0) * m1;
        (p, dp / h, ddp / (h * h))
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        self.eval(s).0
    }

    pub fn tangent_at(&self, s: f64) -> Vec2 {
        self.eval(s).1.normalize()
    }

    fn nearest_vertex(&self, p: Vec2, hint: Option<usize>) -> usize {
        let dist = |i: usize| (self.lifts[i] - p).norm_squared();
        match hint {
            Some(mut i) if i < self.lifts.len() => {
                loop {
                    let here = dist(i);
                    if i > 0 && dist(i - 1) < here {
                        i -= 1;
                    } else if i + 1 < self.lifts.len() && dist(i + 1) < here {
                        i += 1;
                    } else {
                        return i;
                    }
                }
            }
            _ => (0..self.lifts.len())
                .min_by(|&a, &b| dist(a).total_cmp(&dist(b)))
                .unwrap(),
        }
    }

    /// Orthogonal projection of a lifted point onto the curve.
    pub fn project(&self, p: Vec2) -> Projection {
        self.project_near(p, None)
    }

    /// Projection starting the vertex search from `hint` (local descent).
    pub fn project_near(&self, p: Vec2, hint: Option<usize>) -> Projection {
        let vertex = self.nearest_vertex(p, hint);
        let mut s = self.params[vertex];
        for _ in 0..40 {
            let (c, dc, ddc) = self.eval(s);
            let r = c - p;
            let f = r.dot(&dc);
            let df = dc.norm_squared() + r.dot(&ddc);
            if df <= 0.0 {
                break;
            }
            let ds = f / df;
            s -= ds;
            if ds.abs() <= 1e-15 * (1.0 + s.abs()) {
                break;
            }
        }
        let (c, dc, _) = self.eval(s);
        let t = dc.normalize();
        Projection {
            param: s,
            point: c,
            tangent: t,
            signed_distance: cross(t, p - c),
            vertex,
        }
    }

    /// Projection of a torus point, choosing the integer translate of its
    /// representative that lies closest to the curve.
    pub fn project_torus(&self, x: TorusPoint) -> Projection {
        let p = x.lift();
        let mut best: Option<(f64, Vec2)> = None;
        for i in -3..=3 {
            for j in -3..=3 {
                let q = p + Vec2::new(i as f64, j as f64);
                let v = self.nearest_vertex(q, None);
                let d = (self.lifts[v] - q).norm();
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, q));
                }
            }
        }
        self.project(best.unwrap().1)
    }

    /// Max over polyline steps of the angle between the chord and the field
    /// at the chord midpoint.
    pub fn tangency_error(&self, field: &LineField) -> f64 {
        self.lifts
            .windows(2)
            .map(|w| {
                let chord = w[1] - w[0];
                crate::geometry::line_angle_between(chord, field.direction_at(0.5 * (w[0] + w[1])))
            })
            .fold(0.0, f64::max)
    }

    /// Relative spread of consecutive vertex distances.
    pub fn spacing_nonuniformity(&self) -> f64 {
        let d: Vec<f64> = self.lifts.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        d.iter().map(|x| (x - mean).abs() / mean).fold(0.0, f64::max)
    }

    /// CSV polyline `(s, x, y, lift_x, lift_y)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,x,y,lift_x,lift_y\n");
        for (s, p) in self.params.iter().zip(&self.lifts) {
            let t = TorusPoint::from_lift(*p);
            out.push_str(&format!("{s},{},{},{},{}\n", t.x(), t.y(), p.x, p.y));
        }
        out
    }
}

fn march(field: &LineField, base: Vec2, length: f64, step: f64) -> Result<(Vec<Vec2>, Vec<Vec2>, f64)> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("leaf step {step} must be positive")));
    }
    let steps = ((length.abs() / step).ceil() as usize).max(1);
    let h = length.abs() / steps as f64;
    let start = field.direction_at(base);
    let mut heading = if length < 0.0 { -start } else { start };
    let mut p = base;
    let mut pts = vec![p];
    let mut heads = vec![heading];
    for _ in 0..steps {
        let (q, hd) = rk4_step(field, p, heading, h)?;
        p = q;
        heading = hd;
        pts.push(p);
        heads.push(heading);
    }
    Ok((pts, heads, h))
}

/// Integrates the leaf of `field` through `x` for signed arc length `length`
/// with fixed RK4 steps of at most `step`.
pub fn integrate_leaf(field: &LineField, x: TorusPoint, length: f64, step: f64) -> Result<LeafSegment> {
    integrate_leaf_from(field, x.lift(), length, step)
}

/// As [`integrate_leaf`], starting from a point of the universal cover.
pub fn integrate_leaf_from(field: &LineField, base: Vec2, length: f64, step: f64) -> Result<LeafSegment> {
    let (mut pts, mut heads, h) = march(field, base, length, step)?;
    let n = pts.len();
    let mut params: Vec<f64> = (0..n).map(|k| k as f64 * h).collect();
    if length < 0.0 {
        pts.reverse();
        heads.reverse();
        params = params.into_iter().rev().map(|s| -s).collect();
        heads.iter_mut().for_each(|t| *t = -*t);
    }
    Ok(LeafSegment {
        base,
        params,
        lifts: pts,
        tangents: heads,
        label: field.label(),
    })
}

/// Leaf through `base` covering arc length `[-half, half]`.
pub fn integrate_leaf_centered(field: &LineField, base: Vec2, half: f64, step: f64) -> Result<LeafSegment> {
    let back = integrate_leaf_from(field, base, -half, step)?;
    let fwd = integrate_leaf_from(field, base, half, step)?;
    let mut params = back.params;
    let mut lifts = back.lifts;
    let mut tangents = back.tangents;
    params.pop();
    lifts.pop();
    tangents.pop();
    params.extend(fwd.params);
    lifts.extend(fwd.lifts);
    tangents.extend(fwd.tangents);
    Ok(LeafSegment {
        base,
        params,
        lifts,
        tangents,
        label: field.label(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::FourierPerturbation;
    use crate::foliations::line_field::compute_line_field;
    use crate::lattice::{HyperbolicElement, IntMatrix2};
    use crate::torus_maps::{PerturbedMap, SharedMap};
    use std::sync::Arc;

    fn cat() -> HyperbolicElement {
        HyperbolicElement::new(IntMatrix2::new(2, 1, 1, 1).unwrap()).unwrap()
    }

    #[test]
    fn linear_leaf_is_a_line() {
        let e = cat();
        let f = LineField::constant(32, e.v_u, FieldLabel::Unstable);
        let x = TorusPoint::new(0.3, 0.2);
        let leaf = integrate_leaf(&f, x, 1.0, DEFAULT_LEAF_STEP).unwrap();
        let dev = leaf
            .lifts()
            .iter()
            .map(|p| cross(e.v_u, p - x.lift()).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-10);
        assert!((leaf.param_range().1 - 1.0).abs() < 1e-15);
        assert!(leaf.spacing_nonuniformity() < 1e-9);
    }

    #[test]
    fn reversal_returns_to_start() {
        let e = cat();
        let g: SharedMap = Arc::new(PerturbedMap::new(&e, FourierPerturbation::sine([0, 1], [0.005, 0.0])));
        let f = compute_line_field(&g, FieldLabel::Unstable, 64, 20).unwrap();
        let x = TorusPoint::new(0.41, 0.73);
        let fwd = integrate_leaf(&f, x, 0.5, DEFAULT_LEAF_STEP).unwrap();
        let end = *fwd.lifts().last().unwrap();
        let back = integrate_leaf_from(&f, end, -0.5, DEFAULT_LEAF_STEP).unwrap();
        assert!((back.lifts()[0] - x.lift()).norm() < 1e-9);
        assert!(fwd.tangency_error(&f) < 1e-4);
        assert!(fwd.spacing_nonuniformity() < 0.01);
    }

    #[test]
    fn unstable_leaves_are_forward_invariant() {
        let e = cat();
        let g: SharedMap = Arc::new(PerturbedMap::new(&e, FourierPerturbation::sine([0, 1], [0.005, 0.0])));
        let f = compute_line_field(&g, FieldLabel::Unstable, 256, 20).unwrap();
        let x = Vec2::new(0.41, 0.73);
        let short = integrate_leaf_from(&f, x, 0.4 / e.lambda_u, DEFAULT_LEAF_STEP).unwrap();
        let image_leaf = integrate_leaf_from(&f, g.lift(x), 0.5, DEFAULT_LEAF_STEP).unwrap();
        let mut worst: f64 = 0.0;
        for p in short.lifts() {
            let q = g.lift(*p);
            worst = worst.max(image_leaf.project(q).signed_distance.abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn projection_recovers_parameter() {
        let e = cat();
        let f = LineField::constant(32, e.v_u, FieldLabel::Unstable);
        let leaf = integrate_leaf_centered(&f, Vec2::new(0.1, 0.1), 0.3, DEFAULT_LEAF_STEP).unwrap();
        let p = Vec2::new(0.1, 0.1) + 0.1234 * e.v_u + 0.01 * e.v_s;
        let pr = leaf.project(p);
        assert!((pr.param - 0.1234).abs() < 1e-13);
        assert!((pr.signed_distance.abs() - 0.01).abs() < 1e-13);
        let far = leaf.project(Vec2::new(0.1, 0.1) + 0.5 * e.v_u);
        assert!((far.param - 0.5).abs() < 1e-12);
        let wrapped = leaf.project_torus(TorusPoint::from_lift(Vec2::new(0.1, 0.1) - 0.2 * e.v_u));
        assert!((wrapped.param + 0.2).abs() < 1e-12);
    }
}
