use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Mat2, TorusPoint, Vec2};
use crate::lattice::HyperbolicElement;

use super::leaf::{integrate_leaf_centered, LeafSegment};
use super::line_field::LineField;

/// A point `z′ ∈ W^u(z) ∩ W^s(z)`: `z′ = U(a) = S(b) + k` in the universal
/// cover, where `U` and `S` are the arc-length parametrized leaves through
/// `z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeteroclinicPoint {
    pub k: [i64; 2],
    pub a: f64,
    pub b: f64,
    pub point: TorusPoint,
    /// `U(a)`, the lift reached along the unstable leaf.
    pub via_unstable: Vec2,
    /// `S(b) = U(a) − k`, the lift reached along the stable leaf.
    pub via_stable: Vec2,
    /// `|U(a) − S(b) − k|`.
    pub residual: f64,
}

fn lattice_vectors(radius: i64) -> Vec<[i64; 2]> {
    let mut ks = Vec::new();
    for k0 in -radius..=radius {
        for k1 in -radius..=radius {
            if (k0, k1) != (0, 0) {
                ks.push([k0, k1]);
            }
        }
    }
    ks
}

/// Intersections of the eigenlines through `z`: `a v_u − b v_s = k` for every
/// nonzero `k` with `|k|∞ ≤ radius`.
pub fn heteroclinic_seeds(z: Vec2, e: &HyperbolicElement, radius: i64) -> Vec<HeteroclinicPoint> {
    let m = Mat2::from_columns(&[e.v_u, -e.v_s]);
    let inv = m.try_inverse().expect("eigenvectors are independent");
    lattice_vectors(radius)
        .into_iter()
        .map(|k| {
            let ab = inv * Vec2::new(k[0] as f64, k[1] as f64);
            let via_unstable = z + ab.x * e.v_u;
            let via_stable = z + ab.y * e.v_s;
            HeteroclinicPoint {
                k,
                a: ab.x,
                b: ab.y,
                point: TorusPoint::from_lift(via_unstable),
                via_unstable,
                via_stable,
                residual: (via_unstable - via_stable - Vec2::new(k[0] as f64, k[1] as f64)).norm(),
            }
        })
        .collect()
}

/// Heteroclinic points of the foliation pair `(fu, fs)` through `z`, seeded
/// by the linear model and refined by Newton on `U(a) − S(b) − k = 0` along
/// the integrated leaves. Seeds that fail to refine are returned separately.
pub fn heteroclinic_points(
    z: Vec2,
    e: &HyperbolicElement,
    fu: &LineField,
    fs: &LineField,
    radius: i64,
    step: f64,
) -> Result<(Vec<HeteroclinicPoint>, Vec<Error>)> {
    if !(1..=3).contains(&radius) {
        return Err(Error::InvalidArgument(format!("radius {radius} outside 1..=3")));
    }
    let seeds = heteroclinic_seeds(z, e, radius);
    let max_a = seeds.iter().map(|s| s.a.abs()).fold(0.0, f64::max);
    let max_b = seeds.iter().map(|s| s.b.abs()).fold(0.0, f64::max);
    let wu = integrate_leaf_centered(fu, z, max_a * 1.2 + 0.2, step)?;
    let ws = integrate_leaf_centered(fs, z, max_b * 1.2 + 0.2, step)?;
    let mut found = Vec::new();
    let mut failed = Vec::new();
    for seed in seeds {
        match refine(&wu, &ws, seed) {
            Ok(p) => found.push(p),
            Err(err) => failed.push(err),
        }
    }
    Ok((found, failed))
}

fn refine(wu: &LeafSegment, ws: &LeafSegment, seed: HeteroclinicPoint) -> Result<HeteroclinicPoint> {
    let k = Vec2::new(seed.k[0] as f64, seed.k[1] as f64);
    let (mut a, mut b) = (seed.a, seed.b);
    let fail = |residual: f64| Error::RefinementFailed {
        k1: seed.k[0],
        k2: seed.k[1],
        residual,
    };
    let mut residual = f64::INFINITY;
    for _ in 0..30 {
        let (u, du, _) = wu.eval(a);
        let (s, ds, _) = ws.eval(b);
        let f = u - s - k;
        residual = f.norm();
        if residual < 1e-13 {
            break;
        }
        let j = Mat2::from_columns(&[du, -ds]);
        let step = j.lu().solve(&f).ok_or_else(|| fail(residual))?;
        a -= step.x;
        b -= step.y;
    }
    if !(residual < 1e-10) || !wu.contains_param(a) || !ws.contains_param(b) {
        return Err(fail(residual));
    }
    let via_unstable = wu.point_at(a);
    let via_stable = ws.point_at(b);
    Ok(HeteroclinicPoint {
        k: seed.k,
        a,
        b,
        point: TorusPoint::from_lift(via_unstable),
        via_unstable,
        via_stable,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foliations::leaf::DEFAULT_LEAF_STEP;
    use crate::foliations::line_field::{compute_line_field, FieldLabel};
    use crate::fourier::FourierPerturbation;
    use crate::lattice::IntMatrix2;
    use crate::torus_maps::{ConjugatedMap, Diffeo, SharedMap};
    use std::sync::Arc;

    fn cat() -> HyperbolicElement {
        HyperbolicElement::new(IntMatrix2::new(2, 1, 1, 1).unwrap()).unwrap()
    }

    #[test]
    fn eight_linear_points_at_radius_one() {
        let e = cat();
        let seeds = heteroclinic_seeds(Vec2::zeros(), &e, 1);
        assert_eq!(seeds.len(), 8);
        for s in &seeds {
            assert!(s.residual < 1e-14);
        }
        let fu = LineField::constant(32, e.v_u, FieldLabel::Unstable);
        let fs = LineField::constant(32, e.v_s, FieldLabel::Stable);
        let (pts, failed) = heteroclinic_points(Vec2::zeros(), &e, &fu, &fs, 1, DEFAULT_LEAF_STEP).unwrap();
        assert_eq!(pts.len(), 8);
        assert!(failed.is_empty());
        for (p, s) in pts.iter().zip(&seeds) {
            assert!((p.a - s.a).abs() < 1e-12 && (p.b - s.b).abs() < 1e-12);
        }
    }

    #[test]
    fn nonlinear_points_lie_on_both_leaves() {
        let e = cat();
        let phi = Arc::new(Diffeo::new(FourierPerturbation::sine([0, 1], [0.005, 0.0])).unwrap());
        let g: SharedMap = Arc::new(ConjugatedMap::new(e.matrix, phi));
        let fu = compute_line_field(&g, FieldLabel::Unstable, 128, 20).unwrap();
        let fs = compute_line_field(&g, FieldLabel::Stable, 128, 20).unwrap();
        let z = Vec2::new(0.2, 0.1);
        let (pts, failed) = heteroclinic_points(z, &e, &fu, &fs, 1, DEFAULT_LEAF_STEP).unwrap();
        assert_eq!(pts.len(), 8);
        assert!(failed.is_empty());
        for p in &pts {
            assert!(p.residual < 1e-8);
        }
    }
}
