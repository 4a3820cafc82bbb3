use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_mod_pi_distance, line_angle, line_angle_between, TorusPoint, Vec2};
use crate::interp::bicubic_periodic;
use crate::lattice::HyperbolicElement;
use crate::torus_maps::SharedMap;

/// Angular change between the last two push-forward depths that counts as
/// converged.
pub const FIELD_CONVERGENCE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldLabel {
    Stable,
    Unstable,
}

/// Unoriented direction field on an `N × N` grid, stored as angles mod π.
#[derive(Clone)]
pub struct LineField {
    n: usize,
    angles: Vec<f64>,
    doubled: Vec<Vec2>,
    label: FieldLabel,
    reference: Vec2,
    convergence: f64,
    owner: Option<SharedMap>,
}

impl std::fmt::Debug for LineField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LineField")
            .field("n", &self.n)
            .field("label", &self.label)
            .field("reference", &self.reference)
            .field("convergence", &self.convergence)
            .finish()
    }
}

impl LineField {
    fn from_angles(
        n: usize,
        angles: Vec<f64>,
        label: FieldLabel,
        reference: Vec2,
        convergence: f64,
        owner: Option<SharedMap>,
    ) -> Self {
        let doubled = angles
            .iter()
            .map(|&t| Vec2::new((2.0 * t).cos(), (2.0 * t).sin()))
            .collect();
        Self {
            n,
            angles,
            doubled,
            label,
            reference: reference.normalize(),
            convergence,
            owner,
        }
    }

    /// A constant field, e.g. an eigen-direction of a linear map.
    pub fn constant(n: usize, direction: Vec2, label: FieldLabel) -> Self {
        let theta = line_angle(direction);
        Self::from_angles(n, vec![theta; n * n], label, direction, 0.0, None)
    }

    pub fn grid_size(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> FieldLabel {
        self.label
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Orientation used when a unit vector is returned.
    pub fn reference(&self) -> Vec2 {
        self.reference
    }

    /// Angular change between the last two push-forward depths.
    pub fn convergence(&self) -> f64 {
        self.convergence
    }

    pub fn owner(&self) -> Option<&SharedMap> {
        self.owner.as_ref()
    }

    pub fn angle_at_node(&self, i: usize, j: usize) -> f64 {
        self.angles[(i % self.n) * self.n + (j % self.n)]
    }

    /// Unit direction at `p`, interpolated bicubically through doubled angles
    /// and oriented to agree with the reference direction.
    pub fn direction_at(&self, p: Vec2) -> Vec2 {
        let v = bicubic_periodic(&self.doubled, self.n, p);
        let theta = 0.5 * v.y.atan2(v.x);
        let d = Vec2::new(theta.cos(), theta.sin());
        if d.dot(&self.reference) < 0.0 {
            -d
        } else {
            d
        }
    }

    /// Max over grid points of the angle between `Dg(x)·E(x)` and `E(g(x))`.
    pub fn invariance_error(&self) -> Result<f64> {
        let g = self.owner.as_ref().ok_or_else(|| {
            Error::InvalidArgument("line field has no owner map".into())
        })?;
        let n = self.n;
        let errs: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let x = Vec2::new((idx / n) as f64 / n as f64, (idx % n) as f64 / n as f64);
                let v = Vec2::new(self.angles[idx].cos(), self.angles[idx].sin());
                let (gx, d) = g.lift_with_jacobian(x);
                line_angle_between(d * v, self.direction_at(gx))
            })
            .collect();
        Ok(errs.into_iter().fold(0.0, f64::max))
    }

    /// Max angular difference between horizontally or vertically adjacent
    /// grid cells.
    pub fn continuity(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = self.angle_at_node(i, j);
                worst = worst
                    .max(angle_mod_pi_distance(a, self.angle_at_node(i + 1, j)))
                    .max(angle_mod_pi_distance(a, self.angle_at_node(i, j + 1)));
            }
        }
        worst
    }

    /// Sup over grid points of the angle to another field.
    pub fn sup_angle_to(&self, other: &LineField) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::GridMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(self
            .angles
            .iter()
            .zip(&other.angles)
            .map(|(a, b)| angle_mod_pi_distance(*a, *b))
            .fold(0.0, f64::max))
    }

    /// CSV rows `(i, j, theta)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,theta\n");
        for i in 0..self.n {
            for j in 0..self.n {
                out.push_str(&format!("{i},{j},{}\n", self.angle_at_node(i, j)));
            }
        }
        out
    }
}

/// Stable or unstable field of `g` by projective iteration of a seed
/// eigen-direction.
///
/// Unstable: the seed is pushed forward along the backward orbit,
/// `Dg(g⁻¹x)···Dg(g⁻ᵏx)·v_u`. Stable: the seed is pulled back along the
/// forward orbit with `Dg⁻¹`. Depths `k` and `k − 1` must agree to
/// [`FIELD_CONVERGENCE_TOL`].
pub fn compute_line_field(
    g: &SharedMap,
    label: FieldLabel,
    n: usize,
    iters: usize,
) -> Result<LineField> {
    if iters < 2 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "line field needs grid > 0 and at least 2 iterations, got N = {n}, iters = {iters}"
        )));
    }
    let e = HyperbolicElement::new(g.linear_part())?;
    let seed = match label {
        FieldLabel::Unstable => e.v_u,
        FieldLabel::Stable => e.v_s,
    };
    let results: Vec<Result<(f64, f64)>> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let x = Vec2::new((idx / n) as f64 / n as f64, (idx % n) as f64 / n as f64);
            let (deep, shallow) = match label {
                FieldLabel::Unstable => unstable_pushes(g, x, seed, iters)?,
                FieldLabel::Stable => stable_pushes(g, x, seed, iters)?,
            };
            let a = line_angle(deep);
            Ok((a, angle_mod_pi_distance(a, line_angle(shallow))))
        })
        .collect();
    let mut angles = Vec::with_capacity(n * n);
    let mut change: f64 = 0.0;
    for r in results {
        let (a, c) = r?;
        angles.push(a);
        change = change.max(c);
    }
    if change > FIELD_CONVERGENCE_TOL {
        return Err(Error::NotConverged {
            residual: change,
            iters,
        });
    }
    Ok(LineField::from_angles(
        n,
        angles,
        label,
        seed,
        change,
        Some(g.clone()),
    ))
}

fn unstable_pushes(g: &SharedMap, x: Vec2, seed: Vec2, k: usize) -> Result<(Vec2, Vec2)> {
    let mut jac = Vec::with_capacity(k);
    let mut y = x;
    for _ in 0..k {
        y = TorusPoint::from_lift(g.inverse_lift(y)?).lift();
        jac.push(g.jacobian(y));
    }
    let push = |depth: usize| {
        let mut w = seed;
        for j in (0..depth).rev() {
            w = jac[j] * w;
            w /= w.norm();
        }
        w
    };
    Ok((push(k), push(k - 1)))
}

fn stable_pushes(g: &SharedMap, x: Vec2, seed: Vec2, k: usize) -> Result<(Vec2, Vec2)> {
    let mut jac = Vec::with_capacity(k);
    let mut y = x;
    for _ in 0..k {
        let (gy, d) = g.lift_with_jacobian(y);
        jac.push(d);
        y = TorusPoint::from_lift(gy).lift();
    }
    let pull = |depth: usize| -> Result<Vec2> {
        let mut w = seed;
        for j in (0..depth).rev() {
            w = jac[j]
                .lu()
                .solve(&w)
                .ok_or(Error::SingularSystem { det: jac[j].determinant() })?;
            w /= w.norm();
        }
        Ok(w)
    };
    Ok((pull(k)?, pull(k - 1)?))
}

/// Minimal angle between two fields over the grid, with the first cell that
/// attains it.
pub fn min_transversality_angle(f1: &LineField, f2: &LineField) -> Result<(f64, TorusPoint)> {
    if f1.n != f2.n {
        return Err(Error::GridMismatch {
            left: f1.n,
            right: f2.n,
        });
    }
    let n = f1.n;
    let mut best = (f64::INFINITY, 0usize);
    for idx in 0..n * n {
        let a = angle_mod_pi_distance(f1.angles[idx], f2.angles[idx]);
        if a < best.0 {
            best = (a, idx);
        }
    }
    let (i, j) = (best.1 / n, best.1 % n);
    Ok((
        best.0,
        TorusPoint::new(i as f64 / n as f64, j as f64 / n as f64),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::FourierPerturbation;
    use crate::lattice::IntMatrix2;
    use crate::torus_maps::PerturbedMap;
    use std::sync::Arc;

    fn cat() -> HyperbolicElement {
        HyperbolicElement::new(IntMatrix2::new(2, 1, 1, 1).unwrap()).unwrap()
    }

    #[test]
    fn linear_field_is_the_eigendirection() {
        let e = cat();
        let g: SharedMap = Arc::new(PerturbedMap::linear(e.matrix));
        let f = compute_line_field(&g, FieldLabel::Unstable, 32, 8).unwrap();
        let expected = 0.618033988749895f64.atan();
        assert!(f.angles().iter().all(|a| (a - expected).abs() < 1e-14));
        assert!((f.direction_at(Vec2::new(0.37, 0.11)) - e.v_u).norm() < 1e-14);
        let s = compute_line_field(&g, FieldLabel::Stable, 32, 8).unwrap();
        assert!((s.direction_at(Vec2::new(0.5, 0.5)) - e.v_s).norm() < 1e-14);
    }

    #[test]
    fn projective_contraction_rate() {
        // angle error of v pushed k times by A shrinks like λ_u^{-2k}
        let e = cat();
        let a = e.matrix.to_mat2();
        let mut w = Vec2::new(1.0, 0.0);
        let target = line_angle(e.v_u);
        let mut prev = angle_mod_pi_distance(line_angle(w), target);
        for _ in 0..6 {
            w = a * w;
            let err = angle_mod_pi_distance(line_angle(w), target);
            let ratio = err / prev;
            assert!((ratio - e.lambda_u.powi(-2)).abs() < 0.02);
            prev = err;
        }
    }

    #[test]
    fn perturbed_field_is_invariant_and_close_to_linear() {
        let e = cat();
        let base = FourierPerturbation::sine([0, 1], [1.0, 0.0])
            .plus(&FourierPerturbation::cosine([1, 1], [0.0, 1.0]));
        let linear = LineField::constant(64, e.v_u, FieldLabel::Unstable);
        let mut last = 0.0;
        for size in [0.01, 0.02, 0.05] {
            let g: SharedMap = Arc::new(PerturbedMap::new(&e, base.with_deriv_bound(size)));
            let f = compute_line_field(&g, FieldLabel::Unstable, 64, 20).unwrap();
            let dev = f.sup_angle_to(&linear).unwrap();
            assert!(dev < 3.0 * size && dev > last);
            last = dev;
            assert!(f.invariance_error().unwrap() < 1e-4);
            assert!(f.continuity() < 10.0 * std::f64::consts::TAU / 64.0);
        }
    }

    #[test]
    fn min_angle_of_standard_pair() {
        let e1 = cat();
        let e2 = HyperbolicElement::new(IntMatrix2::new(1, 1, 1, 2).unwrap()).unwrap();
        let f1 = LineField::constant(16, e1.v_u, FieldLabel::Unstable);
        let f2 = LineField::constant(16, e2.v_s, FieldLabel::Stable);
        let (angle, _) = min_transversality_angle(&f1, &f2).unwrap();
        assert!((angle - (1.0 / 5f64.sqrt()).acos()).abs() < 1e-12);
        assert_eq!(min_transversality_angle(&f1, &f1).unwrap().0, 0.0);
        let f3 = LineField::constant(8, e2.v_s, FieldLabel::Stable);
        assert!(min_transversality_angle(&f1, &f3).is_err());
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let f = LineField::constant(8, Vec2::new(1.0, 1.0), FieldLabel::Stable);
        assert_eq!(f.to_csv().lines().count(), 65);
    }
}
