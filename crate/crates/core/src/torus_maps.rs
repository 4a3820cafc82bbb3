//! Nonlinear torus maps `A + p`, diffeomorphisms `id + q`, conjugated actions
//! `φ∘A∘φ⁻¹`, and the cone-field test for the Anosov property.

use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fourier::FourierPerturbation;
use crate::geometry::{line_angle_between, Mat2, TorusPoint, Vec2};
use crate::lattice::{HyperbolicElement, IntMatrix2};

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITERS: usize = 50;

/// A torus map given by a lift `R² → R²` that commutes with deck translations
/// up to its linear part: `lift(x + k) = lift(x) + A k`.
pub trait TorusMap: Send + Sync {
    fn linear_part(&self) -> IntMatrix2;

    fn lift(&self, x: Vec2) -> Vec2;

    fn jacobian(&self, x: Vec2) -> Mat2;

    fn lift_with_jacobian(&self, x: Vec2) -> (Vec2, Mat2) {
        (self.lift(x), self.jacobian(x))
    }

    /// The periodic part `lift(x) − A x`.
    fn perturbation(&self, x: Vec2) -> Vec2 {
        self.lift(x) - self.linear_part().apply_lift(x)
    }

    /// Newton on the lift, seeded with the inverse linear part.
    fn inverse_lift(&self, y: Vec2) -> Result<Vec2> {
        let seed = self.linear_part().inverse().apply_lift(y);
        newton_solve(seed, |x| {
            let (f, j) = self.lift_with_jacobian(x);
            (f - y, j)
        })
    }

    fn evaluate(&self, x: TorusPoint) -> TorusPoint {
        TorusPoint::from_lift(self.lift(x.lift()))
    }

    fn describe(&self) -> String;
}

pub type SharedMap = Arc<dyn TorusMap>;

/// Newton iteration for `F(x) = 0` on the plane; one extra step is taken after
/// the step size drops below tolerance.
pub fn newton_solve<F>(seed: Vec2, mut f: F) -> Result<Vec2>
where
    F: FnMut(Vec2) -> (Vec2, Mat2),
{
    let mut x = seed;
    let mut last = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITERS {
        let (r, j) = f(x);
        let step = j
            .lu()
            .solve(&r)
            .ok_or(Error::NewtonFailed {
                seed_x: seed.x,
                seed_y: seed.y,
                residual: r.norm(),
            })?;
        x -= step;
        last = r.norm();
        if step.norm() < NEWTON_TOL {
            let (r, j) = f(x);
            if let Some(s) = j.lu().solve(&r) {
                x -= s;
            }
            return Ok(x);
        }
    }
    Err(Error::NewtonFailed {
        seed_x: seed.x,
        seed_y: seed.y,
        residual: last,
    })
}

/// `x ↦ A x + p(x)` with `p` a trigonometric polynomial.
#[derive(Clone, Debug)]
pub struct PerturbedMap {
    matrix: IntMatrix2,
    perturbation: FourierPerturbation,
}

impl PerturbedMap {
    pub fn new(base: &HyperbolicElement, perturbation: FourierPerturbation) -> Self {
        Self::from_matrix(base.matrix, perturbation)
    }

    /// Any SL(2,Z) linear part, hyperbolic or not.
    pub fn from_matrix(matrix: IntMatrix2, perturbation: FourierPerturbation) -> Self {
        Self {
            matrix,
            perturbation,
        }
    }

    pub fn linear(matrix: IntMatrix2) -> Self {
        Self::from_matrix(matrix, FourierPerturbation::zero())
    }

    pub fn perturbation_series(&self) -> &FourierPerturbation {
        &self.perturbation
    }
}

impl TorusMap for PerturbedMap {
    fn linear_part(&self) -> IntMatrix2 {
        self.matrix
    }

    #[inline]
    fn lift(&self, x: Vec2) -> Vec2 {
        self.matrix.apply_lift(x) + self.perturbation.eval(x)
    }

    fn jacobian(&self, x: Vec2) -> Mat2 {
        self.matrix.to_mat2() + self.perturbation.jacobian(x)
    }

    fn lift_with_jacobian(&self, x: Vec2) -> (Vec2, Mat2) {
        let (p, dp) = self.perturbation.eval_with_jacobian(x);
        (self.matrix.apply_lift(x) + p, self.matrix.to_mat2() + dp)
    }

    fn perturbation(&self, x: Vec2) -> Vec2 {
        self.perturbation.eval(x)
    }

    fn describe(&self) -> String {
        format!("{} + p ({} modes)", self.matrix, self.perturbation.modes().len())
    }
}

/// The diffeomorphism `φ = id + q`, valid when `‖Dq‖∞ < 1`.
#[derive(Clone, Debug)]
pub struct Diffeo {
    q: FourierPerturbation,
}

impl Diffeo {
    pub fn new(q: FourierPerturbation) -> Result<Self> {
        if q.deriv_bound() >= 1.0 {
            return Err(Error::NotADiffeo {
                bound: q.deriv_bound(),
            });
        }
        Ok(Self { q })
    }

    pub fn identity() -> Self {
        Self {
            q: FourierPerturbation::zero(),
        }
    }

    pub fn displacement(&self) -> &FourierPerturbation {
        &self.q
    }

    pub fn is_identity(&self) -> bool {
        self.q.is_zero()
    }

    #[inline]
    pub fn forward(&self, x: Vec2) -> Vec2 {
        x + self.q.eval(x)
    }

    pub fn jacobian(&self, x: Vec2) -> Mat2 {
        Mat2::identity() + self.q.jacobian(x)
    }

    pub fn forward_with_jacobian(&self, x: Vec2) -> (Vec2, Mat2) {
        let (q, dq) = self.q.eval_with_jacobian(x);
        (x + q, Mat2::identity() + dq)
    }

    /// Newton inversion seeded at `y − q(y)`.
    pub fn try_inverse(&self, y: Vec2) -> Result<Vec2> {
        if self.q.is_zero() {
            return Ok(y);
        }
        newton_solve(y - self.q.eval(y), |x| {
            let (f, j) = self.forward_with_jacobian(x);
            (f - y, j)
        })
    }

    /// Inverse that cannot fail: `x ↦ y − q(x)` is a contraction when
    /// `‖Dq‖∞ < 1`, so the fixed-point iteration backs up Newton.
    pub fn inverse(&self, y: Vec2) -> Vec2 {
        match self.try_inverse(y) {
            Ok(x) => x,
            Err(_) => {
                let mut x = y;
                for _ in 0..10_000 {
                    let nx = y - self.q.eval(x);
                    if (nx - x).norm() < 1e-15 {
                        return nx;
                    }
                    x = nx;
                }
                x
            }
        }
    }
}

/// `φ ∘ A ∘ φ⁻¹` for a linear map `A` and a diffeomorphism `φ`.
#[derive(Clone, Debug)]
pub struct ConjugatedMap {
    matrix: IntMatrix2,
    phi: Arc<Diffeo>,
}

impl ConjugatedMap {
    pub fn new(matrix: IntMatrix2, phi: Arc<Diffeo>) -> Self {
        Self { matrix, phi }
    }

    pub fn marking(&self) -> &Diffeo {
        &self.phi
    }
}

impl TorusMap for ConjugatedMap {
    fn linear_part(&self) -> IntMatrix2 {
        self.matrix
    }

    fn lift(&self, x: Vec2) -> Vec2 {
        self.phi.forward(self.matrix.apply_lift(self.phi.inverse(x)))
    }

    fn jacobian(&self, x: Vec2) -> Mat2 {
        self.lift_with_jacobian(x).1
    }

    fn lift_with_jacobian(&self, x: Vec2) -> (Vec2, Mat2) {
        let pre = self.phi.inverse(x);
        let (y, dphi_out) = self.phi.forward_with_jacobian(self.matrix.apply_lift(pre));
        let dphi_in = self.phi.jacobian(pre);
        let inv = dphi_in
            .try_inverse()
            .expect("Dφ is invertible when ‖Dq‖ < 1");
        (y, dphi_out * self.matrix.to_mat2() * inv)
    }

    fn inverse_lift(&self, y: Vec2) -> Result<Vec2> {
        Ok(self
            .phi
            .forward(self.matrix.inverse().apply_lift(self.phi.inverse(y))))
    }

    fn describe(&self) -> String {
        format!("phi o {} o phi^-1", self.matrix)
    }
}

/// Generators of an action with their linear models, and the diffeomorphism
/// used to build them when known.
#[derive(Clone)]
pub struct MarkedAction {
    pub generators: Vec<(HyperbolicElement, SharedMap)>,
    pub marking: Option<Arc<Diffeo>>,
}

impl std::fmt::Debug for MarkedAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MarkedAction")
            .field(
                "generators",
                &self
                    .generators
                    .iter()
                    .map(|(e, g)| (e.matrix, g.describe()))
                    .collect::<Vec<_>>(),
            )
            .field("marked", &self.marking.is_some())
            .finish()
    }
}

impl MarkedAction {
    /// Validates that each generator map is homotopic to its linear model.
    pub fn new(
        generators: Vec<(HyperbolicElement, SharedMap)>,
        marking: Option<Arc<Diffeo>>,
    ) -> Result<Self> {
        for (e, g) in &generators {
            if g.linear_part() != e.matrix {
                return Err(Error::DegreeMismatch {
                    defect: f64::INFINITY,
                });
            }
            let defect = homotopy_defect(g.as_ref());
            if defect > 1e-9 {
                return Err(Error::DegreeMismatch { defect });
            }
        }
        Ok(Self {
            generators,
            marking,
        })
    }

    /// The action map of an arbitrary group element, available when the action
    /// was built by conjugation.
    pub fn map_for(&self, m: IntMatrix2) -> Option<SharedMap> {
        self.marking
            .as_ref()
            .map(|phi| Arc::new(ConjugatedMap::new(m, phi.clone())) as SharedMap)
    }

    pub fn generator(&self, i: usize) -> &SharedMap {
        &self.generators[i].1
    }
}

/// `max |lift(x + e_j) − lift(x) − A e_j|` over a coarse sample of points.
pub fn homotopy_defect(g: &dyn TorusMap) -> f64 {
    let a = g.linear_part();
    let mut worst: f64 = 0.0;
    for i in 0..7 {
        for j in 0..7 {
            let x = Vec2::new(i as f64 / 7.0 + 0.013, j as f64 / 7.0 + 0.029);
            let fx = g.lift(x);
            for (e, k) in [(Vec2::new(1.0, 0.0), [1, 0]), (Vec2::new(0.0, 1.0), [0, 1])] {
                let ak = a.apply_int(k);
                let expect = fx + Vec2::new(ak[0] as f64, ak[1] as f64);
                worst = worst.max((g.lift(x + e) - expect).norm());
            }
        }
    }
    worst
}

/// `G(γ, ·) = φ ∘ γ ∘ φ⁻¹` for each generator.
pub fn conjugated_action(phi: Diffeo, generators: &[HyperbolicElement]) -> Result<MarkedAction> {
    let phi = Arc::new(phi);
    let gens = generators
        .iter()
        .map(|e| {
            (
                *e,
                Arc::new(ConjugatedMap::new(e.matrix, phi.clone())) as SharedMap,
            )
        })
        .collect();
    MarkedAction::new(gens, Some(phi))
}

/// Parameters of the cone-field test.
#[derive(Clone, Debug)]
pub struct ConeParams {
    /// Half-angle of both cones, in `(0, π/2)`.
    pub aperture: f64,
    /// Axis of the unstable cone.
    pub direction: Vec2,
    /// Axis of the stable cone, tested under the inverse derivative.
    pub stable_direction: Vec2,
    /// Orbit length followed from each grid point.
    pub iterations: usize,
    /// Grid resolution for orbit seeds.
    pub grid: usize,
}

impl ConeParams {
    pub fn for_element(e: &HyperbolicElement, aperture: f64) -> Self {
        Self {
            aperture,
            direction: e.v_u,
            stable_direction: e.v_s,
            iterations: 20,
            grid: 128,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConeVerdict {
    pub anosov: bool,
    /// Minimal one-step expansion over both cones and all sampled points.
    pub expansion_margin: f64,
    pub unstable_invariant: bool,
    pub stable_invariant: bool,
}

/// Minimal `|D v|` over unit vectors within `aperture` of the line of `axis`,
/// and whether the image of the cone lies strictly inside it.
fn cone_step(d: &Mat2, axis: Vec2, aperture: f64) -> (bool, f64) {
    let axis = axis.normalize();
    let phi0 = axis.y.atan2(axis.x);
    let edges = [phi0 - aperture, phi0 + aperture];
    let invariant = edges.iter().all(|&phi| {
        let img = d * Vec2::new(phi.cos(), phi.sin());
        img.norm() > 0.0 && line_angle_between(img, axis) < aperture
    });
    // |D v(φ)|² = c0 + r cos(2φ − ψ)
    let m = d.transpose() * d;
    let c0 = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let c1 = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let c2 = m[(0, 1)];
    let r = c1.hypot(c2);
    let psi = c2.atan2(c1);
    let q = |phi: f64| (c0 + r * (2.0 * phi - psi).cos()).max(0.0);
    let mut min_sq = q(edges[0]).min(q(edges[1]));
    let phi_min = 0.5 * (psi + std::f64::consts::PI);
    // the minimiser is defined mod π; test its representative nearest phi0
    let k = ((phi0 - phi_min) / std::f64::consts::PI).round();
    let cand = phi_min + k * std::f64::consts::PI;
    if (cand - phi0).abs() <= aperture {
        min_sq = min_sq.min(c0 - r);
    }
    (invariant, min_sq.max(0.0).sqrt())
}

/// Cone-field verification of the Anosov property along sampled orbits.
///
/// At each orbit point `x` the unstable cone must be mapped strictly into
/// itself by `Dg(x)` and the stable cone strictly into itself by `Dg(x)⁻¹`
/// (the inverse derivative at `g(x)`), both with expansion above one.
pub fn verify_anosov_cones(g: &dyn TorusMap, params: &ConeParams) -> Result<ConeVerdict> {
    if !(params.aperture > 0.0 && params.aperture < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidArgument(format!(
            "cone aperture {} outside (0, π/2)",
            params.aperture
        )));
    }
    let n = params.grid.max(1);
    let iters = params.iterations.max(1);
    let per_point: Vec<(bool, bool, f64)> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            let mut x = Vec2::new(i as f64 / n as f64, j as f64 / n as f64);
            let (mut inv_u, mut inv_s, mut margin) = (true, true, f64::INFINITY);
            for _ in 0..iters {
                let (fx, d) = g.lift_with_jacobian(x);
                let (ok_u, exp_u) = cone_step(&d, params.direction, params.aperture);
                let (ok_s, exp_s) = match d.try_inverse() {
                    Some(di) => cone_step(&di, params.stable_direction, params.aperture),
                    None => (false, 0.0),
                };
                inv_u &= ok_u;
                inv_s &= ok_s;
                margin = margin.min(exp_u).min(exp_s);
                x = TorusPoint::from_lift(fx).lift();
            }
            (inv_u, inv_s, margin)
        })
        .collect();
    let unstable_invariant = per_point.iter().all(|p| p.0);
    let stable_invariant = per_point.iter().all(|p| p.1);
    let margin = per_point.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    if unstable_invariant && stable_invariant && (margin - 1.0).abs() <= 1e-6 {
        return Err(Error::Inconclusive { margin });
    }
    Ok(ConeVerdict {
        anosov: unstable_invariant && stable_invariant && margin > 1.0,
        expansion_margin: margin,
        unstable_invariant,
        stable_invariant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn cat() -> HyperbolicElement {
        HyperbolicElement::new(IntMatrix2::new(2, 1, 1, 1).unwrap()).unwrap()
    }

    fn cat2() -> HyperbolicElement {
        HyperbolicElement::new(IntMatrix2::new(1, 1, 1, 2).unwrap()).unwrap()
    }

    #[test]
    fn zero_perturbation_is_the_standard_action() {
        let e = cat();
        let g = PerturbedMap::new(&e, FourierPerturbation::zero());
        let x = TorusPoint::new(0.25, 0.5);
        assert_eq!(g.evaluate(x), e.matrix.act(x));
        assert_eq!(g.jacobian(Vec2::new(0.3, 0.8)), e.matrix.to_mat2());
    }

    #[test]
    fn jacobian_of_single_mode() {
        let g = PerturbedMap::new(&cat(), FourierPerturbation::sine([0, 1], [0.03, 0.0]));
        let j = g.jacobian(Vec2::zeros());
        let expected = Mat2::new(2.0, 1.0 + 0.06 * std::f64::consts::PI, 1.0, 1.0);
        assert!((j - expected).norm() < 1e-15);
    }

    #[test]
    fn evaluation_is_periodic() {
        let g = PerturbedMap::new(&cat(), FourierPerturbation::sine([1, 2], [0.01, -0.02]));
        let x = Vec2::new(0.123, 0.456);
        for k in [(1.0, 0.0), (0.0, -1.0), (3.0, 2.0)] {
            let a = g.evaluate(TorusPoint::from_lift(x));
            let b = g.evaluate(TorusPoint::from_lift(x + Vec2::new(k.0, k.1)));
            assert!(a.distance(&b) < 1e-14);
        }
        assert!(homotopy_defect(&g) < 1e-13);
    }

    #[test]
    fn jacobian_matches_centered_differences() {
        let p = FourierPerturbation::sine([0, 1], [0.01, 0.0])
            .plus(&FourierPerturbation::cosine([1, 1], [0.0, 0.005]));
        let g = PerturbedMap::new(&cat(), p);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let h = 1e-5;
        for _ in 0..100 {
            let x = Vec2::new(rng.gen(), rng.gen());
            let j = g.jacobian(x);
            for c in 0..2 {
                let mut e = Vec2::zeros();
                e[c] = h;
                let fd = (g.lift(x + e) - g.lift(x - e)) / (2.0 * h);
                assert!((j.column(c) - fd).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn diffeo_round_trip_on_grid() {
        let phi = Diffeo::new(FourierPerturbation::sine([0, 1], [0.02, 0.0])).unwrap();
        for i in 0..64 {
            for j in 0..64 {
                let x = Vec2::new(i as f64 / 64.0, j as f64 / 64.0);
                let back = phi.try_inverse(phi.forward(x)).unwrap();
                assert!((back - x).norm() < 1e-12);
            }
        }
        assert_eq!(Diffeo::identity().forward(Vec2::new(0.3, 0.4)), Vec2::new(0.3, 0.4));
    }

    #[test]
    fn large_displacement_is_rejected() {
        let q = FourierPerturbation::sine([1, 0], [1.0, 0.0]).with_deriv_bound(1.2);
        assert!(matches!(Diffeo::new(q), Err(Error::NotADiffeo { .. })));
    }

    #[test]
    fn conjugated_action_examples() {
        let action = conjugated_action(Diffeo::identity(), &[cat()]).unwrap();
        let x = Vec2::new(0.31, 0.77);
        assert_eq!(action.generator(0).lift(x), cat().matrix.apply_lift(x));

        let phi = Diffeo::new(FourierPerturbation::sine([0, 1], [0.02, 0.0])).unwrap();
        let action = conjugated_action(phi, &[cat(), cat2()]).unwrap();
        let g1 = action.generator(0);
        assert!(g1.lift(Vec2::zeros()).norm() < 1e-15);
        assert!(homotopy_defect(g1.as_ref()) < 1e-12);
    }

    #[test]
    fn conjugated_action_is_a_group_action() {
        let phi = Diffeo::new(FourierPerturbation::sine([0, 1], [0.02, 0.0])).unwrap();
        let action = conjugated_action(phi, &[cat(), cat2()]).unwrap();
        let prod = action
            .map_for(cat().matrix.compose(&cat2().matrix))
            .unwrap();
        let (g1, g2) = (action.generator(0), action.generator(1));
        let mut worst: f64 = 0.0;
        for i in 0..64 {
            for j in 0..64 {
                let x = Vec2::new(i as f64 / 64.0, j as f64 / 64.0);
                worst = worst.max((prod.lift(x) - g1.lift(g2.lift(x))).norm());
            }
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn inverse_lift_inverts() {
        let g = PerturbedMap::new(&cat(), FourierPerturbation::sine([1, 1], [0.01, 0.02]));
        let y = Vec2::new(0.4, -0.2);
        let x = g.inverse_lift(y).unwrap();
        assert!((g.lift(x) - y).norm() < 1e-14);
    }

    #[test]
    fn linear_cones() {
        let e = cat();
        let g = PerturbedMap::linear(e.matrix);
        let v = verify_anosov_cones(&g, &ConeParams::for_element(&e, 0.3)).unwrap();
        assert!(v.anosov);
        assert!(v.expansion_margin > 1.0 && v.expansion_margin < e.lambda_u);
        let narrow = verify_anosov_cones(&g, &ConeParams::for_element(&e, 1e-4)).unwrap();
        assert!((narrow.expansion_margin - e.lambda_u).abs() < 1e-6);
    }

    #[test]
    fn perturbed_cones_and_monotonicity() {
        let e = cat();
        let p = FourierPerturbation::sine([0, 1], [1.0, 0.0])
            .plus(&FourierPerturbation::cosine([1, 1], [0.0, 1.0]))
            .with_deriv_bound(0.05);
        let params = ConeParams::for_element(&e, 0.3);
        let full = verify_anosov_cones(&PerturbedMap::new(&e, p.clone()), &params).unwrap();
        assert!(full.anosov);
        let half = verify_anosov_cones(&PerturbedMap::new(&e, p.scaled(0.5)), &params).unwrap();
        assert!(half.anosov);
        assert!(half.expansion_margin >= full.expansion_margin - 1e-12);
    }

    #[test]
    fn elliptic_map_fails_cones() {
        let rot = IntMatrix2::new(0, -1, 1, 0).unwrap();
        let params = ConeParams {
            aperture: 0.3,
            direction: Vec2::new(1.0, 0.0),
            stable_direction: Vec2::new(0.0, 1.0),
            iterations: 4,
            grid: 16,
        };
        let v = verify_anosov_cones(&PerturbedMap::linear(rot), &params).unwrap();
        assert!(!v.anosov);
    }
}
