use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::conjugacy::Conjugacy;
use crate::error::{Error, Result};
use crate::foliations::{integrate_leaf_centered, linspace, LeafSegment, LineField};
use crate::geometry::Vec2;
use crate::roots::illinois;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Conjugate of translation by an explicit scalar homeomorphism.
    Synthetic,
    /// Transported from the linear leaf through a solved conjugacy.
    SyntheticFromH,
    /// Built by composing numeric holonomies.
    HolonomyComposed,
}

/// A local action `S(t, y)` of small translations on a transversal
/// parameter interval.
pub trait TranslationAction: Send + Sync {
    fn apply(&self, t: f64, y: f64) -> Result<f64>;

    /// Largest translation the action is meant for.
    fn epsilon(&self) -> f64;

    /// Parameter interval of the transversal.
    fn domain(&self) -> (f64, f64);

    fn provenance(&self) -> Provenance;
}

/// Increasing homeomorphisms of the line with closed-form derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SyntheticHomeo {
    Identity,
    /// `x ↦ factor·x`.
    Scale { factor: f64 },
    /// `x ↦ x + amplitude·sin x`, increasing for `|amplitude| < 1`.
    Sine { amplitude: f64 },
}

impl SyntheticHomeo {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SyntheticHomeo::Scale { factor } if !(factor > 0.0) => Err(Error::InvalidArgument(
                format!("scale factor {factor} must be positive"),
            )),
            SyntheticHomeo::Sine { amplitude } if !(amplitude.abs() < 1.0) => Err(
                Error::InvalidArgument(format!("sine amplitude {amplitude} must be below 1 in size")),
            ),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SyntheticHomeo::Identity => x,
            SyntheticHomeo::Scale { factor } => factor * x,
            SyntheticHomeo::Sine { amplitude } => x + amplitude * x.sin(),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            SyntheticHomeo::Identity => 1.0,
            SyntheticHomeo::Scale { factor } => factor,
            SyntheticHomeo::Sine { amplitude } => 1.0 + amplitude * x.cos(),
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            SyntheticHomeo::Identity => y,
            SyntheticHomeo::Scale { factor } => y / factor,
            SyntheticHomeo::Sine { .. } => {
                let mut x = y;
                for _ in 0..100 {
                    let dx = (self.eval(x) - y) / self.derivative(x);
                    x -= dx;
                    if dx.abs() <= 1e-16 * (1.0 + x.abs()) {
                        break;
                    }
                }
                x
            }
        }
    }
}

/// `S(t, y) = h(h⁻¹(y) + t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAction {
    pub homeo: SyntheticHomeo,
    pub eps: f64,
    pub domain: (f64, f64),
}

impl SyntheticAction {
    pub fn new(homeo: SyntheticHomeo, eps: f64, domain: (f64, f64)) -> Result<Self> {
        homeo.validate()?;
        if !(eps > 0.0) || !(domain.0 < domain.1) {
            return Err(Error::InvalidArgument("synthetic action needs eps > 0 and a nonempty domain".into()));
        }
        Ok(Self { homeo, eps, domain })
    }
}

impl TranslationAction for SyntheticAction {
    fn apply(&self, t: f64, y: f64) -> Result<f64> {
        Ok(self.homeo.eval(self.homeo.inverse(y) + t))
    }

    fn epsilon(&self) -> f64 {
        self.eps
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn provenance(&self) -> Provenance {
        Provenance::Synthetic
    }
}

/// Small translations `σ ↦ σ + t` along a linear leaf `q0 + σ v`, carried by
/// a conjugacy `h` to the leaf `τ′` through `h(q0)` and read in the arc-length
/// parameter of `τ′`: `S(t, y) = Y(σ(y) + t)` with `Y(σ)` the parameter of
/// `h(q0 + σ v)` on `τ′`.
pub struct LeafTranslation {
    conj: Arc<Conjugacy>,
    leaf: LeafSegment,
    anchor: Vec2,
    direction: Vec2,
    eps: f64,
    sigma_range: (f64, f64),
    domain: (f64, f64),
    sigma_cache: Mutex<HashMap<u64, f64>>,
}

impl std::fmt::Debug for LeafTranslation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LeafTranslation")
            .field("anchor", &self.anchor)
            .field("direction", &self.direction)
            .field("eps", &self.eps)
            .field("domain", &self.domain)
            .finish()
    }
}

/// Builds the translation action on `τ′ = h(τ)` where `τ` is the linear leaf
/// through `anchor` in `direction`, integrated as a leaf of `leaf_field`.
/// `half_width` is the σ-extent of the action's domain.
pub fn translation_action_from_conjugacy(
    conj: Arc<Conjugacy>,
    anchor: Vec2,
    direction: Vec2,
    leaf_field: &LineField,
    eps: f64,
    half_width: f64,
    step: f64,
) -> Result<LeafTranslation> {
    if !(eps > 0.0 && half_width > 0.0) {
        return Err(Error::InvalidArgument("translation action needs eps > 0 and half width > 0".into()));
    }
    let direction = direction.normalize();
    let reach = half_width + 3.0 * eps;
    let base = conj.eval(anchor);
    let leaf = integrate_leaf_centered(leaf_field, base, 1.5 * reach + 0.02, step)?;
    let mut action = LeafTranslation {
        conj,
        leaf,
        anchor,
        direction,
        eps,
        sigma_range: (-reach, reach),
        domain: (0.0, 0.0),
        sigma_cache: Mutex::new(HashMap::new()),
    };
    let (lo, hi) = action.leaf.param_range();
    for sigma in [-reach, reach] {
        let y = action.param_of(sigma);
        if y < lo || y > hi {
            return Err(Error::ChartOverflow { needed: y, lo, hi });
        }
    }
    let a = action.param_of(-half_width);
    let b = action.param_of(half_width);
    if !(b > a) {
        return Err(Error::NonMonotone);
    }
    action.domain = (a, b);
    Ok(action)
}

impl LeafTranslation {
    pub fn leaf(&self) -> &LeafSegment {
        &self.leaf
    }

    pub fn anchor(&self) -> Vec2 {
        self.anchor
    }

    pub fn direction(&self) -> Vec2 {
        self.direction
    }

    pub fn conjugacy(&self) -> &Conjugacy {
        &self.conj
    }

    /// `Y(σ)`: leaf parameter of `h(q0 + σ v)`.
    pub fn param_of(&self, sigma: f64) -> f64 {
        let p = self.conj.eval(self.anchor + sigma * self.direction);
        self.leaf.project(p).param
    }

    /// `σ(y) = Y⁻¹(y)`.
    pub fn sigma_of(&self, y: f64) -> Result<f64> {
        if let Some(s) = self.sigma_cache.lock().unwrap().get(&y.to_bits()) {
            return Ok(*s);
        }
        let (lo, hi) = self.sigma_range;
        let s = illinois(|s| self.param_of(s) - y, lo, hi, 1e-16, 0.0).ok_or_else(|| Error::ChartOverflow {
            needed: y,
            lo: self.param_of(lo),
            hi: self.param_of(hi),
        })?;
        let mut cache = self.sigma_cache.lock().unwrap();
        if cache.len() > 100_000 {
            cache.clear();
        }
        cache.insert(y.to_bits(), s);
        Ok(s)
    }
}

impl TranslationAction for LeafTranslation {
    fn apply(&self, t: f64, y: f64) -> Result<f64> {
        let s = self.sigma_of(y)? + t;
        let (lo, hi) = self.sigma_range;
        if s < lo || s > hi {
            return Err(Error::ChartOverflow { needed: s, lo, hi });
        }
        Ok(self.param_of(s))
    }

    fn epsilon(&self) -> f64 {
        self.eps
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn provenance(&self) -> Provenance {
        Provenance::SyntheticFromH
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularityGrid {
    pub t_count: usize,
    pub y_count: usize,
    pub h_y: f64,
}

impl Default for RegularityGrid {
    fn default() -> Self {
        Self {
            t_count: 5,
            y_count: 21,
            h_y: 1e-5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    /// `sup |D_fine − D_coarse|` at shared points, `D ≈ ∂S/∂y`.
    pub refinement_stability: f64,
    /// Largest jump of `D` between neighbouring points of the fine grid.
    pub modulus_of_continuity: f64,
    pub min_derivative: f64,
    pub max_derivative: f64,
}

/// Finite-difference `∂S/∂y` on a `(t, y)` grid and its 2×-refined version.
pub fn verify_action_regularity(s: &dyn TranslationAction, grid: &RegularityGrid) -> Result<RegularityReport> {
    if grid.t_count < 1 || grid.y_count < 2 || !(grid.h_y > 0.0) {
        return Err(Error::InvalidArgument("regularity grid too small".into()));
    }
    let (lo, hi) = s.domain();
    let margin = 0.05 * (hi - lo);
    let ts = linspace(0.0, s.epsilon(), grid.t_count.max(2));
    let fine_ys = linspace(lo + margin, hi - margin, 2 * grid.y_count - 1);
    let d = |t: f64, y: f64, h: f64| -> Result<f64> {
        Ok((s.apply(t, y + h)? - s.apply(t, y - h)?) / (2.0 * h))
    };
    let mut report = RegularityReport {
        refinement_stability: 0.0,
        modulus_of_continuity: 0.0,
        min_derivative: f64::INFINITY,
        max_derivative: f64::NEG_INFINITY,
    };
    for &t in &ts {
        let fine: Vec<f64> = fine_ys
            .iter()
            .map(|&y| d(t, y, 0.5 * grid.h_y))
            .collect::<Result<_>>()?;
        for (k, &y) in fine_ys.iter().enumerate().step_by(2) {
            let coarse = d(t, y, grid.h_y)?;
            report.refinement_stability = report.refinement_stability.max((coarse - fine[k]).abs());
        }
        for w in fine.windows(2) {
            report.modulus_of_continuity = report.modulus_of_continuity.max((w[1] - w[0]).abs());
        }
        for &v in &fine {
            report.min_derivative = report.min_derivative.min(v);
            report.max_derivative = report.max_derivative.max(v);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugacy::solve_conjugacy;
    use crate::foliations::{compute_line_field, FieldLabel, DEFAULT_LEAF_STEP};
    use crate::fourier::FourierPerturbation;
    use crate::lattice::{HyperbolicElement, IntMatrix2};
    use crate::torus_maps::{ConjugatedMap, Diffeo, PerturbedMap, SharedMap};

    fn cat() -> HyperbolicElement {
        HyperbolicElement::new(IntMatrix2::new(2, 1, 1, 1).unwrap()).unwrap()
    }

    #[test]
    fn synthetic_actions() {
        let id = SyntheticAction::new(SyntheticHomeo::Identity, 0.05, (-1.0, 1.0)).unwrap();
        assert_eq!(id.apply(0.03, 0.2).unwrap(), 0.2 + 0.03);
        let sine = SyntheticAction::new(SyntheticHomeo::Sine { amplitude: 0.1 }, 0.05, (-1.0, 1.0)).unwrap();
        for y in [-0.5, 0.0, 0.3] {
            assert!((sine.apply(0.0, y).unwrap() - y).abs() < 1e-15);
            let a = sine.apply(0.02 + 0.03, y).unwrap();
            let b = sine.apply(0.02, sine.apply(0.03, y).unwrap()).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
        assert!(SyntheticAction::new(SyntheticHomeo::Sine { amplitude: 1.5 }, 0.05, (-1.0, 1.0)).is_err());
        let r = verify_action_regularity(&id, &RegularityGrid::default()).unwrap();
        assert!(r.refinement_stability < 1e-9 && r.modulus_of_continuity < 1e-9);
        assert!((r.min_derivative - 1.0).abs() < 1e-9);
    }

    #[test]
    fn leaf_translation_for_identity_conjugacy() {
        let e = cat();
        let g: SharedMap = Arc::new(PerturbedMap::linear(e.matrix));
        let h = Arc::new(solve_conjugacy(&e, g.clone(), 64, 1e-12).unwrap());
        let f = compute_line_field(&g, FieldLabel::Unstable, 64, 10).unwrap();
        let q0 = Vec2::new(0.3, 0.4);
        let s = translation_action_from_conjugacy(h, q0, e.v_u, &f, 0.05, 0.1, DEFAULT_LEAF_STEP).unwrap();
        for y in [-0.05, 0.0, 0.07] {
            assert!((s.apply(0.03, y).unwrap() - (y + 0.03)).abs() < 1e-12);
        }
    }

    #[test]
    fn leaf_translation_for_smooth_conjugacy() {
        let e = cat();
        let phi = Arc::new(Diffeo::new(FourierPerturbation::sine([0, 1], [0.02, 0.0])).unwrap());
        let g: SharedMap = Arc::new(ConjugatedMap::new(e.matrix, phi));
        let h = Arc::new(solve_conjugacy(&e, g.clone(), 128, 1e-11).unwrap());
        let f = compute_line_field(&g, FieldLabel::Unstable, 128, 20).unwrap();
        let s = translation_action_from_conjugacy(h, Vec2::new(0.3, 0.4), e.v_u, &f, 0.05, 0.1, DEFAULT_LEAF_STEP).unwrap();
        let (lo, hi) = s.domain();
        for y in linspace(lo, hi, 5) {
            assert!((s.apply(0.0, y).unwrap() - y).abs() < 1e-12);
            let a = s.apply(0.03, y).unwrap();
            let b = s.apply(0.01, s.apply(0.02, y).unwrap()).unwrap();
            assert!((a - b).abs() < 1e-8);
        }
        let r = verify_action_regularity(&s, &RegularityGrid::default()).unwrap();
        assert!(r.refinement_stability < 1e-4, "{r:?}");
    }
}
