use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::foliations::{integrate_leaf_centered, linspace, slide_to, HolonomyParams, LeafSegment, LineField};
use crate::geometry::{cross, Vec2};
use crate::lattice::{axis_scaled, HyperbolicElement};

use super::translation::{LeafTranslation, Provenance, TranslationAction};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FactorizationResult {
    pub slide_s: f64,
    pub slide_r: f64,
    pub translation_t: f64,
    pub numeric_deviation: f64,
}

/// Solves `s·w₁ˢ + r·w₂ˢ = t·w₁ᵘ` where the `w` are eigenvectors scaled to
/// unit first coordinate.
pub fn factor_translation_linear(e1: &HyperbolicElement, e2: &HyperbolicElement, s: f64) -> Result<FactorizationResult> {
    let (w1u, w1s, w2s) = (axis_scaled(e1.v_u), axis_scaled(e1.v_s), axis_scaled(e2.v_s));
    let det = cross(w2s, w1u);
    if det.abs() < 1e-12 {
        return Err(Error::SingularSystem { det });
    }
    // r·w2s − t·w1u = −s·w1s
    let rhs = -s * w1s;
    let r = cross(rhs, -w1u) / cross(w2s, -w1u);
    let t = cross(w2s, rhs) / cross(w2s, -w1u);
    let numeric_deviation = (s * w1s + r * w2s - t * w1u).norm();
    Ok(FactorizationResult {
        slide_s: s,
        slide_r: r,
        translation_t: t,
        numeric_deviation,
    })
}

/// A leaf translation realised as holonomy along the first stable foliation
/// followed by holonomy along the second one, back onto the original
/// unstable leaf.
pub struct ComposedTranslation {
    action: Arc<LeafTranslation>,
    f1u: Arc<LineField>,
    f1s: Arc<LineField>,
    f2s: Arc<LineField>,
    w1s: Vec2,
    /// Arc-length translation produced by a unit stable slide.
    rate: f64,
    slide_r: f64,
    step: f64,
    holonomy: HolonomyParams,
    leaves: Mutex<HashMap<u64, Arc<LeafSegment>>>,
}

impl ComposedTranslation {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        action: Arc<LeafTranslation>,
        e1: &HyperbolicElement,
        e2: &HyperbolicElement,
        f1u: Arc<LineField>,
        f1s: Arc<LineField>,
        f2s: Arc<LineField>,
        step: f64,
        budget: f64,
    ) -> Result<Self> {
        let unit = factor_translation_linear(e1, e2, 1.0)?;
        Ok(Self {
            action,
            f1u,
            f1s,
            f2s,
            w1s: axis_scaled(e1.v_s),
            rate: unit.translation_t * axis_scaled(e1.v_u).norm(),
            slide_r: unit.slide_r,
            step,
            holonomy: HolonomyParams { step, budget },
            leaves: Mutex::new(HashMap::new()),
        })
    }

    /// Stable slide `s` producing the arc-length translation `t`.
    pub fn slide_for(&self, t: f64) -> f64 {
        t / self.rate
    }

    /// Unstable leaf through `h(q0 + s·w₁ˢ)`.
    fn intermediate_leaf(&self, s: f64) -> Result<Arc<LeafSegment>> {
        if let Some(l) = self.leaves.lock().unwrap().get(&s.to_bits()) {
            return Ok(l.clone());
        }
        let tau = self.action.leaf();
        let (lo, hi) = tau.param_range();
        let half = 0.5 * (hi - lo);
        let p = self.action.conjugacy().eval(self.action.anchor() + s * self.w1s);
        let leaf = Arc::new(integrate_leaf_centered(&self.f1u, p, half, self.step)?);
        let mut cache = self.leaves.lock().unwrap();
        if cache.len() > 64 {
            cache.clear();
        }
        cache.insert(s.to_bits(), leaf.clone());
        Ok(leaf)
    }

    /// `H₂(H₁(y))` for the slide `s`, with the smallest crossing angle met.
    pub fn compose(&self, s: f64, y: f64) -> Result<(f64, f64)> {
        if s == 0.0 {
            return Ok((y, std::f64::consts::FRAC_PI_2));
        }
        let tau = self.action.leaf();
        let mid = self.intermediate_leaf(s)?;
        let c1 = slide_to(&self.f1s, tau.point_at(y), &mid, &self.holonomy)?;
        let c2 = slide_to(&self.f2s, c1.point, tau, &self.holonomy)?;
        Ok((c2.param, c1.angle.min(c2.angle)))
    }

    pub fn slide_r_for(&self, s: f64) -> f64 {
        self.slide_r * s
    }
}

impl TranslationAction for ComposedTranslation {
    fn apply(&self, t: f64, y: f64) -> Result<f64> {
        Ok(self.compose(self.slide_for(t), y)?.0)
    }

    fn epsilon(&self) -> f64 {
        self.action.epsilon()
    }

    fn domain(&self) -> (f64, f64) {
        self.action.domain()
    }

    fn provenance(&self) -> Provenance {
        Provenance::HolonomyComposed
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NumericFactorization {
    pub result: FactorizationResult,
    /// `t` predicted by the linear system.
    pub linear_t: f64,
    /// `|numeric t − linear t|`.
    pub t_mismatch: f64,
    /// Largest gap between `∂/∂y` of the composed and the direct motion.
    pub derivative_deviation: f64,
    pub min_crossing_angle: f64,
    pub samples: usize,
}

/// Composes the two stable holonomies for slide `s` on the unstable leaf of
/// `composed` and compares with the direct translation `S(t·|w₁ᵘ|, ·)`.
/// The reported `translation_t` is read back through the conjugacy.
pub fn factor_translation_numeric(
    composed: &ComposedTranslation,
    e1: &HyperbolicElement,
    e2: &HyperbolicElement,
    s: f64,
    samples: usize,
) -> Result<NumericFactorization> {
    let linear = factor_translation_linear(e1, e2, s)?;
    let action = &composed.action;
    let scale = axis_scaled(e1.v_u).norm();
    let t_arc = linear.translation_t * scale;
    if t_arc.abs() > 2.5 * action.epsilon() {
        return Err(Error::ChartOverflow {
            needed: t_arc,
            lo: -2.5 * action.epsilon(),
            hi: 2.5 * action.epsilon(),
        });
    }
    let (lo, hi) = action.domain();
    let ys = linspace(lo, hi, samples.max(3));
    let mut deviation: f64 = 0.0;
    let mut min_angle = f64::INFINITY;
    let mut t_sum = 0.0;
    for &y in &ys {
        let (m, angle) = composed.compose(s, y)?;
        min_angle = min_angle.min(angle);
        deviation = deviation.max((m - action.apply(t_arc, y)?).abs());
        t_sum += (action.sigma_of(m)? - action.sigma_of(y)?) / scale;
    }
    let t_num = t_sum / ys.len() as f64;
    let delta = 1e-4;
    let mut derivative_deviation: f64 = 0.0;
    for &y in &linspace(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo), 5) {
        let dc = (composed.compose(s, y + delta)?.0 - composed.compose(s, y - delta)?.0) / (2.0 * delta);
        let dd = (action.apply(t_arc, y + delta)? - action.apply(t_arc, y - delta)?) / (2.0 * delta);
        derivative_deviation = derivative_deviation.max((dc - dd).abs());
    }
    if min_angle < crate::foliations::holonomy::TANGENCY_ANGLE {
        return Err(Error::TangencySuspected { angle: min_angle });
    }
    Ok(NumericFactorization {
        result: FactorizationResult {
            slide_s: s,
            slide_r: linear.slide_r,
            translation_t: t_num,
            numeric_deviation: deviation,
        },
        linear_t: linear.translation_t,
        t_mismatch: (t_num - linear.translation_t).abs(),
        derivative_deviation,
        min_crossing_angle: min_angle,
        samples: ys.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugacy::solve_conjugacy;
    use crate::foliations::{FieldLabel, DEFAULT_LEAF_STEP};
    use crate::lattice::IntMatrix2;
    use crate::rigidity::translation::translation_action_from_conjugacy;
    use crate::torus_maps::{PerturbedMap, SharedMap};

    fn pair() -> (HyperbolicElement, HyperbolicElement) {
        (
            HyperbolicElement::new(IntMatrix2::new(2, 1, 1, 1).unwrap()).unwrap(),
            HyperbolicElement::new(IntMatrix2::new(1, 1, 1, 2).unwrap()).unwrap(),
        )
    }

    #[test]
    fn standard_pair_unit_slide() {
        let (e1, e2) = pair();
        let f = factor_translation_linear(&e1, &e2, 1.0).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        // t = −φ/2, r = t − 1
        assert!((f.translation_t + phi / 2.0).abs() < 1e-12);
        assert!((f.slide_r + phi / 2.0 + 1.0).abs() < 1e-12);
        assert!((f.translation_t + 0.8090170).abs() < 1e-6);
        assert!(f.numeric_deviation < 1e-12);
        let z = factor_translation_linear(&e1, &e2, 0.0).unwrap();
        assert_eq!((z.translation_t, z.slide_r), (0.0, 0.0));
    }

    #[test]
    fn linear_model_composition_matches() {
        let (e1, e2) = pair();
        let g: SharedMap = Arc::new(PerturbedMap::linear(e1.matrix));
        let h = Arc::new(solve_conjugacy(&e1, g, 64, 1e-12).unwrap());
        let f1u = Arc::new(LineField::constant(64, e1.v_u, FieldLabel::Unstable));
        let f1s = Arc::new(LineField::constant(64, e1.v_s, FieldLabel::Stable));
        let f2s = Arc::new(LineField::constant(64, e2.v_s, FieldLabel::Stable));
        let action = Arc::new(
            translation_action_from_conjugacy(h, Vec2::new(0.3, 0.4), e1.v_u, &f1u, 0.05, 0.1, DEFAULT_LEAF_STEP).unwrap(),
        );
        let c = ComposedTranslation::new(action, &e1, &e2, f1u, f1s, f2s, DEFAULT_LEAF_STEP, 1.0).unwrap();
        for s in [0.0, 0.03, -0.05] {
            let n = factor_translation_numeric(&c, &e1, &e2, s, 9).unwrap();
            assert!(n.result.numeric_deviation < 1e-8, "{n:?}");
            assert!(n.t_mismatch < 1e-10, "{n:?}");
        }
    }
}
