//! Real, Z²-periodic vector perturbations as truncated Fourier series.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::geometry::{Mat2, Vec2};

const TWO_PI: f64 = 2.0 * PI;

/// One complex vector coefficient `c = re + i·im` attached to wavevector `k`.
///
/// A mode contributes `c·e^{2πi k·x}` together with its conjugate mode, so the
/// evaluated series is `Σ 2 Re(c e^{2πi k·x})` over `k ≠ 0`, plus `re` for
/// the constant mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub k: [i32; 2],
    pub re: [f64; 2],
    pub im: [f64; 2],
}

impl FourierMode {
    fn modulus(&self) -> f64 {
        (self.re[0].powi(2) + self.re[1].powi(2) + self.im[0].powi(2) + self.im[1].powi(2)).sqrt()
    }
}

/// A conjugate-symmetric trigonometric polynomial `p: R² → R²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<FourierMode>", into = "Vec<FourierMode>")]
pub struct FourierPerturbation {
    modes: Vec<FourierMode>,
    sup_bound: f64,
    deriv_bound: f64,
}

impl From<Vec<FourierMode>> for FourierPerturbation {
    fn from(modes: Vec<FourierMode>) -> Self {
        Self::new(modes)
    }
}

impl From<FourierPerturbation> for Vec<FourierMode> {
    fn from(p: FourierPerturbation) -> Self {
        p.modes
    }
}

impl Default for FourierPerturbation {
    fn default() -> Self {
        Self::zero()
    }
}

impl FourierPerturbation {
    /// Closes the mode list under conjugation: a mode at `-k` is folded onto
    /// `k` with conjugated coefficient, duplicates are summed, and the result
    /// is sorted by wavevector.
    pub fn new(modes: Vec<FourierMode>) -> Self {
        let mut merged: Vec<FourierMode> = Vec::new();
        for m in modes {
            let negative = m.k[0] < 0 || (m.k[0] == 0 && m.k[1] < 0);
            let mut canon = if negative {
                FourierMode {
                    k: [-m.k[0], -m.k[1]],
                    re: m.re,
                    im: [-m.im[0], -m.im[1]],
                }
            } else {
                m
            };
            if canon.k == [0, 0] {
                canon.im = [0.0, 0.0];
            }
            match merged.iter_mut().find(|e| e.k == canon.k) {
                Some(e) => {
                    for i in 0..2 {
                        e.re[i] += canon.re[i];
                        e.im[i] += canon.im[i];
                    }
                }
                None => merged.push(canon),
            }
        }
        merged.retain(|m| m.modulus() > 0.0);
        merged.sort_by_key(|m| m.k);
        let sup_bound = merged
            .iter()
            .map(|m| if m.k == [0, 0] { m.modulus() } else { 2.0 * m.modulus() })
            .sum();
        let deriv_bound = merged
            .iter()
            .map(|m| {
                let kn = ((m.k[0] as f64).powi(2) + (m.k[1] as f64).powi(2)).sqrt();
                2.0 * TWO_PI * m.modulus() * kn
            })
            .sum();
        Self {
            modes: merged,
            sup_bound,
            deriv_bound,
        }
    }

    pub fn zero() -> Self {
        Self::new(Vec::new())
    }

    /// `amplitude · sin(2π k·x)`, componentwise amplitudes.
    pub fn sine(k: [i32; 2], amplitude: [f64; 2]) -> Self {
        Self::new(vec![FourierMode {
            k,
            re: [0.0, 0.0],
            im: [-0.5 * amplitude[0], -0.5 * amplitude[1]],
        }])
    }

    /// `amplitude · cos(2π k·x)`, componentwise amplitudes.
    pub fn cosine(k: [i32; 2], amplitude: [f64; 2]) -> Self {
        Self::new(vec![FourierMode {
            k,
            re: [0.5 * amplitude[0], 0.5 * amplitude[1]],
            im: [0.0, 0.0],
        }])
    }

    pub fn modes(&self) -> &[FourierMode] {
        &self.modes
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    /// Upper bound on `sup |p(x)|` from the triangle inequality.
    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// Upper bound on `sup ‖Dp(x)‖` (operator 2-norm); tight for a single mode.
    pub fn deriv_bound(&self) -> f64 {
        self.deriv_bound
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.modes
                .iter()
                .map(|m| FourierMode {
                    k: m.k,
                    re: m.re.map(|v| v * factor),
                    im: m.im.map(|v| v * factor),
                })
                .collect(),
        )
    }

    /// Rescale so that the derivative bound equals `target`.
    pub fn with_deriv_bound(&self, target: f64) -> Self {
        if self.deriv_bound == 0.0 {
            return self.clone();
        }
        self.scaled(target / self.deriv_bound)
    }

    pub fn plus(&self, other: &FourierPerturbation) -> Self {
        let mut modes = self.modes.clone();
        modes.extend(other.modes.iter().cloned());
        Self::new(modes)
    }

    #[inline]
    pub fn eval(&self, x: Vec2) -> Vec2 {
        let mut v = Vec2::zeros();
        for m in &self.modes {
            if m.k == [0, 0] {
                v += Vec2::new(m.re[0], m.re[1]);
                continue;
            }
            let theta = TWO_PI * (m.k[0] as f64 * x.x + m.k[1] as f64 * x.y);
            let (s, c) = theta.sin_cos();
            v.x += 2.0 * (m.re[0] * c - m.im[0] * s);
            v.y += 2.0 * (m.re[1] * c - m.im[1] * s);
        }
        v
    }

    /// Value and analytic Jacobian `Dp(x)`.
    #[inline]
    pub fn eval_with_jacobian(&self, x: Vec2) -> (Vec2, Mat2) {
        let mut v = Vec2::zeros();
        let mut j = Mat2::zeros();
        for m in &self.modes {
            if m.k == [0, 0] {
                v += Vec2::new(m.re[0], m.re[1]);
                continue;
            }
            let (k1, k2) = (m.k[0] as f64, m.k[1] as f64);
            let theta = TWO_PI * (k1 * x.x + k2 * x.y);
            let (s, c) = theta.sin_cos();
            v.x += 2.0 * (m.re[0] * c - m.im[0] * s);
            v.y += 2.0 * (m.re[1] * c - m.im[1] * s);
            let d0 = -2.0 * TWO_PI * (m.re[0] * s + m.im[0] * c);
            let d1 = -2.0 * TWO_PI * (m.re[1] * s + m.im[1] * c);
            j[(0, 0)] += d0 * k1;
            j[(0, 1)] += d0 * k2;
            j[(1, 0)] += d1 * k1;
            j[(1, 1)] += d1 * k2;
        }
        (v, j)
    }

    pub fn jacobian(&self, x: Vec2) -> Mat2 {
        self.eval_with_jacobian(x).1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sine_mode_evaluates_to_sine() {
        let p = FourierPerturbation::sine([0, 1], [0.03, 0.0]);
        for y in [0.0, 0.1, 0.25, 0.7] {
            let v = p.eval(Vec2::new(0.3, y));
            assert!((v.x - 0.03 * (TWO_PI * y).sin()).abs() < 1e-16);
            assert_eq!(v.y, 0.0);
        }
        let j = p.jacobian(Vec2::zeros());
        assert!((j[(0, 1)] - 0.06 * PI).abs() < 1e-15);
        assert!((p.deriv_bound() - 0.06 * PI).abs() < 1e-15);
        assert!((p.sup_bound() - 0.03).abs() < 1e-17);
    }

    #[test]
    fn conjugate_closure_folds_negative_modes() {
        let a = FourierPerturbation::new(vec![FourierMode {
            k: [0, -1],
            re: [0.0, 0.0],
            im: [0.015, 0.0],
        }]);
        let b = FourierPerturbation::sine([0, 1], [0.03, 0.0]);
        assert_eq!(a, b);
    }

    #[test]
    fn constant_mode() {
        let p = FourierPerturbation::new(vec![FourierMode {
            k: [0, 0],
            re: [0.1, -0.2],
            im: [5.0, 5.0],
        }]);
        assert_eq!(p.eval(Vec2::new(0.4, 0.9)), Vec2::new(0.1, -0.2));
        assert_eq!(p.deriv_bound(), 0.0);
    }

    #[test]
    fn json_is_a_mode_list() {
        let p = FourierPerturbation::cosine([1, 2], [0.01, 0.02]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"[{"k":[1,2],"re":[0.005,0.01],"im":[0.0,0.0]}]"#);
        let back: FourierPerturbation = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    fn perturbation() -> impl Strategy<Value = FourierPerturbation> {
        prop::collection::vec(
            ((-3i32..=3, -3i32..=3), prop::array::uniform4(-0.01f64..0.01)),
            1..5,
        )
        .prop_map(|ms| {
            FourierPerturbation::new(
                ms.into_iter()
                    .map(|((k1, k2), c)| FourierMode {
                        k: [k1, k2],
                        re: [c[0], c[1]],
                        im: [c[2], c[3]],
                    })
                    .collect(),
            )
        })
    }

    proptest! {
        #[test]
        fn periodic_and_bounded(p in perturbation(), x in 0.0f64..1.0, y in 0.0f64..1.0, k1 in -3i32..3, k2 in -3i32..3) {
            let a = p.eval(Vec2::new(x, y));
            let b = p.eval(Vec2::new(x + k1 as f64, y + k2 as f64));
            prop_assert!((a - b).norm() < 1e-13);
            prop_assert!(a.norm() <= p.sup_bound() + 1e-15);
            prop_assert!(p.jacobian(Vec2::new(x, y)).norm() <= p.deriv_bound() * 2f64.sqrt() + 1e-15);
        }

        #[test]
        fn jacobian_matches_finite_differences(p in perturbation(), x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let h = 1e-6;
            let j = p.jacobian(Vec2::new(x, y));
            let dx = (p.eval(Vec2::new(x + h, y)) - p.eval(Vec2::new(x - h, y))) / (2.0 * h);
            let dy = (p.eval(Vec2::new(x, y + h)) - p.eval(Vec2::new(x, y - h))) / (2.0 * h);
            prop_assert!((j.column(0) - dx).norm() < 1e-7);
            prop_assert!((j.column(1) - dy).norm() < 1e-7);
        }
    }
}
