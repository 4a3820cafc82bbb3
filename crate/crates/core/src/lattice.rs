//! Integer 2×2 matrices of determinant one, their eigen-geometry, and the
//! pairwise-independence hypothesis on two hyperbolic elements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{canonical_sign, cross, Mat2, TorusPoint, Vec2};

/// An element of SL(2,Z), row-major `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 4]", into = "[i64; 4]")]
pub struct IntMatrix2 {
    a: i64,
    b: i64,
    c: i64,
    d: i64,
}

impl TryFrom<[i64; 4]> for IntMatrix2 {
    type Error = Error;

    fn try_from(e: [i64; 4]) -> Result<Self> {
        Self::new(e[0], e[1], e[2], e[3])
    }
}

impl From<IntMatrix2> for [i64; 4] {
    fn from(m: IntMatrix2) -> Self {
        m.entries()
    }
}

impl IntMatrix2 {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        let det = a * d - b * c;
        if det != 1 {
            return Err(Error::NotUnimodular { det });
        }
        Ok(Self { a, b, c, d })
    }

    pub const fn identity() -> Self {
        Self {
            a: 1,
            b: 0,
            c: 0,
            d: 1,
        }
    }

    pub fn entries(&self) -> [i64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn trace(&self) -> i64 {
        self.a + self.d
    }

    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &IntMatrix2) -> IntMatrix2 {
        IntMatrix2 {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    /// Adjugate, which is the inverse for determinant one.
    pub fn inverse(&self) -> IntMatrix2 {
        IntMatrix2 {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    pub fn pow(&self, n: u32) -> IntMatrix2 {
        (0..n).fold(IntMatrix2::identity(), |acc, _| acc.compose(self))
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.trace().abs() > 2
    }

    pub fn to_mat2(&self) -> Mat2 {
        Mat2::new(self.a as f64, self.b as f64, self.c as f64, self.d as f64)
    }

    /// Linear action on the plane.
    #[inline]
    pub fn apply_lift(&self, x: Vec2) -> Vec2 {
        Vec2::new(
            self.a as f64 * x.x + self.b as f64 * x.y,
            self.c as f64 * x.x + self.d as f64 * x.y,
        )
    }

    /// Standard action on the torus: `(m·x) mod 1`.
    pub fn act(&self, x: TorusPoint) -> TorusPoint {
        TorusPoint::from_lift(self.apply_lift(x.lift()))
    }

    /// Integer action on a lattice vector.
    pub fn apply_int(&self, k: [i64; 2]) -> [i64; 2] {
        [self.a * k[0] + self.b * k[1], self.c * k[0] + self.d * k[1]]
    }
}

impl std::fmt::Display for IntMatrix2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[[{},{}],[{},{}]]", self.a, self.b, self.c, self.d)
    }
}

/// A hyperbolic element with its eigenvalues and unit eigen-directions.
///
/// `lambda_u > 1 > lambda_s > 0` are the moduli of the eigenvalues; the
/// eigenvalues themselves carry the sign of the trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HyperbolicElement {
    pub matrix: IntMatrix2,
    pub lambda_u: f64,
    pub lambda_s: f64,
    pub v_u: Vec2,
    pub v_s: Vec2,
}

impl HyperbolicElement {
    /// Closed-form eigen-data from the characteristic polynomial.
    pub fn new(matrix: IntMatrix2) -> Result<Self> {
        let t = matrix.trace();
        if t.abs() <= 2 {
            return Err(Error::NotHyperbolic { trace: t });
        }
        let tf = t as f64;
        let root = (tf * tf - 4.0).sqrt();
        let mu_u = if t > 0 {
            0.5 * (tf + root)
        } else {
            0.5 * (tf - root)
        };
        let mu_s = 1.0 / mu_u;
        Ok(Self {
            matrix,
            lambda_u: mu_u.abs(),
            lambda_s: mu_s.abs(),
            v_u: eigenvector(&matrix, mu_u),
            v_s: eigenvector(&matrix, mu_s),
        })
    }

    /// `+1` or `-1`, the sign of the trace and of both eigenvalues.
    pub fn sign(&self) -> f64 {
        if self.matrix.trace() > 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn mu_u(&self) -> f64 {
        self.sign() * self.lambda_u
    }

    pub fn mu_s(&self) -> f64 {
        self.sign() * self.lambda_s
    }

    pub fn inverse(&self) -> Self {
        let inv = self.matrix.inverse();
        Self {
            matrix: inv,
            lambda_u: self.lambda_u,
            lambda_s: self.lambda_s,
            v_u: self.v_s,
            v_s: self.v_u,
        }
    }

    /// `max ‖M v − μ v‖` over both eigenpairs.
    pub fn reconstruction_error(&self) -> f64 {
        let m = self.matrix.to_mat2();
        let eu = (m * self.v_u - self.v_u * self.mu_u()).norm();
        let es = (m * self.v_s - self.v_s * self.mu_s()).norm();
        eu.max(es)
    }
}

fn eigenvector(m: &IntMatrix2, mu: f64) -> Vec2 {
    let [a, b, c, d] = m.entries().map(|v| v as f64);
    let r1 = Vec2::new(b, mu - a);
    let r2 = Vec2::new(mu - d, c);
    let v = if r1.norm() >= r2.norm() { r1 } else { r2 };
    canonical_sign(v.normalize())
}

/// Rescale a direction to unit first coordinate (eigen-directions of
/// hyperbolic SL(2,Z) elements never have vanishing first coordinate).
pub fn axis_scaled(v: Vec2) -> Vec2 {
    v / v.x
}

/// Outcome of the pairwise-independence test on four eigen-directions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairHypothesisCertificate {
    pub elements: [HyperbolicElement; 2],
    pub min_pairwise_sine: f64,
}

pub const PAIR_HYPOTHESIS_TOL: f64 = 1e-12;

impl PairHypothesisCertificate {
    pub fn check(e1: &HyperbolicElement, e2: &HyperbolicElement) -> Self {
        let dirs = [e1.v_s, e1.v_u, e2.v_s, e2.v_u];
        let mut min = f64::INFINITY;
        for i in 0..4 {
            for j in i + 1..4 {
                min = min.min(cross(dirs[i], dirs[j]).abs());
            }
        }
        let min = if min < PAIR_HYPOTHESIS_TOL { 0.0 } else { min };
        Self {
            elements: [*e1, *e2],
            min_pairwise_sine: min,
        }
    }

    pub fn hypothesis_ok(&self) -> bool {
        self.min_pairwise_sine > 0.0
    }

    pub fn to_report(&self) -> CertificateReport {
        CertificateReport {
            matrices: self.elements.map(|e| e.matrix.entries()),
            eigenvalues: self.elements.map(|e| [e.mu_u(), e.mu_s()]),
            eigenvectors: self
                .elements
                .map(|e| [[e.v_u.x, e.v_u.y], [e.v_s.x, e.v_s.y]]),
            min_pairwise_sine: self.min_pairwise_sine,
            hypothesis_ok: self.hypothesis_ok(),
        }
    }
}

/// JSON shape of a certificate: eigenvalues as `[unstable, stable]`,
/// eigenvectors as `[v_u, v_s]` per element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub matrices: [[i64; 4]; 2],
    pub eigenvalues: [[f64; 2]; 2],
    pub eigenvectors: [[[f64; 2]; 2]; 2],
    pub min_pairwise_sine: f64,
    pub hypothesis_ok: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cat() -> IntMatrix2 {
        IntMatrix2::new(2, 1, 1, 1).unwrap()
    }

    fn cat2() -> IntMatrix2 {
        IntMatrix2::new(1, 1, 1, 2).unwrap()
    }

    #[test]
    fn rejects_non_unimodular() {
        assert_eq!(
            IntMatrix2::new(2, 0, 0, 2),
            Err(Error::NotUnimodular { det: 4 })
        );
    }

    #[test]
    fn compose_and_invert() {
        let id = IntMatrix2::identity();
        assert_eq!(id.compose(&cat()), cat());
        assert_eq!(cat().inverse(), IntMatrix2::new(1, -1, -1, 2).unwrap());
        assert_eq!(cat().compose(&cat2()), IntMatrix2::new(3, 4, 2, 3).unwrap());
        assert_eq!(cat().compose(&cat().inverse()), id);
    }

    #[test]
    fn hyperbolicity_by_trace() {
        assert!(cat().is_hyperbolic());
        assert!(!IntMatrix2::new(1, 1, 0, 1).unwrap().is_hyperbolic());
        assert!(!IntMatrix2::new(0, -1, 1, 0).unwrap().is_hyperbolic());
        assert!(IntMatrix2::new(-3, 1, -1, 0).unwrap().is_hyperbolic());
    }

    #[test]
    fn eigen_data_of_standard_pair() {
        let golden = 0.618_033_988_749_894_8;
        let e1 = HyperbolicElement::new(cat()).unwrap();
        assert!((e1.lambda_u - 2.618_033_988_7).abs() < 1e-10);
        assert!((e1.v_u.y / e1.v_u.x - golden).abs() < 1e-12);
        assert!(e1.v_u.dot(&e1.v_s).abs() < 1e-15);
        assert!((e1.lambda_u * e1.lambda_s - 1.0).abs() < 1e-15);
        let e2 = HyperbolicElement::new(cat2()).unwrap();
        assert!((e2.lambda_u - 2.618_033_988_7).abs() < 1e-10);
        assert!((e2.v_u.y / e2.v_u.x - (1.0 + golden)).abs() < 1e-12);
        assert!(e1.reconstruction_error() < 1e-12);
        assert!(e2.reconstruction_error() < 1e-12);
    }

    #[test]
    fn negative_trace_eigen_data() {
        let m = IntMatrix2::new(-2, -1, -1, -1).unwrap();
        let e = HyperbolicElement::new(m).unwrap();
        assert!(e.lambda_u > 1.0 && e.lambda_s < 1.0);
        assert!(e.reconstruction_error() < 1e-12);
        assert_eq!(e.sign(), -1.0);
    }

    #[test]
    fn not_hyperbolic_error() {
        let m = IntMatrix2::new(1, 1, 0, 1).unwrap();
        assert_eq!(
            HyperbolicElement::new(m),
            Err(Error::NotHyperbolic { trace: 2 })
        );
    }

    #[test]
    fn pair_hypothesis() {
        let e1 = HyperbolicElement::new(cat()).unwrap();
        let e2 = HyperbolicElement::new(cat2()).unwrap();
        let cert = PairHypothesisCertificate::check(&e1, &e2);
        assert!((cert.min_pairwise_sine - 1.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!(cert.hypothesis_ok());

        let sq = HyperbolicElement::new(cat().pow(2)).unwrap();
        let c2 = PairHypothesisCertificate::check(&e1, &sq);
        assert_eq!(c2.min_pairwise_sine, 0.0);
        assert!(!c2.hypothesis_ok());

        let inv = HyperbolicElement::new(cat().inverse()).unwrap();
        assert_eq!(PairHypothesisCertificate::check(&e1, &inv).min_pairwise_sine, 0.0);
    }

    #[test]
    fn standard_action_examples() {
        let x = TorusPoint::new(0.5, 0.5);
        assert_eq!(cat().act(x), TorusPoint::new(0.5, 0.0));
        assert_eq!(cat().act(TorusPoint::new(0.25, 0.5)), TorusPoint::new(0.0, 0.75));
        assert_eq!(cat2().act(TorusPoint::new(0.0, 0.0)), TorusPoint::new(0.0, 0.0));
    }

    #[test]
    fn certificate_json_fields() {
        let e1 = HyperbolicElement::new(cat()).unwrap();
        let e2 = HyperbolicElement::new(cat2()).unwrap();
        let json = serde_json::to_value(PairHypothesisCertificate::check(&e1, &e2).to_report())
            .unwrap();
        for key in [
            "matrices",
            "eigenvalues",
            "eigenvectors",
            "min_pairwise_sine",
            "hypothesis_ok",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn group_action_on_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (m1, m2) = (cat(), cat2());
        let m12 = m1.compose(&m2);
        for _ in 0..1000 {
            let p = TorusPoint::new(rng.gen(), rng.gen());
            assert!(m12.act(p).distance(&m1.act(m2.act(p))) < 1e-14);
        }
    }

    fn sl2z() -> impl Strategy<Value = IntMatrix2> {
        // products of the elementary generators stay in SL(2,Z)
        prop::collection::vec(0u8..4, 0..6).prop_map(|word| {
            let gens = [
                IntMatrix2::new(1, 1, 0, 1).unwrap(),
                IntMatrix2::new(1, -1, 0, 1).unwrap(),
                IntMatrix2::new(1, 0, 1, 1).unwrap(),
                IntMatrix2::new(1, 0, -1, 1).unwrap(),
            ];
            word.iter()
                .fold(IntMatrix2::identity(), |m, &g| m.compose(&gens[g as usize]))
        })
    }

    proptest! {
        #[test]
        fn products_keep_determinant_one(m1 in sl2z(), m2 in sl2z()) {
            prop_assert_eq!(m1.compose(&m2).det(), 1);
            prop_assert_eq!(m1.inverse().det(), 1);
            prop_assert_eq!(m1.compose(&m1.inverse()), IntMatrix2::identity());
        }

        #[test]
        fn action_is_a_group_action(m1 in sl2z(), m2 in sl2z(), x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let p = TorusPoint::new(x, y);
            let lhs = m1.compose(&m2).act(p);
            let rhs = m1.act(m2.act(p));
            prop_assert!(lhs.distance(&rhs) < 1e-12);
        }

        #[test]
        fn eigen_reconstruction(m in sl2z()) {
            if let Ok(e) = HyperbolicElement::new(m) {
                let scale = m.entries().iter().map(|v| v.abs()).max().unwrap() as f64;
                prop_assert!(e.reconstruction_error() < 1e-12 * scale.max(1.0) * 4.0);
                prop_assert!((e.lambda_u * e.lambda_s - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn certificate_symmetric_and_inverse_invariant(m1 in sl2z(), m2 in sl2z()) {
            if let (Ok(e1), Ok(e2)) = (HyperbolicElement::new(m1), HyperbolicElement::new(m2)) {
                let a = PairHypothesisCertificate::check(&e1, &e2).min_pairwise_sine;
                let b = PairHypothesisCertificate::check(&e2, &e1).min_pairwise_sine;
                let c = PairHypothesisCertificate::check(&e1.inverse(), &e2).min_pairwise_sine;
                let d = PairHypothesisCertificate::check(&HyperbolicElement::new(m1.inverse()).unwrap(), &e2).min_pairwise_sine;
                prop_assert_eq!(a, b);
                prop_assert!((a - c).abs() < 1e-15);
                prop_assert!((a - d).abs() < 1e-12);
            }
        }
    }
}
