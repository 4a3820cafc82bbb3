//! Periodic orbits of torus maps and their multipliers, the smooth-conjugacy
//! invariants compared against the linear model.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{eigenvalues_2x2, Mat2, TorusPoint, Vec2};
use crate::lattice::{HyperbolicElement, IntMatrix2};
use crate::torus_maps::{newton_solve, TorusMap};

/// Maximal period accepted by the finder.
pub const MAX_PERIOD: u32 = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodicOrbitData {
    pub period: u32,
    pub points: Vec<TorusPoint>,
    /// Eigenvalues of `D(g^period)` at the first point, `[unstable, stable]`.
    pub multipliers: [f64; 2],
    /// `multipliers[0] · multipliers[1]`; equals one for area-preserving maps.
    pub det_product: f64,
    /// `|ln|μ_u| − n ln λ_u| / (n ln λ_u)`.
    pub mismatch: f64,
}

#[derive(Clone, Debug)]
pub struct PeriodicSearch {
    /// `|det(Aⁿ − I)|`.
    pub expected: usize,
    /// Distinct points of period dividing `n`, sorted.
    pub points: Vec<TorusPoint>,
    pub orbits: Vec<PeriodicOrbitData>,
    /// Seeds that did not converge, or converged onto an already-found point.
    pub failures: Vec<Error>,
}

/// Lattice vectors `k` with `(Aⁿ − I)⁻¹ k ∈ [0,1)²`; one per periodic point of
/// the linear map.
pub fn lattice_seeds(a: &IntMatrix2, n: u32) -> Vec<([i64; 2], Vec2)> {
    let p = a.pow(n);
    let [b00, b01, b10, b11] = p.entries();
    let (b00, b11) = (b00 - 1, b11 - 1);
    let det = b00 * b11 - b01 * b10;
    assert!(det != 0, "Aⁿ − I is singular");
    // x = adj(B) k / det
    let adj = [b11, -b01, -b10, b00];
    let corners = [(0, 0), (1, 0), (0, 1), (1, 1)];
    let imgs: Vec<(i64, i64)> = corners
        .iter()
        .map(|&(x, y)| (b00 * x + b01 * y, b10 * x + b11 * y))
        .collect();
    let (lo0, hi0) = (
        imgs.iter().map(|c| c.0).min().unwrap(),
        imgs.iter().map(|c| c.0).max().unwrap(),
    );
    let (lo1, hi1) = (
        imgs.iter().map(|c| c.1).min().unwrap(),
        imgs.iter().map(|c| c.1).max().unwrap(),
    );
    let inside = |num: i64| {
        if det > 0 {
            num >= 0 && num < det
        } else {
            num <= 0 && num > det
        }
    };
    let mut out = Vec::new();
    for k0 in lo0..=hi0 {
        for k1 in lo1..=hi1 {
            let n0 = adj[0] * k0 + adj[1] * k1;
            let n1 = adj[2] * k0 + adj[3] * k1;
            if inside(n0) && inside(n1) {
                out.push((
                    [k0, k1],
                    Vec2::new(n0 as f64 / det as f64, n1 as f64 / det as f64),
                ));
            }
        }
    }
    out
}

/// Lift of `gⁿ` and its Jacobian.
pub fn iterate_with_jacobian(g: &dyn TorusMap, x: Vec2, n: u32) -> (Vec2, Mat2) {
    let mut y = x;
    let mut d = Mat2::identity();
    for _ in 0..n {
        let (fy, j) = g.lift_with_jacobian(y);
        y = fy;
        d = j * d;
    }
    (y, d)
}

/// All periodic points of period dividing `n`, by Newton on the lift equation
/// `gⁿ(x) = x + k` seeded from the linear solutions.
pub fn find_periodic_points(
    g: &dyn TorusMap,
    a: &HyperbolicElement,
    n: u32,
) -> Result<PeriodicSearch> {
    if n == 0 || n > MAX_PERIOD {
        return Err(Error::InvalidArgument(format!(
            "period {n} outside 1..={MAX_PERIOD}"
        )));
    }
    if g.linear_part() != a.matrix {
        return Err(Error::DegreeMismatch {
            defect: f64::INFINITY,
        });
    }
    let seeds = lattice_seeds(&a.matrix, n);
    let expected = seeds.len();
    let solved: Vec<Result<TorusPoint>> = seeds
        .par_iter()
        .map(|&(k, seed)| {
            let kv = Vec2::new(k[0] as f64, k[1] as f64);
            let x = newton_solve(seed, |x| {
                let (y, d) = iterate_with_jacobian(g, x, n);
                (y - x - kv, d - Mat2::identity())
            })?;
            let (y, _) = iterate_with_jacobian(g, x, n);
            let residual = (y - x - kv).norm();
            let scale = a.lambda_u.powi(n as i32);
            if residual > 1e-12 * scale {
                return Err(Error::NewtonFailed {
                    seed_x: seed.x,
                    seed_y: seed.y,
                    residual,
                });
            }
            Ok(TorusPoint::from_lift(x))
        })
        .collect();

    let mut points: Vec<TorusPoint> = Vec::new();
    let mut failures = Vec::new();
    for (r, (_, seed)) in solved.into_iter().zip(&seeds) {
        match r {
            Ok(p) => {
                if points.iter().any(|q| q.distance(&p) < 1e-9) {
                    failures.push(Error::NewtonFailed {
                        seed_x: seed.x,
                        seed_y: seed.y,
                        residual: 0.0,
                    });
                } else {
                    points.push(p);
                }
            }
            Err(e) => failures.push(e),
        }
    }
    points.sort_by(|p, q| p.x().total_cmp(&q.x()).then(p.y().total_cmp(&q.y())));
    let orbits = group_orbits(g, a, &points);
    Ok(PeriodicSearch {
        expected,
        points,
        orbits,
        failures,
    })
}

fn nearest(points: &[TorusPoint], p: &TorusPoint) -> Option<usize> {
    points
        .iter()
        .enumerate()
        .map(|(i, q)| (i, q.distance(p)))
        .filter(|(_, d)| *d < 1e-8)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

fn group_orbits(
    g: &dyn TorusMap,
    a: &HyperbolicElement,
    points: &[TorusPoint],
) -> Vec<PeriodicOrbitData> {
    let mut used = vec![false; points.len()];
    let mut orbits = Vec::new();
    for start in 0..points.len() {
        if used[start] {
            continue;
        }
        let mut members = vec![start];
        let mut cur = points[start];
        loop {
            let next = g.evaluate(cur);
            match nearest(points, &next) {
                Some(i) if i == start => break,
                Some(i) if !members.contains(&i) => {
                    members.push(i);
                    cur = points[i];
                }
                _ => break,
            }
            if members.len() > MAX_PERIOD as usize {
                break;
            }
        }
        for &i in &members {
            used[i] = true;
        }
        let pts: Vec<TorusPoint> = members.iter().map(|&i| points[i]).collect();
        orbits.push(orbit_data(g, a, &pts));
    }
    orbits
}

/// Multipliers and mismatch for an orbit listed in dynamical order.
pub fn orbit_data(g: &dyn TorusMap, a: &HyperbolicElement, points: &[TorusPoint]) -> PeriodicOrbitData {
    let period = points.len() as u32;
    let mut d = Mat2::identity();
    for p in points {
        d = g.jacobian(p.lift()) * d;
    }
    let (mu_u, mu_s) = eigenvalues_2x2(&d);
    let expected = period as f64 * a.lambda_u.ln();
    PeriodicOrbitData {
        period,
        points: points.to_vec(),
        multipliers: [mu_u, mu_s],
        det_product: mu_u * mu_s,
        mismatch: (mu_u.abs().ln() - expected).abs() / expected,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantComparison {
    pub max_period: u32,
    pub orbits: Vec<PeriodicOrbitData>,
    pub max_mismatch: f64,
    /// `(period, found, expected)` for each period searched.
    pub counts: Vec<(u32, usize, usize)>,
    pub failures: Vec<String>,
}

impl InvariantComparison {
    /// CSV with one row per orbit, anchored at its first point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("period,point_x,point_y,mult_u,mult_s,mismatch\n");
        for o in &self.orbits {
            let p = o.points[0];
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                o.period,
                p.x(),
                p.y(),
                o.multipliers[0],
                o.multipliers[1],
                o.mismatch
            ));
        }
        out
    }
}

/// Orbits of every minimal period up to `max_period`, with their multiplier
/// mismatch against `λ_u`.
pub fn compare_smooth_invariants(
    g: &dyn TorusMap,
    a: &HyperbolicElement,
    max_period: u32,
) -> Result<InvariantComparison> {
    if max_period == 0 || max_period > MAX_PERIOD {
        return Err(Error::InvalidArgument(format!(
            "max period {max_period} outside 1..={MAX_PERIOD}"
        )));
    }
    let mut orbits = Vec::new();
    let mut counts = Vec::new();
    let mut failures = Vec::new();
    for n in 1..=max_period {
        let search = find_periodic_points(g, a, n)?;
        counts.push((n, search.points.len(), search.expected));
        failures.extend(search.failures.iter().map(|e| format!("period {n}: {e}")));
        orbits.extend(search.orbits.into_iter().filter(|o| o.period == n));
    }
    let max_mismatch = orbits.iter().map(|o| o.mismatch).fold(0.0, f64::max);
    Ok(InvariantComparison {
        max_period,
        orbits,
        max_mismatch,
        counts,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::FourierPerturbation;
    use crate::torus_maps::{ConjugatedMap, Diffeo, PerturbedMap};
    use std::sync::Arc;

    fn cat() -> HyperbolicElement {
        HyperbolicElement::new(IntMatrix2::new(2, 1, 1, 1).unwrap()).unwrap()
    }

    #[test]
    fn linear_counts() {
        let a = cat();
        let g = PerturbedMap::linear(a.matrix);
        let one = find_periodic_points(&g, &a, 1).unwrap();
        assert_eq!(one.points, vec![TorusPoint::new(0.0, 0.0)]);
        let two = find_periodic_points(&g, &a, 2).unwrap();
        assert_eq!(two.points.len(), 5);
        assert_eq!(two.orbits.iter().filter(|o| o.period == 2).count(), 2);
        for n in 1..=MAX_PERIOD {
            let trace = a.matrix.pow(n).trace();
            assert_eq!(lattice_seeds(&a.matrix, n).len() as i64, (trace - 2).abs());
        }
    }

    #[test]
    fn perturbed_counts_are_stable() {
        let a = cat();
        let p = FourierPerturbation::sine([0, 1], [1.0, 0.0])
            .plus(&FourierPerturbation::cosine([1, 1], [0.0, 1.0]))
            .with_deriv_bound(0.03);
        let g = PerturbedMap::new(&a, p);
        for n in 1..=4 {
            let s = find_periodic_points(&g, &a, n).unwrap();
            assert_eq!(s.points.len(), s.expected);
            assert!(s.failures.is_empty());
        }
    }

    #[test]
    fn conjugated_map_has_linear_multipliers() {
        let a = cat();
        let phi = Arc::new(Diffeo::new(FourierPerturbation::sine([0, 1], [0.02, 0.0])).unwrap());
        let g = ConjugatedMap::new(a.matrix, phi);
        let cmp = compare_smooth_invariants(&g, &a, 3).unwrap();
        assert!(cmp.max_mismatch < 1e-8);
        for o in &cmp.orbits {
            assert!((o.det_product - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn generic_perturbation_moves_fixed_point_multiplier() {
        let a = cat();
        let g = PerturbedMap::new(&a, FourierPerturbation::sine([0, 1], [0.03, 0.0]));
        let cmp = compare_smooth_invariants(&g, &a, 2).unwrap();
        assert!(cmp.max_mismatch > 1e-4);
    }

    #[test]
    fn multipliers_are_cyclic_invariants() {
        let a = cat();
        let p = FourierPerturbation::sine([1, 2], [0.004, 0.002]);
        let g = PerturbedMap::new(&a, p);
        let s = find_periodic_points(&g, &a, 3).unwrap();
        let orbit = s.orbits.iter().find(|o| o.period == 3).unwrap();
        for shift in 1..3 {
            let mut pts = orbit.points.clone();
            pts.rotate_left(shift);
            let other = orbit_data(&g, &a, &pts);
            assert!((other.multipliers[0] - orbit.multipliers[0]).abs() < 1e-10 * orbit.multipliers[0].abs());
            assert!((other.multipliers[1] - orbit.multipliers[1]).abs() < 1e-10);
        }
        for w in orbit.points.windows(2) {
            assert!(g.evaluate(w[0]).distance(&w[1]) < 1e-10);
        }
    }
}
