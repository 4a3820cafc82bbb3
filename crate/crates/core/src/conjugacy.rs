//! The conjugacy `h = id + u` solving `h ∘ A = g ∘ h`, plus smoothness
//! diagnostics built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{torus_distance, wrap_delta, Mat2, TorusPoint, Vec2};
use crate::interp::bicubic_periodic;
use crate::lattice::HyperbolicElement;
use crate::torus_maps::SharedMap;

pub const MAX_SWEEPS: usize = 500;
const STALL_LIMIT: usize = 10;

/// Periodic displacement `u` sampled on an `N × N` grid, `values[i * N + j]`
/// holding `u(i/N, j/N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    n: usize,
    values: Vec<Vec2>,
}

impl DisplacementField {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![Vec2::zeros(); n * n],
        }
    }

    pub fn from_fn<F: Fn(Vec2) -> Vec2 + Sync>(n: usize, f: F) -> Self {
        let values = (0..n * n)
            .into_par_iter()
            .map(|idx| f(grid_point(n, idx / n, idx % n)))
            .collect();
        Self { n, values }
    }

    pub fn grid_size(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[Vec2] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> Vec2 {
        self.values[(i % self.n) * self.n + (j % self.n)]
    }

    /// Bicubic periodic interpolation.
    pub fn eval(&self, x: Vec2) -> Vec2 {
        bicubic_periodic(&self.values, self.n, x)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[inline]
fn grid_point(n: usize, i: usize, j: usize) -> Vec2 {
    Vec2::new(i as f64 / n as f64, j as f64 / n as f64)
}

/// Coordinates in the eigenbasis: `u = ξ v_s + η v_u`.
#[derive(Clone, Copy, Debug)]
struct EigenFrame {
    basis: Mat2,
    dual: Mat2,
    mu_u: f64,
    mu_s: f64,
}

impl EigenFrame {
    fn new(a: &HyperbolicElement) -> Self {
        let basis = Mat2::from_columns(&[a.v_s, a.v_u]);
        let dual = basis.try_inverse().expect("eigenvectors are independent");
        Self {
            basis,
            dual,
            mu_u: a.mu_u(),
            mu_s: a.mu_s(),
        }
    }

    #[inline]
    fn split(&self, v: Vec2) -> (f64, f64) {
        let c = self.dual * v;
        (c.x, c.y)
    }

    #[inline]
    fn join(&self, xi: f64, eta: f64) -> Vec2 {
        self.basis * Vec2::new(xi, eta)
    }
}

/// A solved conjugacy with its linear model and target map.
#[derive(Clone)]
pub struct Conjugacy {
    displacement: DisplacementField,
    source: HyperbolicElement,
    target: SharedMap,
    residual: f64,
    sweeps: usize,
    depth: usize,
}

impl std::fmt::Debug for Conjugacy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Conjugacy")
            .field("n", &self.displacement.n)
            .field("matrix", &self.source.matrix)
            .field("target", &self.target.describe())
            .field("residual", &self.residual)
            .field("sweeps", &self.sweeps)
            .finish()
    }
}

/// Grid index of `A (i, j)/N`; exact because `A` is an integer matrix.
#[inline]
fn image_index(a: &crate::lattice::IntMatrix2, n: usize, i: usize, j: usize) -> usize {
    let [m00, m01, m10, m11] = a.entries();
    let n_i = n as i64;
    let (i, j) = (i as i64, j as i64);
    let ii = (m00 * i + m01 * j).rem_euclid(n_i) as usize;
    let jj = (m10 * i + m11 * j).rem_euclid(n_i) as usize;
    ii * n + jj
}

fn grid_residual(
    a: &HyperbolicElement,
    g: &SharedMap,
    u: &DisplacementField,
    forward: &[usize],
) -> f64 {
    let n = u.n;
    let am = a.matrix.to_mat2();
    (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let x = grid_point(n, idx / n, idx % n);
            let ux = u.values[idx];
            let lhs = am * ux + g.perturbation(x + ux);
            let rhs = u.values[forward[idx]];
            (0..2).map(|c| wrap_delta(rhs[c] - lhs[c]).abs()).fold(0.0, f64::max)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// Solves `u(Ax) = A u(x) + p(x + u(x))` on the `N`-grid, starting from `u ≡ 0`.
pub fn solve_conjugacy(
    a: &HyperbolicElement,
    g: SharedMap,
    n: usize,
    tol: f64,
) -> Result<Conjugacy> {
    solve_conjugacy_from(a, g, DisplacementField::zeros(n), tol)
}

/// Component-split fixed-point iteration from an initial field.
///
/// Each sweep updates the unstable component backward,
/// `η(x) = (η(Ax) − P_u(x)) / μ_u`, and the stable component forward,
/// `ξ(x) = μ_s ξ(A⁻¹x) + P_s(A⁻¹x)`, with `P = p(x + u(x))` from the previous
/// iterate.
pub fn solve_conjugacy_from(
    a: &HyperbolicElement,
    g: SharedMap,
    initial: DisplacementField,
    tol: f64,
) -> Result<Conjugacy> {
    if g.linear_part() != a.matrix {
        return Err(Error::DegreeMismatch {
            defect: f64::INFINITY,
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let n = initial.n;
    let frame = EigenFrame::new(a);
    let inv = a.matrix.inverse();
    let forward: Vec<usize> = (0..n * n)
        .map(|idx| image_index(&a.matrix, n, idx / n, idx % n))
        .collect();
    let backward: Vec<usize> = (0..n * n)
        .map(|idx| image_index(&inv, n, idx / n, idx % n))
        .collect();

    let mut u = initial;
    let mut residual = grid_residual(a, &g, &u, &forward);
    let mut sweeps = 0;
    let mut stalled = 0;
    while residual >= tol {
        if sweeps >= MAX_SWEEPS || stalled >= STALL_LIMIT {
            return Err(Error::SolverDiverged {
                sweeps,
                residual,
                sup_norm: u.sup_norm(),
            });
        }
        let push: Vec<(f64, f64)> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let x = grid_point(n, idx / n, idx % n);
                frame.split(g.perturbation(x + u.values[idx]))
            })
            .collect();
        let values: Vec<Vec2> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (_, eta_next) = frame.split(u.values[forward[idx]]);
                let eta = (eta_next - push[idx].1) / frame.mu_u;
                let prev = backward[idx];
                let (xi_prev, _) = frame.split(u.values[prev]);
                let xi = frame.mu_s * xi_prev + push[prev].0;
                frame.join(xi, eta)
            })
            .collect();
        u = DisplacementField { n, values };
        sweeps += 1;
        let sup = u.sup_norm();
        if !(sup < 0.5) {
            return Err(Error::SolverDiverged {
                sweeps,
                residual,
                sup_norm: sup,
            });
        }
        let next = grid_residual(a, &g, &u, &forward);
        if next < residual {
            stalled = 0;
        } else {
            stalled += 1;
        }
        residual = next;
    }
    let depth = (10.0 * std::f64::consts::LN_10 / a.lambda_u.ln()).ceil() as usize;
    Ok(Conjugacy {
        displacement: u,
        source: *a,
        target: g,
        residual,
        sweeps,
        depth,
    })
}

impl Conjugacy {
    pub fn displacement(&self) -> &DisplacementField {
        &self.displacement
    }

    pub fn source(&self) -> &HyperbolicElement {
        &self.source
    }

    pub fn target(&self) -> &SharedMap {
        &self.target
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn grid_size(&self) -> usize {
        self.displacement.n
    }

    /// `h(x)` in the lift from the interpolated displacement.
    pub fn eval_interpolated(&self, x: Vec2) -> Vec2 {
        x + self.displacement.eval(x)
    }

    /// `h(x)` in the lift, refined by solving the conjugacy equation along the
    /// orbit segment `A^k x`, `|k| ≤ depth`. Interpolation enters only at the
    /// segment ends, where its error is damped by `λ_u^{-depth}`.
    pub fn eval(&self, x: Vec2) -> Vec2 {
        x + self.refined_displacement(x)
    }

    pub fn eval_point(&self, x: TorusPoint) -> TorusPoint {
        TorusPoint::from_lift(self.eval(x.lift()))
    }

    fn refined_displacement(&self, x: Vec2) -> Vec2 {
        let m = self.depth;
        let a = &self.source.matrix;
        let inv = a.inverse();
        let frame = EigenFrame::new(&self.source);
        let len = 2 * m + 1;
        let mut orbit = vec![Vec2::zeros(); len];
        orbit[m] = TorusPoint::from_lift(x).lift();
        for k in m + 1..len {
            orbit[k] = TorusPoint::from_lift(a.apply_lift(orbit[k - 1])).lift();
        }
        for k in (0..m).rev() {
            orbit[k] = TorusPoint::from_lift(inv.apply_lift(orbit[k + 1])).lift();
        }
        let mut coords: Vec<(f64, f64)> = orbit
            .iter()
            .map(|&p| frame.split(self.displacement.eval(p)))
            .collect();
        let g = &self.target;
        let mut push: Vec<(f64, f64)> = vec![(0.0, 0.0); len];
        for _ in 0..60 {
            for k in 0..len {
                let u = frame.join(coords[k].0, coords[k].1);
                push[k] = frame.split(g.perturbation(orbit[k] + u));
            }
            let mut change: f64 = 0.0;
            for k in 1..len {
                let xi = frame.mu_s * coords[k - 1].0 + push[k - 1].0;
                change = change.max((xi - coords[k].0).abs());
                coords[k].0 = xi;
            }
            for k in (0..len - 1).rev() {
                let eta = (coords[k + 1].1 - push[k].1) / frame.mu_u;
                change = change.max((eta - coords[k].1).abs());
                coords[k].1 = eta;
            }
            if change < 1e-15 {
                break;
            }
        }
        frame.join(coords[m].0, coords[m].1)
    }

    /// `dist(h(Ax), g(h(x)))` on the torus, using the refined evaluation.
    pub fn residual_at(&self, x: Vec2) -> f64 {
        let lhs = self.eval(self.source.matrix.apply_lift(x));
        let rhs = self.target.lift(self.eval(x));
        torus_distance(lhs, rhs)
    }

    /// Sup of `residual_at` over the `m × m` grid.
    pub fn residual_on_grid(&self, m: usize) -> f64 {
        (0..m * m)
            .into_par_iter()
            .map(|idx| self.residual_at(grid_point(m, idx / m, idx % m)))
            .collect::<Vec<_>>()
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Sup over grid points of `|h(x) − f(x)|` on the torus.
    pub fn sup_distance_to<F: Fn(Vec2) -> Vec2 + Sync>(&self, f: F) -> f64 {
        let n = self.displacement.n;
        (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let x = grid_point(n, idx / n, idx % n);
                torus_distance(x + self.displacement.values[idx], f(x))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Centered secant Jacobian of `h` at scale `delta`.
    pub fn secant_jacobian(&self, x: Vec2, delta: f64) -> Mat2 {
        let mut j = Mat2::zeros();
        for c in 0..2 {
            let mut e = Vec2::zeros();
            e[c] = delta;
            let col = (self.eval(x + e) - self.eval(x - e)) / (2.0 * delta);
            j.set_column(c, &col);
        }
        j
    }

    /// JSON header `{N, matrix, residual}` of the field export.
    pub fn export_header(&self) -> serde_json::Value {
        serde_json::json!({
            "N": self.displacement.n,
            "matrix": self.source.matrix,
            "residual": self.residual,
        })
    }

    /// CSV with one row `(i, j, u1, u2)` per grid point.
    pub fn export_csv(&self) -> String {
        let n = self.displacement.n;
        let mut out = String::from("i,j,u1,u2\n");
        for i in 0..n {
            for j in 0..n {
                let v = self.displacement.at(i, j);
                out.push_str(&format!("{i},{j},{},{}\n", v.x, v.y));
            }
        }
        out
    }
}

/// Unit secant direction of `h(x + δv) − h(x)`.
pub fn pushforward_foliation_direction(
    h: &Conjugacy,
    direction: Vec2,
    x: TorusPoint,
    delta: f64,
) -> Result<Vec2> {
    if !(1e-6..=1e-2).contains(&delta) {
        return Err(Error::InvalidArgument(format!(
            "secant scale {delta} outside [1e-6, 1e-2]"
        )));
    }
    let v = direction.normalize();
    let base = x.lift();
    let secant = h.eval(base + delta * v) - h.eval(base);
    let length = secant.norm();
    if length < 1e-12 {
        return Err(Error::DegenerateSecant { length });
    }
    Ok(secant / length)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub exponent: f64,
    pub std_error: f64,
}

/// `2^-6, 2^-7, …, 2^-18`.
pub fn default_holder_scales() -> Vec<f64> {
    (6..=18).map(|k| 2f64.powi(-k)).collect()
}

/// Least-squares slope of `log |h(x + δv) − h(x)|` against `log δ`, averaged
/// over seeded random base points, clamped to `(0, 1.05]`.
pub fn estimate_holder_exponent(
    h: &Conjugacy,
    direction: Vec2,
    scales: &[f64],
    samples: usize,
    seed: u64,
) -> Result<HolderEstimate> {
    if scales.len() < 2 || scales.iter().any(|&s| !(1e-6..=1e-1).contains(&s)) {
        return Err(Error::InvalidArgument(
            "Hölder scales must be at least two values in [1e-6, 1e-1]".into(),
        ));
    }
    let v = direction.normalize();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bases: Vec<Vec2> = (0..samples.max(2))
        .map(|_| Vec2::new(rng.gen(), rng.gen()))
        .collect();
    let logs: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let mean_x = logs.iter().sum::<f64>() / logs.len() as f64;
    let sxx: f64 = logs.iter().map(|l| (l - mean_x).powi(2)).sum();
    let slopes: Vec<f64> = bases
        .par_iter()
        .map(|&x| {
            let hx = h.eval(x);
            let ys: Vec<f64> = scales
                .iter()
                .map(|&d| (h.eval(x + d * v) - hx).norm().max(1e-300).ln())
                .collect();
            let mean_y = ys.iter().sum::<f64>() / ys.len() as f64;
            logs.iter()
                .zip(&ys)
                .map(|(lx, ly)| (lx - mean_x) * (ly - mean_y))
                .sum::<f64>()
                / sxx
        })
        .collect();
    let k = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / k;
    let var = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(HolderEstimate {
        exponent: mean.clamp(f64::MIN_POSITIVE, 1.05),
        std_error: (var / k).sqrt(),
    })
}
