use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foliations::linspace;
use crate::interp::CubicHermite;
use crate::roots::bisect_then_secant;

use super::translation::TranslationAction;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearizeParams {
    /// Centered-difference step for `∂S/∂y`.
    pub h_y: f64,
    /// Simpson panel width.
    pub spacing: f64,
    /// Translations sampled in `(0, ε]` for the α fit.
    pub t_count: usize,
    /// Points sampled in the image of `g` for the α fit.
    pub z_count: usize,
}

impl Default for LinearizeParams {
    fn default() -> Self {
        Self {
            h_y: 1e-5,
            spacing: 1e-3,
            t_count: 9,
            z_count: 17,
        }
    }
}

impl LinearizeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_y > 0.0 && self.spacing > 0.0) || self.t_count < 2 || self.z_count < 2 {
            return Err(Error::InvalidArgument("linearization steps must be positive and lattices at least 2 wide".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearizationResult {
    pub alpha: f64,
    /// `sup |L(t,z) − z − α t|` over the fit lattice.
    pub affinity_residual: f64,
    pub y0: f64,
    pub domain: (f64, f64),
    pub g_table: Vec<(f64, f64)>,
    /// `sup |L(t+s, z) − L(s, L(t, z))|` over the lattice.
    pub cocycle_defect: f64,
    /// α fitted separately on `t ∈ (0, ε/2]` and `t ∈ (ε/2, ε]`.
    pub alpha_subdomains: [f64; 2],
    pub lattice_points: usize,
    #[serde(skip)]
    g: CubicHermite,
}

impl LinearizationResult {
    pub fn g(&self, y: f64) -> f64 {
        self.g.eval(y)
    }

    pub fn g_inverse(&self, z: f64) -> Option<f64> {
        self.g.inverse(z)
    }

    /// `L(t, z) = g(S(t, g⁻¹(z)))`, `None` where undefined.
    pub fn conjugated(&self, s: &dyn TranslationAction, t: f64, z: f64) -> Option<f64> {
        let y = self.g.inverse(z)?;
        let y1 = s.apply(t, y).ok()?;
        if !self.g.contains(y1) {
            return None;
        }
        Some(self.g.eval(y1))
    }

    pub fn g_csv(&self) -> String {
        let mut out = String::from("y,g\n");
        for (y, g) in &self.g_table {
            out.push_str(&format!("{y},{g}\n"));
        }
        out
    }
}

fn panel_nodes(y0: f64, lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let mut left = Vec::new();
    let mut k = 1;
    loop {
        let y = y0 - k as f64 * spacing;
        if y <= lo {
            if y0 > lo {
                left.push(lo);
            }
            break;
        }
        left.push(y);
        k += 1;
    }
    left.reverse();
    left.push(y0);
    let mut k = 1;
    loop {
        let y = y0 + k as f64 * spacing;
        if y >= hi {
            if y0 < hi {
                left.push(hi);
            }
            break;
        }
        left.push(y);
        k += 1;
    }
    left
}

/// Solves `S(t, y) = y0` for `t ∈ [−2ε, 2ε]`.
fn return_time(s: &dyn TranslationAction, y: f64, y0: f64) -> Result<f64> {
    let bound = 2.0 * s.epsilon();
    let mut failure = None;
    let root = bisect_then_secant(
        |t| match s.apply(t, y) {
            Ok(v) => v - y0,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        -bound,
        bound,
        1e-15,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    root.ok_or(Error::RootBracketFailed { y, lo: -bound, hi: bound })
}

fn integrand(s: &dyn TranslationAction, y: f64, y0: f64, h: f64) -> Result<f64> {
    let t = return_time(s, y, y0)?;
    Ok((s.apply(t, y + h)? - s.apply(t, y - h)?) / (2.0 * h))
}

fn fit_alpha(points: &[(f64, f64, f64)]) -> f64 {
    let num: f64 = points.iter().map(|&(t, z, l)| t * (l - z)).sum();
    let den: f64 = points.iter().map(|&(t, _, _)| t * t).sum();
    num / den
}

/// Builds `g(y) = ∫_{y0}^{y} ∂S/∂y′(t(y′), y′) dy′` by composite Simpson,
/// then fits `L(t, z) = g∘S(t,·)∘g⁻¹(z) ≈ z + α t`.
pub fn linearize_translation_action(
    s: &dyn TranslationAction,
    y0: f64,
    domain: (f64, f64),
    params: &LinearizeParams,
) -> Result<LinearizationResult> {
    params.validate()?;
    let (lo, hi) = domain;
    if !(lo < y0 && y0 < hi) {
        return Err(Error::InvalidArgument(format!("y0 = {y0} outside ({lo}, {hi})")));
    }
    let nodes = panel_nodes(y0, lo, hi, params.spacing);
    let mids: Vec<f64> = nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let f_nodes: Vec<f64> = nodes
        .par_iter()
        .map(|&y| integrand(s, y, y0, params.h_y))
        .collect::<Result<_>>()?;
    let f_mids: Vec<f64> = mids
        .par_iter()
        .map(|&y| integrand(s, y, y0, params.h_y))
        .collect::<Result<_>>()?;
    for (&y, &f) in nodes.iter().zip(&f_nodes).chain(mids.iter().zip(&f_mids)) {
        if !(f > 0.0) {
            return Err(Error::NonMonotoneG { y });
        }
    }
    let i0 = nodes.iter().position(|&y| y == y0).expect("y0 is a node");
    let mut g = vec![0.0; nodes.len()];
    let panel = |k: usize| (nodes[k + 1] - nodes[k]) / 6.0 * (f_nodes[k] + 4.0 * f_mids[k] + f_nodes[k + 1]);
    for k in i0..nodes.len() - 1 {
        g[k + 1] = g[k] + panel(k);
    }
    for k in (0..i0).rev() {
        g[k] = g[k + 1] - panel(k);
    }
    if !g.windows(2).all(|w| w[1] > w[0]) {
        let k = g.windows(2).position(|w| w[1] <= w[0]).unwrap_or(0);
        return Err(Error::NonMonotoneG { y: nodes[k] });
    }
    let g_table: Vec<(f64, f64)> = nodes.iter().copied().zip(g.iter().copied()).collect();
    let map = CubicHermite::with_slopes(nodes, g.clone(), f_nodes);
    let mut result = LinearizationResult {
        alpha: 0.0,
        affinity_residual: 0.0,
        y0,
        domain,
        g_table,
        cocycle_defect: 0.0,
        alpha_subdomains: [0.0; 2],
        lattice_points: 0,
        g: map,
    };

    let eps = s.epsilon();
    let ts: Vec<f64> = linspace(0.0, eps, params.t_count + 1)[1..].to_vec();
    let zs = linspace(g[0], g[g.len() - 1], params.z_count);
    let lattice: Vec<(f64, f64)> = ts.iter().flat_map(|&t| zs.iter().map(move |&z| (t, z))).collect();
    let points: Vec<(f64, f64, f64)> = lattice
        .par_iter()
        .map(|&(t, z)| result.conjugated(s, t, z).map(|l| (t, z, l)))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    if points.len() < 2 {
        return Err(Error::DomainMismatch);
    }
    result.lattice_points = points.len();
    result.alpha = fit_alpha(&points);
    result.affinity_residual = points
        .iter()
        .map(|&(t, z, l)| (l - z - result.alpha * t).abs())
        .fold(0.0, f64::max);
    let half = 0.5 * eps;
    let lower: Vec<_> = points.iter().copied().filter(|p| p.0 <= half + 1e-15).collect();
    let upper: Vec<_> = points.iter().copied().filter(|p| p.0 > half + 1e-15).collect();
    if lower.is_empty() || upper.is_empty() {
        return Err(Error::DomainMismatch);
    }
    result.alpha_subdomains = [fit_alpha(&lower), fit_alpha(&upper)];

    let pairs: Vec<(f64, f64, f64)> = ts
        .iter()
        .flat_map(|&t| ts.iter().map(move |&u| (t, u)))
        .filter(|&(t, u)| t + u <= eps + 1e-15)
        .flat_map(|(t, u)| zs.iter().map(move |&z| (t, u, z)))
        .collect();
    let defects: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|&(t, u, z)| {
            let direct = result.conjugated(s, t + u, z)?;
            let composed = result.conjugated(s, u, result.conjugated(s, t, z)?)?;
            Some((direct - composed).abs())
        })
        .collect();
    result.cocycle_defect = defects.into_iter().flatten().fold(0.0, f64::max);
    Ok(result)
}
