use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{cross, line_angle_between, Vec2};
use crate::interp::CubicHermite;
use crate::roots::illinois;

use super::leaf::{oriented, rk4_step, LeafSegment, DEFAULT_LEAF_STEP};
use super::line_field::LineField;

/// Crossing angles below this raise [`Error::TangencySuspected`].
pub const TANGENCY_ANGLE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolonomyParams {
    pub step: f64,
    /// Maximal arc length travelled along a leaf before giving up.
    pub budget: f64,
}

impl Default for HolonomyParams {
    fn default() -> Self {
        Self {
            step: DEFAULT_LEAF_STEP,
            budget: 4.0,
        }
    }
}

/// Where the leaf through a point first meets a transversal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub param: f64,
    pub point: Vec2,
    pub angle: f64,
    pub travelled: f64,
}

fn finish_crossing(target: &LeafSegment, point: Vec2, heading: Vec2, travelled: f64, hint: Option<usize>) -> Result<Crossing> {
    let pr = target.project_near(point, hint);
    if !target.contains_param(pr.param) {
        return Err(Error::LeafEscaped { budget: travelled });
    }
    let angle = line_angle_between(heading, pr.tangent);
    if angle < TANGENCY_ANGLE {
        return Err(Error::TangencySuspected { angle });
    }
    Ok(Crossing {
        param: pr.param,
        point: pr.point,
        angle,
        travelled,
    })
}

/// Slides `start` along the leaf of `field` until it crosses `target`.
///
/// The heading is chosen so that the signed distance to `target` decreases in
/// magnitude; the crossing is located by a sign change followed by an
/// Illinois root on the last step length.
pub fn slide_to(field: &LineField, start: Vec2, target: &LeafSegment, params: &HolonomyParams) -> Result<Crossing> {
    let first = target.project(start);
    let dir = field.direction_at(start);
    if first.signed_distance == 0.0 {
        return finish_crossing(target, start, dir, 0.0, Some(first.vertex));
    }
    let rate = cross(first.tangent, dir);
    let mut heading = if rate * first.signed_distance > 0.0 { -dir } else { dir };
    let mut p = start;
    let mut d = first.signed_distance;
    let mut hint = Some(first.vertex);
    let mut travelled = 0.0;
    let h = params.step;
    while travelled <= params.budget {
        let (q, hd) = rk4_step(field, p, heading, h)?;
        let pr = target.project_near(q, hint);
        hint = Some(pr.vertex);
        let dq = pr.signed_distance;
        if dq == 0.0 {
            return finish_crossing(target, q, hd, travelled + h, hint);
        }
        if dq.signum() != d.signum() {
            let sub = |tau: f64| -> f64 {
                match rk4_step(field, p, heading, tau) {
                    Ok((x, _)) => target.project_near(x, hint).signed_distance,
                    Err(_) => f64::NAN,
                }
            };
            let tau = illinois(sub, 0.0, h, 1e-15, 1e-15).ok_or(Error::LeafEscaped { budget: travelled })?;
            let (x, _) = rk4_step(field, p, heading, tau)?;
            let hx = oriented(field, x, heading)?;
            return finish_crossing(target, x, hx, travelled + tau, hint);
        }
        p = q;
        heading = hd;
        d = dq;
        travelled += h;
    }
    Err(Error::LeafEscaped {
        budget: params.budget,
    })
}

/// Holonomy between two transversals, sampled and interpolated by a monotone
/// cubic.
#[derive(Clone, Debug)]
pub struct HolonomyMap {
    samples: Vec<(f64, f64)>,
    map: CubicHermite,
    inverse: CubicHermite,
    min_crossing_angle: f64,
}

impl HolonomyMap {
    pub fn from_samples(samples: Vec<(f64, f64)>, min_crossing_angle: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument("holonomy needs at least two samples".into()));
        }
        let xs: Vec<f64> = samples.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = samples.iter().map(|p| p.1).collect();
        let inc = ys.windows(2).all(|w| w[1] > w[0]);
        let dec = ys.windows(2).all(|w| w[1] < w[0]);
        if !(inc || dec) || !xs.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::NonMonotone);
        }
        let map = CubicHermite::monotone(xs.clone(), ys.clone());
        let (ix, iy) = if inc {
            (ys, xs)
        } else {
            (ys.into_iter().rev().collect(), xs.into_iter().rev().collect())
        };
        let inverse = CubicHermite::monotone(ix, iy);
        Ok(Self {
            samples,
            map,
            inverse,
            min_crossing_angle,
        })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn domain(&self) -> (f64, f64) {
        self.map.domain()
    }

    /// Image interval, ordered increasingly.
    pub fn range(&self) -> (f64, f64) {
        self.inverse.domain()
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.map.eval(s)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.map.derivative(s)
    }

    /// Inverse through the monotone interpolant of the swapped samples.
    pub fn inverse(&self, s_prime: f64) -> f64 {
        self.inverse.eval(s_prime)
    }

    pub fn inverse_derivative(&self, s_prime: f64) -> f64 {
        self.inverse.derivative(s_prime)
    }

    pub fn min_crossing_angle(&self) -> f64 {
        self.min_crossing_angle
    }

    /// Max deviation of the samples from their least-squares line.
    pub fn affinity_residual(&self) -> f64 {
        let n = self.samples.len() as f64;
        let mx = self.samples.iter().map(|p| p.0).sum::<f64>() / n;
        let my = self.samples.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = self.samples.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = self.samples.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        self.samples
            .iter()
            .map(|p| (p.1 - my - slope * (p.0 - mx)).abs())
            .fold(0.0, f64::max)
    }

    /// CSV rows `(s, s_prime)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,s_prime\n");
        for (s, t) in &self.samples {
            out.push_str(&format!("{s},{t}\n"));
        }
        out
    }
}

/// Holonomy of `field` from `tau1` to `tau2`, sampled at the increasing
/// parameters `samples` of `tau1`.
pub fn holonomy(
    field: &LineField,
    tau1: &LeafSegment,
    tau2: &LeafSegment,
    samples: &[f64],
    params: &HolonomyParams,
) -> Result<HolonomyMap> {
    let crossings: Vec<Result<Crossing>> = samples
        .par_iter()
        .map(|&s| slide_to(field, tau1.point_at(s), tau2, params))
        .collect();
    let mut pairs = Vec::with_capacity(samples.len());
    let mut min_angle = f64::INFINITY;
    for (s, c) in samples.iter().zip(crossings) {
        let c = c?;
        min_angle = min_angle.min(c.angle);
        pairs.push((*s, c.param));
    }
    HolonomyMap::from_samples(pairs, min_angle)
}

/// `count` equally spaced values in `[lo, hi]`, symmetric about zero when the
/// interval is.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let m = count.max(2) - 1;
    (0..=m)
        .map(|k| {
            let w = k as f64 / m as f64;
            (1.0 - w) * lo + w * hi
        })
        .collect()
}
