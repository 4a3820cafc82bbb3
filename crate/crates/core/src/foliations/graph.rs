use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cross, line_angle_between, TorusPoint, Vec2};
use crate::interp::CubicHermite;

use super::holonomy::{linspace, slide_to, HolonomyMap, HolonomyParams};
use super::leaf::{integrate_leaf_centered, LeafSegment, DEFAULT_LEAF_STEP};
use super::line_field::LineField;

/// Minimal angle between the graphed field and the stable frame at the base
/// point.
pub const MIN_CHART_ANGLE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphParams {
    /// The graph must cover `u ∈ [-eps, eps]`.
    pub eps: f64,
    /// Odd number of sampled points on the graphed leaf.
    pub samples: usize,
    pub step: f64,
    pub budget: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            eps: 0.05,
            samples: 21,
            step: DEFAULT_LEAF_STEP,
            budget: 1.0,
        }
    }
}

impl GraphParams {
    pub(crate) fn holonomy(&self) -> HolonomyParams {
        HolonomyParams {
            step: self.step,
            budget: self.budget,
        }
    }
}

/// The local leaf of one foliation written as `s = θ(u)` in the coordinates
/// given by the frame leaves through the base point.
#[derive(Clone, Debug)]
pub struct GraphMap {
    basepoint: Vec2,
    nodes: Vec<(f64, f64)>,
    map: CubicHermite,
}

impl GraphMap {
    pub fn basepoint(&self) -> TorusPoint {
        TorusPoint::from_lift(self.basepoint)
    }

    pub fn basepoint_lift(&self) -> Vec2 {
        self.basepoint
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    pub fn domain(&self) -> (f64, f64) {
        self.map.domain()
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.map.eval(u)
    }

    pub fn slope(&self, u: f64) -> f64 {
        self.map.derivative(u)
    }

    /// The identically zero graph on `[lo, hi]`.
    pub fn zero(basepoint: Vec2, lo: f64, hi: f64) -> Self {
        let xs = linspace(lo, hi, 3);
        Self {
            basepoint,
            nodes: xs.iter().map(|&u| (u, 0.0)).collect(),
            map: CubicHermite::parabolic(xs, vec![0.0; 3]),
        }
    }
}

/// Frame leaves through a base point, shared by graph and transport
/// computations.
#[derive(Clone, Debug)]
pub struct LocalFrame {
    pub unstable: LeafSegment,
    pub stable: LeafSegment,
}

impl LocalFrame {
    pub fn new(z: Vec2, frame_u: &LineField, frame_s: &LineField, half_u: f64, half_s: f64, step: f64) -> Result<Self> {
        Ok(Self {
            unstable: integrate_leaf_centered(frame_u, z, half_u, step)?,
            stable: integrate_leaf_centered(frame_s, z, half_s, step)?,
        })
    }
}

/// `θ_z`: the leaf of `target` through `z` as a graph over the `frame_u` leaf,
/// in coordinates `(u, s)` given by holonomy along `frame_s` onto the
/// `frame_u` leaf and along `frame_u` onto the `frame_s` leaf.
pub fn local_graph(
    z: Vec2,
    frame_u: &LineField,
    frame_s: &LineField,
    target: &LineField,
    params: &GraphParams,
) -> Result<GraphMap> {
    let du = frame_u.direction_at(z);
    let ds = frame_s.direction_at(z);
    let dt = target.direction_at(z);
    let angle = line_angle_between(dt, ds);
    if angle < MIN_CHART_ANGLE {
        return Err(Error::TangencySuspected { angle });
    }
    if params.samples < 3 || params.samples.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "graph sample count {} must be odd and at least 3",
            params.samples
        )));
    }
    // dt = α du + β ds
    let det = cross(du, ds);
    let alpha = cross(dt, ds) / det;
    let beta = cross(du, dt) / det;
    let r_max = 1.25 * params.eps / alpha.abs();
    let half_u = 2.5 * params.eps;
    let half_s = 1.5 * (beta / alpha).abs() * 1.25 * params.eps + 2.0 * params.eps;
    let frame = LocalFrame::new(z, frame_u, frame_s, half_u, half_s, params.step)?;
    let leaf = integrate_leaf_centered(target, z, r_max, params.step)?;
    graph_on_frame(z, &frame, &leaf, frame_u, frame_s, r_max, params)
}

pub(crate) fn graph_on_frame(
    z: Vec2,
    frame: &LocalFrame,
    leaf: &LeafSegment,
    frame_u: &LineField,
    frame_s: &LineField,
    r_max: f64,
    params: &GraphParams,
) -> Result<GraphMap> {
    let hp = params.holonomy();
    let half = (params.samples / 2) as i64;
    let mut nodes = Vec::with_capacity(params.samples);
    for k in -half..=half {
        let r = r_max * k as f64 / half as f64;
        let p = leaf.point_at(r);
        let u = slide_to(frame_s, p, &frame.unstable, &hp)?.param;
        let s = slide_to(frame_u, p, &frame.stable, &hp)?.param;
        nodes.push((u, s));
    }
    if nodes.windows(2).all(|w| w[1].0 < w[0].0) {
        nodes.reverse();
    }
    if !nodes.windows(2).all(|w| w[1].0 > w[0].0) {
        return Err(Error::NonMonotone);
    }
    let lo = nodes[0].0;
    let hi = nodes.last().unwrap().0;
    if lo > -params.eps || hi < params.eps {
        return Err(Error::ChartOverflow {
            needed: params.eps,
            lo,
            hi,
        });
    }
    let map = CubicHermite::parabolic(
        nodes.iter().map(|p| p.0).collect(),
        nodes.iter().map(|p| p.1).collect(),
    );
    Ok(GraphMap {
        basepoint: z,
        nodes,
        map,
    })
}

/// Outcome of comparing `θ_z′` with `hol_s ∘ θ_z ∘ hol_u⁻¹`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransportCheck {
    pub deviation: f64,
    pub measured_slope: f64,
    pub predicted_slope: f64,
    pub samples: usize,
}

/// Sup over the common domain of `|θ_z′(t) − hol_s(θ_z(hol_u⁻¹(t)))|`.
///
/// `hol_u` maps the unstable frame leaf at `z` to the one at `z′` (sliding
/// along stable leaves); `hol_s` maps the stable frame leaf at `z` to the one
/// at `z′` (sliding along unstable leaves).
pub fn verify_graph_transport(
    theta_z: &GraphMap,
    theta_zp: &GraphMap,
    hol_s: &HolonomyMap,
    hol_u: &HolonomyMap,
    count: usize,
) -> Result<TransportCheck> {
    let (a, b) = theta_z.domain();
    let (ha, hb) = hol_u.domain();
    let (lo, hi) = (a.max(ha), b.min(hb));
    if !(lo < hi) {
        return Err(Error::DomainMismatch);
    }
    let (ia, ib) = (hol_u.eval(lo), hol_u.eval(hi));
    let (ta, tb) = theta_zp.domain();
    let (lo_t, hi_t) = (ia.min(ib).max(ta), ia.max(ib).min(tb));
    if !(lo_t < hi_t) {
        return Err(Error::DomainMismatch);
    }
    let (sa, sb) = hol_s.domain();
    let mut deviation: f64 = 0.0;
    let mut used = 0;
    for t in linspace(lo_t, hi_t, count.max(2)) {
        let w = hol_u.inverse(t);
        let v = theta_z.eval(w);
        if v < sa || v > sb {
            continue;
        }
        deviation = deviation.max((theta_zp.eval(t) - hol_s.eval(v)).abs());
        used += 1;
    }
    if used == 0 {
        return Err(Error::DomainMismatch);
    }
    let w0 = hol_u.inverse(0.0);
    let predicted_slope =
        hol_s.derivative(theta_z.eval(w0)) * theta_z.slope(w0) * hol_u.inverse_derivative(0.0);
    Ok(TransportCheck {
        deviation,
        measured_slope: theta_zp.slope(0.0),
        predicted_slope,
        samples: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foliations::line_field::FieldLabel;
    use crate::lattice::{HyperbolicElement, IntMatrix2};

    fn pair() -> (HyperbolicElement, HyperbolicElement) {
        (
            HyperbolicElement::new(IntMatrix2::new(2, 1, 1, 1).unwrap()).unwrap(),
            HyperbolicElement::new(IntMatrix2::new(1, 1, 1, 2).unwrap()).unwrap(),
        )
    }

    #[test]
    fn linear_graph_slope_is_change_of_basis() {
        let (e1, e2) = pair();
        let fu = LineField::constant(32, e1.v_u, FieldLabel::Unstable);
        let fs = LineField::constant(32, e1.v_s, FieldLabel::Stable);
        let t = LineField::constant(32, e2.v_s, FieldLabel::Stable);
        let z = Vec2::new(0.3, 0.6);
        let g = local_graph(z, &fu, &fs, &t, &GraphParams::default()).unwrap();
        // v2s = a v1u + b v1s
        let det = cross(e1.v_u, e1.v_s);
        let a = cross(e2.v_s, e1.v_s) / det;
        let b = cross(e1.v_u, e2.v_s) / det;
        assert_eq!(g.eval(0.0), 0.0);
        for u in [-0.05, -0.01, 0.02, 0.05] {
            assert!((g.eval(u) - b / a * u).abs() < 1e-10);
        }
        assert!((g.slope(0.0).abs() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn graphing_the_unstable_axis_gives_zero() {
        let (e1, _) = pair();
        let fu = LineField::constant(32, e1.v_u, FieldLabel::Unstable);
        let fs = LineField::constant(32, e1.v_s, FieldLabel::Stable);
        let g = local_graph(Vec2::new(0.1, 0.2), &fu, &fs, &fu, &GraphParams::default()).unwrap();
        for (_, s) in g.nodes() {
            assert!(s.abs() < 1e-12);
        }
        assert!(matches!(
            local_graph(Vec2::new(0.1, 0.2), &fu, &fs, &fs, &GraphParams::default()),
            Err(Error::TangencySuspected { .. })
        ));
    }

    #[test]
    fn zero_graphs_transport_to_zero() {
        let z = GraphMap::zero(Vec2::zeros(), -0.05, 0.05);
        let id = HolonomyMap::from_samples(vec![(-0.1, -0.1), (0.0, 0.0), (0.1, 0.1)], 1.0).unwrap();
        let check = verify_graph_transport(&z, &z, &id, &id, 21).unwrap();
        assert_eq!(check.deviation, 0.0);
    }
}
