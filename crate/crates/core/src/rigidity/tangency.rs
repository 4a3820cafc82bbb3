use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::foliations::{
    heteroclinic_points, holonomy, integrate_leaf_centered, linspace, local_graph, verify_graph_transport,
    GraphMap, GraphParams, HeteroclinicPoint, HolonomyParams, LineField,
};
use crate::geometry::{line_angle_between, TorusPoint, Vec2};
use crate::lattice::HyperbolicElement;

/// Unstable and stable fields of the first generator with the stable field
/// of the second.
#[derive(Clone, Copy)]
pub struct PropagationFields<'a> {
    pub f1u: &'a LineField,
    pub f1s: &'a LineField,
    pub f2s: &'a LineField,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PropagationRow {
    pub k: [i64; 2],
    pub a: f64,
    pub b: f64,
    pub point: TorusPoint,
    /// Angle between the first unstable and second stable directions, radians.
    pub angle: f64,
    pub angle_deg: f64,
    pub measured_slope: f64,
    pub predicted_slope: f64,
    pub slope_difference: f64,
    pub transport_deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropagationTable {
    pub basepoint: TorusPoint,
    pub rows: Vec<PropagationRow>,
    pub min_angle: f64,
    pub max_slope_difference: f64,
    pub max_transport_deviation: f64,
    pub tangency_events: usize,
    pub failures: Vec<String>,
}

impl PropagationTable {
    /// Rows other than the base point itself.
    pub fn heteroclinic_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.k != [0, 0]).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "k1,k2,a,b,point_x,point_y,angle,angle_deg,measured_slope,predicted_slope,slope_difference,transport_deviation\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.k[0],
                r.k[1],
                r.a,
                r.b,
                r.point.x(),
                r.point.y(),
                r.angle,
                r.angle_deg,
                r.measured_slope,
                r.predicted_slope,
                r.slope_difference,
                r.transport_deviation
            ));
        }
        out
    }
}

fn transport_row(
    fields: PropagationFields<'_>,
    z: Vec2,
    theta_z: &GraphMap,
    p: &HeteroclinicPoint,
    params: &GraphParams,
) -> Result<PropagationRow> {
    let zp = p.via_unstable;
    let theta_zp = local_graph(zp, fields.f1u, fields.f1s, fields.f2s, params)?;
    let budget = HolonomyParams {
        step: params.step,
        budget: 1.5 * p.a.abs().max(p.b.abs()) + 0.5,
    };
    let (ulo, uhi) = theta_z.domain();
    let s_vals: Vec<f64> = theta_z.nodes().iter().map(|n| n.1).collect();
    let (smin, smax) = s_vals.iter().fold((0.0f64, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let pad = 0.1 * (smax - smin).max(params.eps);
    let (slo, shi) = (smin - pad, smax + pad);

    let half_u = uhi.abs().max(ulo.abs()) + params.eps;
    let half_s = shi.abs().max(slo.abs()) + params.eps;
    let wu_z = integrate_leaf_centered(fields.f1u, z, half_u, params.step)?;
    let ws_z = integrate_leaf_centered(fields.f1s, z, half_s, params.step)?;
    let wu_zp = integrate_leaf_centered(fields.f1u, p.via_stable, 2.0 * half_u, params.step)?;
    let ws_zp = integrate_leaf_centered(fields.f1s, p.via_unstable, 2.0 * half_s, params.step)?;

    let hol_u = holonomy(fields.f1s, &wu_z, &wu_zp, &linspace(ulo, uhi, params.samples), &budget)?;
    let hol_s = holonomy(fields.f1u, &ws_z, &ws_zp, &linspace(slo, shi, params.samples), &budget)?;
    let check = verify_graph_transport(theta_z, &theta_zp, &hol_s, &hol_u, 41)?;
    let angle = line_angle_between(fields.f1u.direction_at(zp), fields.f2s.direction_at(zp));
    Ok(PropagationRow {
        k: p.k,
        a: p.a,
        b: p.b,
        point: p.point,
        angle,
        angle_deg: angle.to_degrees(),
        measured_slope: check.measured_slope,
        predicted_slope: check.predicted_slope,
        slope_difference: (check.measured_slope - check.predicted_slope).abs(),
        transport_deviation: check.deviation,
    })
}

/// Transports the graph of the second stable foliation at `z` to every
/// heteroclinic point of `z` within `radius` and compares with the graph
/// measured there.
pub fn tangency_propagation_check(
    fields: PropagationFields<'_>,
    e1: &HyperbolicElement,
    z: Vec2,
    radius: i64,
    params: &GraphParams,
) -> Result<PropagationTable> {
    let theta_z = local_graph(z, fields.f1u, fields.f1s, fields.f2s, params)?;
    let (points, refine_failures) = heteroclinic_points(z, e1, fields.f1u, fields.f1s, radius, params.step)?;
    let angle_z = line_angle_between(fields.f1u.direction_at(z), fields.f2s.direction_at(z));
    let slope_z = theta_z.slope(0.0);
    let mut rows = vec![PropagationRow {
        k: [0, 0],
        a: 0.0,
        b: 0.0,
        point: TorusPoint::from_lift(z),
        angle: angle_z,
        angle_deg: angle_z.to_degrees(),
        measured_slope: slope_z,
        predicted_slope: slope_z,
        slope_difference: 0.0,
        transport_deviation: 0.0,
    }];
    let mut failures: Vec<String> = refine_failures.iter().map(|e| e.to_string()).collect();
    let mut tangency_events = refine_failures
        .iter()
        .filter(|e| matches!(e, Error::TangencySuspected { .. }))
        .count();
    let results: Vec<Result<PropagationRow>> = points
        .par_iter()
        .map(|p| transport_row(fields, z, &theta_z, p, params))
        .collect();
    for (p, r) in points.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                if matches!(e, Error::TangencySuspected { .. }) {
                    tangency_events += 1;
                }
                failures.push(format!("k = ({}, {}): {e}", p.k[0], p.k[1]));
            }
        }
    }
    let min_angle = rows.iter().map(|r| r.angle).fold(f64::INFINITY, f64::min);
    let max_slope_difference = rows.iter().map(|r| r.slope_difference).fold(0.0, f64::max);
    let max_transport_deviation = rows.iter().map(|r| r.transport_deviation).fold(0.0, f64::max);
    Ok(PropagationTable {
        basepoint: TorusPoint::from_lift(z),
        rows,
        min_angle,
        max_slope_difference,
        max_transport_deviation,
        tangency_events,
        failures,
    })
}
