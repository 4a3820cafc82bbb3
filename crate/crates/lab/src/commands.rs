//! One function per subcommand. Each fills a [`RunReport`]; numerical
//! failures become diagnostics, never errors.

use std::sync::Arc;
use std::time::Instant;

use anosov_core::conjugacy::{solve_conjugacy, Conjugacy};
use anosov_core::foliations::{
    compute_line_field, integrate_leaf_centered, min_transversality_angle, FieldLabel, GraphParams, LineField,
};
use anosov_core::geometry::Vec2;
use anosov_core::lattice::PairHypothesisCertificate;
use anosov_core::periodic::compare_smooth_invariants;
use anosov_core::rigidity::{
    compute_action_fields, factor_translation_linear, factor_translation_numeric, jacobian_samples,
    linearize_translation_action, linearize_transversal, tangency_propagation_check, teichmuller_experiment,
    transversal_action, transversality_table, verify_action_regularity, ActionFields, ComposedTranslation,
    Comparison, Diagnostic, ExperimentParams, PropagationFields, Status, SyntheticAction, Verdict,
};
use anosov_core::{conjugated_action, Diffeo, HyperbolicElement, PerturbedMap, SharedMap};
use serde::Serialize;

use crate::config::{ActionKind, LabConfig};
use crate::report::{RunReport, RunStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Eigen,
    Conjugacy,
    Foliation,
    Transversality,
    Prop1,
    Factorize,
    Lemma3,
    PeriodicData,
    Teichmuller,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Eigen => "eigen",
            Subcommand::Conjugacy => "conjugacy",
            Subcommand::Foliation => "foliation",
            Subcommand::Transversality => "transversality",
            Subcommand::Prop1 => "prop1",
            Subcommand::Factorize => "factorize",
            Subcommand::Lemma3 => "lemma3",
            Subcommand::PeriodicData => "periodic-data",
            Subcommand::Teichmuller => "teichmuller",
        }
    }
}

/// Generators of the configured action, with the marking when there is one.
struct Action {
    elements: [HyperbolicElement; 2],
    maps: Vec<SharedMap>,
    marking: Option<Diffeo>,
}

impl Action {
    fn build(config: &LabConfig) -> anosov_core::Result<Self> {
        let elements = config.elements()?;
        match config.action.kind {
            ActionKind::Conjugated => {
                let marking = Diffeo::new(config.action.perturbation())?;
                let group = conjugated_action(marking.clone(), &elements)?;
                Ok(Self {
                    elements,
                    maps: vec![group.generator(0).clone(), group.generator(1).clone()],
                    marking: Some(marking),
                })
            }
            ActionKind::SingleGenerator => Ok(Self {
                elements,
                maps: vec![Arc::new(PerturbedMap::new(&elements[0], config.action.perturbation()))],
                marking: None,
            }),
        }
    }

    fn is_pair(&self) -> bool {
        self.maps.len() == 2
    }
}

struct Clock {
    start: Instant,
    laps: Vec<(String, f64)>,
}

impl Clock {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            laps: Vec::new(),
        }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.laps.push((name.into(), (now - self.start).as_secs_f64()));
        self.start = now;
    }
}

fn failed(mut d: Diagnostic, detail: String) -> Diagnostic {
    d.status = Status::Fail;
    d.detail = Some(detail);
    d
}

/// `complete` unless some diagnostic failed, errored or was skipped.
fn settle(report: &mut RunReport) {
    let clean = report
        .diagnostics
        .iter()
        .all(|d| matches!(d.status, Status::Pass | Status::Report));
    report.set_status(if clean { RunStatus::Complete } else { RunStatus::Inconclusive });
}

fn need_pair(report: &mut RunReport, action: &Action, names: &[&str]) -> bool {
    if !action.is_pair() {
        for name in names {
            report
                .diagnostics
                .push(Diagnostic::skipped(name, "needs a two-generator action"));
        }
    }
    action.is_pair()
}

fn solve(report: &mut RunReport, action: &Action, params: &ExperimentParams) -> Option<Arc<Conjugacy>> {
    match solve_conjugacy(&action.elements[0], action.maps[0].clone(), params.grid, params.solver_tol) {
        Ok(h) => Some(Arc::new(h)),
        Err(err) => {
            report.diagnostics.push(Diagnostic::error("conjugacy_residual", &err));
            None
        }
    }
}

fn pair_fields(report: &mut RunReport, action: &Action, params: &ExperimentParams) -> Option<ActionFields> {
    match compute_action_fields(&action.maps[0], &action.maps[1], params.grid, params.field_iterations) {
        Ok(f) => Some(f),
        Err(err) => {
            report.diagnostics.push(Diagnostic::error("foliation_fields", &err));
            None
        }
    }
}

pub fn run(sub: Subcommand, config: &LabConfig) -> RunReport {
    let mut report = RunReport::new(sub.name(), config.to_value());
    let mut clock = Clock::new();
    let action = match Action::build(config) {
        Ok(a) => a,
        Err(err) => {
            report.diagnostics.push(Diagnostic::error("action", &err));
            report.set_status(RunStatus::Inconclusive);
            return report;
        }
    };
    clock.lap("setup");
    match sub {
        Subcommand::Eigen => eigen(&mut report, &action),
        Subcommand::Conjugacy => conjugacy(&mut report, &action, config),
        Subcommand::Foliation => foliation(&mut report, &action, config),
        Subcommand::Transversality => transversality(&mut report, &action, config),
        Subcommand::Prop1 => prop1(&mut report, &action, config),
        Subcommand::Factorize => factorize(&mut report, &action, config),
        Subcommand::Lemma3 => lemma3(&mut report, &action, config),
        Subcommand::PeriodicData => periodic_data(&mut report, &action, config),
        Subcommand::Teichmuller => teichmuller(&mut report, config),
    }
    clock.lap(sub.name());
    let mut timings = clock.laps;
    timings.append(&mut report.timings);
    report.timings = timings;
    report
}

#[derive(Serialize)]
struct ElementRow {
    generator: usize,
    matrix: [i64; 4],
    trace: i64,
    lambda_u: f64,
    lambda_s: f64,
    v_u: [f64; 2],
    v_s: [f64; 2],
    reconstruction_error: f64,
}

fn eigen(report: &mut RunReport, action: &Action) {
    let [e1, e2] = &action.elements;
    let cert = PairHypothesisCertificate::check(e1, e2);
    let rows: Vec<ElementRow> = action
        .elements
        .iter()
        .enumerate()
        .map(|(i, e)| ElementRow {
            generator: i + 1,
            matrix: e.matrix.entries(),
            trace: e.matrix.trace(),
            lambda_u: e.lambda_u,
            lambda_s: e.lambda_s,
            v_u: [e.v_u.x, e.v_u.y],
            v_s: [e.v_s.x, e.v_s.y],
            reconstruction_error: e.reconstruction_error(),
        })
        .collect();
    let certificate = cert.to_report();
    report.summarize("min_pairwise_sine", certificate.min_pairwise_sine);
    report.summarize("hypothesis_ok", certificate.hypothesis_ok);
    report.summarize("certificate", &certificate);
    let d = Diagnostic::report("pair_min_sine", cert.min_pairwise_sine);
    report.diagnostics.push(if cert.hypothesis_ok() {
        d
    } else {
        let mut d = d;
        d.detail = Some("eigen-directions are not pairwise independent".into());
        d
    });
    report.table("elements", &rows);
    report.set_status(RunStatus::Complete);
}

/// Side of the residual check grid; prime, so its nodes avoid the solver grid.
const OFFGRID_RESIDUAL_SIDE: usize = 101;

fn conjugacy(report: &mut RunReport, action: &Action, config: &LabConfig) {
    let params = config.params();
    if let Some(h) = solve(report, action, &params) {
        report.summarize("header", h.export_header());
        report.summarize("sweeps", h.sweeps());
        report.summarize("displacement_sup_norm", h.displacement().sup_norm());
        report.diagnostics.push(Diagnostic::report("conjugacy_residual", h.residual()));
        report
            .diagnostics
            .push(Diagnostic::report("conjugacy_residual_offgrid", h.residual_on_grid(OFFGRID_RESIDUAL_SIDE)));
        let samples = jacobian_samples(&h, action.marking.as_ref(), &params);
        let refinement = samples.iter().map(|s| s.refinement).fold(0.0, f64::max);
        report.diagnostics.push(Diagnostic::judged(
            "jacobian_consistency",
            refinement,
            config.thresholds.jacobian,
            Comparison::AtMost,
        ));
        if let Some(phi) = &action.marking {
            let distance = h.sup_distance_to(|x| phi.forward(x));
            report.summarize("sup_distance_to_marking", distance);
            report.diagnostics.push(Diagnostic::report("sup_distance_to_marking", distance));
            let gap = samples.iter().filter_map(|s| s.marking_gap).fold(0.0, f64::max);
            report.diagnostics.push(Diagnostic::judged(
                "jacobian_marking_gap",
                gap,
                config.thresholds.jacobian,
                Comparison::AtMost,
            ));
        }
        report.table("jacobian", &samples);
        report.artifact("conjugacy.csv", h.export_csv());
    }
    settle(report);
}

#[derive(Serialize)]
struct FieldRow {
    field: &'static str,
    convergence: f64,
    invariance_error: Option<f64>,
    continuity: f64,
    sup_angle_to_linear: Option<f64>,
    leaf_tangency_error: Option<f64>,
    leaf_spacing_nonuniformity: Option<f64>,
}

fn foliation(report: &mut RunReport, action: &Action, config: &LabConfig) {
    let params = config.params();
    let z = Vec2::new(params.basepoint[0], params.basepoint[1]);
    let mut jobs = Vec::new();
    for (i, g) in action.maps.iter().enumerate() {
        let e = &action.elements[i];
        for (label, tag, v) in [(FieldLabel::Unstable, "u", e.v_u), (FieldLabel::Stable, "s", e.v_s)] {
            jobs.push((i + 1, tag, label, g, v));
        }
    }
    let mut rows = Vec::new();
    for (i, tag, label, g, v) in jobs {
        let name: &'static str = match (i, tag) {
            (1, "u") => "E1u",
            (1, _) => "E1s",
            (_, "u") => "E2u",
            _ => "E2s",
        };
        let field = match compute_line_field(g, label, params.grid, params.field_iterations) {
            Ok(f) => f,
            Err(err) => {
                report.diagnostics.push(Diagnostic::error(&format!("field_{name}"), &err));
                continue;
            }
        };
        let linear = LineField::constant(params.grid, v, label);
        let invariance = field.invariance_error();
        if let Err(err) = &invariance {
            report.diagnostics.push(Diagnostic::error(&format!("invariance_{name}"), err));
        }
        let leaf = integrate_leaf_centered(&field, z, 0.5, params.leaf_step);
        match &leaf {
            Ok(l) => report.artifact(&format!("leaf_{name}.csv"), l.to_csv()),
            Err(err) => report.diagnostics.push(Diagnostic::error(&format!("leaf_{name}"), err)),
        }
        report
            .diagnostics
            .push(Diagnostic::report(&format!("convergence_{name}"), field.convergence()));
        report.artifact(&format!("field_{name}.csv"), field.to_csv());
        rows.push(FieldRow {
            field: name,
            convergence: field.convergence(),
            invariance_error: invariance.ok(),
            continuity: field.continuity(),
            sup_angle_to_linear: field.sup_angle_to(&linear).ok(),
            leaf_tangency_error: leaf.as_ref().ok().map(|l| l.tangency_error(&field)),
            leaf_spacing_nonuniformity: leaf.as_ref().ok().map(|l| l.spacing_nonuniformity()),
        });
    }
    report.table("fields", &rows);
    settle(report);
}

fn linear_model_angle(action: &Action, n: usize) -> anosov_core::Result<f64> {
    let [e1, e2] = &action.elements;
    let a = LineField::constant(n, e1.v_u, FieldLabel::Unstable);
    let b = LineField::constant(n, e2.v_s, FieldLabel::Stable);
    Ok(min_transversality_angle(&a, &b)?.0)
}

fn transversality(report: &mut RunReport, action: &Action, config: &LabConfig) {
    let params = config.params();
    if let Ok(angle) = linear_model_angle(action, params.grid) {
        report.summarize("linear_model_angle_deg", angle.to_degrees());
    }
    if need_pair(report, action, &["transversality_min_angle"]) {
        if let Some(fields) = pair_fields(report, action, &params) {
            match transversality_table(&fields) {
                Ok(rows) => {
                    let min = rows.iter().map(|r| r.angle).fold(f64::INFINITY, f64::min);
                    report.summarize("min_angle", min);
                    report.summarize("min_angle_deg", min.to_degrees());
                    report.diagnostics.push(Diagnostic::judged(
                        "transversality_min_angle",
                        min,
                        config.thresholds.transversality,
                        Comparison::AtLeast,
                    ));
                    report.table("transversality", &rows);
                }
                Err(err) => report.diagnostics.push(Diagnostic::error("transversality_min_angle", &err)),
            }
        }
    }
    settle(report);
}

#[derive(Serialize)]
struct LinearizationRow {
    transversal: String,
    alpha: Option<f64>,
    alpha_oracle: Option<f64>,
    affinity_residual: Option<f64>,
    cocycle_defect: Option<f64>,
    alpha_subdomain_gap: Option<f64>,
    lattice_points: Option<usize>,
    regularity_refinement: Option<f64>,
    min_derivative: Option<f64>,
    max_derivative: Option<f64>,
}

fn prop1(report: &mut RunReport, action: &Action, config: &LabConfig) {
    let params = config.params();
    let tol = config.thresholds.prop1;
    if let Some(homeo) = config.experiment.synthetic {
        let y0 = config.experiment.y0;
        let x0 = homeo.inverse(y0);
        let eps = params.eps;
        let domain = (homeo.eval(x0 - 1.5 * eps), homeo.eval(x0 + 1.5 * eps));
        let oracle = homeo.derivative(x0);
        report.summarize("source", "synthetic");
        report.summarize("alpha_oracle", oracle);
        let outcome = SyntheticAction::new(homeo, eps, domain)
            .and_then(|s| linearize_translation_action(&s, y0, domain, &params.linearize));
        match outcome {
            Ok(r) => {
                let gap = (r.alpha_subdomains[0] - r.alpha_subdomains[1]).abs();
                report.summarize("alpha", r.alpha);
                report.diagnostics.push(Diagnostic::report("alpha", r.alpha));
                report.diagnostics.push(Diagnostic::judged(
                    "alpha_oracle_error",
                    (r.alpha - oracle).abs(),
                    tol,
                    Comparison::AtMost,
                ));
                report.diagnostics.push(Diagnostic::judged(
                    "prop1_affinity_residual",
                    r.affinity_residual,
                    tol,
                    Comparison::AtMost,
                ));
                report.diagnostics.push(Diagnostic::report("cocycle_defect", r.cocycle_defect));
                report.diagnostics.push(Diagnostic::report("alpha_subdomain_gap", gap));
                report.table(
                    "linearization",
                    &[LinearizationRow {
                        transversal: "synthetic".into(),
                        alpha: Some(r.alpha),
                        alpha_oracle: Some(oracle),
                        affinity_residual: Some(r.affinity_residual),
                        cocycle_defect: Some(r.cocycle_defect),
                        alpha_subdomain_gap: Some(gap),
                        lattice_points: Some(r.lattice_points),
                        regularity_refinement: None,
                        min_derivative: None,
                        max_derivative: None,
                    }],
                );
                report.artifact("g.csv", r.g_csv());
            }
            Err(err) => report.diagnostics.push(Diagnostic::error("prop1_affinity_residual", &err)),
        }
        settle(report);
        return;
    }

    report.summarize("source", "conjugacy");
    let Some(h) = solve(report, action, &params) else {
        settle(report);
        return;
    };
    let e1 = &action.elements[0];
    let anchor = Vec2::new(params.anchor[0], params.anchor[1]);
    let mut rows = Vec::new();
    let mut worst: Option<f64> = Some(0.0);
    for (name, v, label) in [("unstable", e1.v_u, FieldLabel::Unstable), ("stable", e1.v_s, FieldLabel::Stable)] {
        let oracle = action.marking.as_ref().map(|phi| (phi.jacobian(anchor) * v).norm());
        let mut row = LinearizationRow {
            transversal: name.into(),
            alpha: None,
            alpha_oracle: oracle,
            affinity_residual: None,
            cocycle_defect: None,
            alpha_subdomain_gap: None,
            lattice_points: None,
            regularity_refinement: None,
            min_derivative: None,
            max_derivative: None,
        };
        let outcome = compute_line_field(&action.maps[0], label, params.grid, params.field_iterations)
            .and_then(|field| transversal_action(h.clone(), v, &field, &params))
            .and_then(|s| {
                let reg = verify_action_regularity(&s, &params.regularity)?;
                row.regularity_refinement = Some(reg.refinement_stability);
                row.min_derivative = Some(reg.min_derivative);
                row.max_derivative = Some(reg.max_derivative);
                linearize_transversal(&s, &params)
            });
        match outcome {
            Ok(r) => {
                worst = worst.map(|w| w.max(r.affinity_residual));
                row.alpha = Some(r.alpha);
                row.affinity_residual = Some(r.affinity_residual);
                row.cocycle_defect = Some(r.cocycle_defect);
                row.alpha_subdomain_gap = Some((r.alpha_subdomains[0] - r.alpha_subdomains[1]).abs());
                row.lattice_points = Some(r.lattice_points);
                report.diagnostics.push(Diagnostic::report(&format!("alpha_{name}"), r.alpha));
                if let Some(o) = oracle {
                    report
                        .diagnostics
                        .push(Diagnostic::report(&format!("alpha_oracle_gap_{name}"), (r.alpha - o).abs()));
                }
                report
                    .diagnostics
                    .push(Diagnostic::report(&format!("cocycle_defect_{name}"), r.cocycle_defect));
                report.artifact(&format!("g_{name}.csv"), r.g_csv());
            }
            Err(err) => {
                worst = None;
                report.diagnostics.push(Diagnostic::error(&format!("prop1_{name}"), &err));
            }
        }
        rows.push(row);
    }
    if let Some(w) = worst {
        report.summarize("affinity_residual", w);
        report
            .diagnostics
            .push(Diagnostic::judged("prop1_affinity_residual", w, tol, Comparison::AtMost));
    }
    report.table("linearization", &rows);
    settle(report);
}

fn factorize(report: &mut RunReport, action: &Action, config: &LabConfig) {
    let params = config.params();
    let [e1, e2] = &action.elements;
    match factor_translation_linear(e1, e2, 1.0) {
        Ok(f) => {
            report.summarize("linear_unit_slide", f);
            report.table("linear", &[f]);
        }
        Err(err) => {
            report.diagnostics.push(Diagnostic::error("factorization_linear", &err));
            settle(report);
            return;
        }
    }
    if need_pair(report, action, &["factorization_deviation"]) {
        let fields = pair_fields(report, action, &params);
        let h = solve(report, action, &params);
        if let (Some(fields), Some(h)) = (fields, h) {
            let outcome = transversal_action(h, e1.v_u, &fields.f1u, &params).and_then(|s| {
                let composed = ComposedTranslation::new(
                    Arc::new(s),
                    e1,
                    e2,
                    fields.f1u.clone(),
                    fields.f1s.clone(),
                    fields.f2s.clone(),
                    params.leaf_step,
                    1.0,
                )?;
                let main = factor_translation_numeric(&composed, e1, e2, params.factor_slide, params.factor_samples)?;
                let zero = factor_translation_numeric(&composed, e1, e2, 0.0, params.factor_samples)?;
                Ok((main, zero))
            });
            match outcome {
                Ok((main, zero)) => {
                    report.summarize("numeric", main);
                    report
                        .diagnostics
                        .push(Diagnostic::report("factorization_deviation", main.result.numeric_deviation));
                    report
                        .diagnostics
                        .push(Diagnostic::report("factorization_t_mismatch", main.t_mismatch));
                    report
                        .diagnostics
                        .push(Diagnostic::report("factorization_derivative_deviation", main.derivative_deviation));
                    report
                        .diagnostics
                        .push(Diagnostic::report("factorization_zero_slide_deviation", zero.result.numeric_deviation));
                    report.table("numeric", &[main, zero]);
                }
                Err(err) => report.diagnostics.push(Diagnostic::error("factorization_deviation", &err)),
            }
        }
    }
    settle(report);
}

fn lemma3(report: &mut RunReport, action: &Action, config: &LabConfig) {
    let params = config.params();
    let [e1, e2] = &action.elements;
    let z = Vec2::new(params.basepoint[0], params.basepoint[1]);
    let graph = GraphParams {
        step: params.leaf_step,
        ..params.graph
    };

    let f1u = LineField::constant(params.grid, e1.v_u, FieldLabel::Unstable);
    let f1s = LineField::constant(params.grid, e1.v_s, FieldLabel::Stable);
    let f2s = LineField::constant(params.grid, e2.v_s, FieldLabel::Stable);
    let linear = PropagationFields {
        f1u: &f1u,
        f1s: &f1s,
        f2s: &f2s,
    };
    match tangency_propagation_check(linear, e1, z, params.heteroclinic_radius, &graph) {
        Ok(t) => {
            report.summarize("linear_heteroclinic_points", t.heteroclinic_rows());
            report.summarize("linear_max_deviation", t.max_transport_deviation);
            report
                .diagnostics
                .push(Diagnostic::report("lemma3_linear_deviation", t.max_transport_deviation));
            report.table("propagation_linear", &t.rows);
        }
        Err(err) => report.diagnostics.push(Diagnostic::error("lemma3_linear_deviation", &err)),
    }

    if need_pair(report, action, &["lemma3_deviation"]) {
        if let Some(fields) = pair_fields(report, action, &params) {
            let pf = PropagationFields {
                f1u: &fields.f1u,
                f1s: &fields.f1s,
                f2s: &fields.f2s,
            };
            match tangency_propagation_check(pf, e1, z, params.heteroclinic_radius, &graph) {
                Ok(t) => {
                    let mut d = Diagnostic::judged(
                        "lemma3_deviation",
                        t.max_transport_deviation,
                        config.thresholds.lemma3,
                        Comparison::AtMost,
                    );
                    if t.tangency_events > 0 || !t.failures.is_empty() {
                        d = failed(d, t.failures.join("; "));
                    }
                    report.diagnostics.push(d);
                    report
                        .diagnostics
                        .push(Diagnostic::report("lemma3_slope_difference", t.max_slope_difference));
                    report
                        .diagnostics
                        .push(Diagnostic::report("tangency_events", t.tangency_events as f64));
                    report.summarize("heteroclinic_points", t.heteroclinic_rows());
                    report.summarize("max_deviation", t.max_transport_deviation);
                    report.summarize("min_angle", t.min_angle);
                    report.summarize("tangency_events", t.tangency_events);
                    report.summarize("failures", &t.failures);
                    report.artifact("propagation.csv", t.to_csv());
                    report.table("propagation", &t.rows);
                }
                Err(err) => report.diagnostics.push(Diagnostic::error("lemma3_deviation", &err)),
            }
        }
    }
    settle(report);
}

#[derive(Serialize)]
struct CountRow {
    generator: usize,
    period: u32,
    found: usize,
    expected: usize,
}

#[derive(Serialize)]
struct OrbitRow {
    generator: usize,
    period: u32,
    point: [f64; 2],
    multipliers: [f64; 2],
    det_product: f64,
    mismatch: f64,
}

fn periodic_data(report: &mut RunReport, action: &Action, config: &LabConfig) {
    let params = config.params();
    let mut worst: Option<f64> = Some(0.0);
    let mut counts = Vec::new();
    let mut orbits = Vec::new();
    let mut notes = Vec::new();
    for (i, g) in action.maps.iter().enumerate() {
        match compare_smooth_invariants(g.as_ref(), &action.elements[i], params.max_period) {
            Ok(cmp) => {
                worst = worst.map(|w| w.max(cmp.max_mismatch));
                for &(period, found, expected) in &cmp.counts {
                    if found != expected {
                        notes.push(format!("generator {}: period {period} found {found} of {expected}", i + 1));
                    }
                    counts.push(CountRow {
                        generator: i + 1,
                        period,
                        found,
                        expected,
                    });
                }
                for o in &cmp.orbits {
                    orbits.push(OrbitRow {
                        generator: i + 1,
                        period: o.period,
                        point: [o.points[0].x(), o.points[0].y()],
                        multipliers: o.multipliers,
                        det_product: o.det_product,
                        mismatch: o.mismatch,
                    });
                }
                notes.extend(cmp.failures.iter().map(|f| format!("generator {}: {f}", i + 1)));
                report.artifact(&format!("periodic_g{}.csv", i + 1), cmp.to_csv());
            }
            Err(err) => {
                worst = None;
                report.diagnostics.push(Diagnostic::error("periodic_max_mismatch", &err));
            }
        }
    }
    report.table("counts", &counts);
    report.table("orbits", &orbits);
    let Some(mismatch) = worst else {
        settle(report);
        return;
    };
    report.summarize("max_mismatch", mismatch);
    let mut d = Diagnostic::judged(
        "periodic_max_mismatch",
        mismatch,
        config.thresholds.periodic,
        Comparison::AtMost,
    );
    if !notes.is_empty() {
        d = failed(d, notes.join("; "));
    }
    report.diagnostics.push(d);
    if mismatch > config.thresholds.obstruction_floor {
        report.set_status(RunStatus::Obstructed);
    } else {
        settle(report);
    }
}

fn teichmuller(report: &mut RunReport, config: &LabConfig) {
    let params = config.params();
    match teichmuller_experiment(config.generators(), &config.action.spec(), &params, &config.thresholds) {
        Ok(out) => {
            let v = out.verdict;
            report.summarize("verdict", v.verdict);
            report.summarize("action", &v.action);
            report.summarize("transversality_min_angle", v.transversality_min_angle);
            report.summarize("lemma3_deviation", v.lemma3_deviation);
            report.summarize("prop1_affinity_residual", v.prop1_affinity_residual);
            report.summarize("jacobian_consistency", v.jacobian_consistency);
            report.summarize("jacobian_marking_gap", v.jacobian_marking_gap);
            report.summarize("periodic_max_mismatch", v.periodic_max_mismatch);
            report.summarize("holder_exponent", v.holder_exponent);
            report.summarize("pair_min_sine", v.tables.pair_sine);
            let t = &v.tables;
            report.table("cones", &t.cones);
            report.table("transversality", &t.transversality);
            if let Some(p) = &t.propagation {
                report.summarize("tangency_events", p.tangency_events);
                report.summarize("heteroclinic_points", p.heteroclinic_rows());
                report.table("propagation", &p.rows);
            }
            let lin: Vec<_> = t
                .linearization
                .iter()
                .map(|s| {
                    serde_json::json!({
                        "transversal": s.transversal,
                        "alpha": s.result.as_ref().map(|r| r.alpha),
                        "affinity_residual": s.result.as_ref().map(|r| r.affinity_residual),
                        "cocycle_defect": s.result.as_ref().map(|r| r.cocycle_defect),
                        "regularity_refinement": s.regularity.map(|r| r.refinement_stability),
                    })
                })
                .collect();
            report.table("linearization", &lin);
            if let Some(f) = &t.factorization {
                report.table("factorization", &[f]);
            }
            report.table("jacobian", &t.jacobian);
            let orbits: Vec<_> = t
                .periodic
                .iter()
                .enumerate()
                .flat_map(|(i, c)| {
                    c.orbits.iter().map(move |o| OrbitRow {
                        generator: i + 1,
                        period: o.period,
                        point: [o.points[0].x(), o.points[0].y()],
                        multipliers: o.multipliers,
                        det_product: o.det_product,
                        mismatch: o.mismatch,
                    })
                })
                .collect();
            report.table("periodic", &orbits);
            if let Some(h) = &t.holder {
                report.table("holder", &[h]);
            }
            report.diagnostics = v.diagnostics;
            report.timings = out.timings;
            report.set_status(match v.verdict {
                Verdict::Smooth => RunStatus::Smooth,
                Verdict::Obstructed => RunStatus::Obstructed,
                Verdict::Inconclusive => RunStatus::Inconclusive,
            });
        }
        Err(err) => {
            report.summarize("verdict", Verdict::Inconclusive);
            report.diagnostics.push(Diagnostic::error("teichmuller", &err));
            report.set_status(RunStatus::Inconclusive);
        }
    }
}
