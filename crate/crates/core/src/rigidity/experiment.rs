use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conjugacy::{
    default_holder_scales, estimate_holder_exponent, solve_conjugacy, Conjugacy, HolderEstimate,
};
use crate::error::{Error, Result};
use crate::foliations::{compute_line_field, min_transversality_angle, FieldLabel, GraphParams, LineField};
use crate::fourier::FourierPerturbation;
use crate::geometry::{TorusPoint, Vec2};
use crate::lattice::{HyperbolicElement, IntMatrix2, PairHypothesisCertificate};
use crate::periodic::{compare_smooth_invariants, InvariantComparison};
use crate::torus_maps::{
    conjugated_action, verify_anosov_cones, ConeParams, ConeVerdict, Diffeo, MarkedAction, PerturbedMap,
    SharedMap,
};

use super::factorize::{factor_translation_numeric, ComposedTranslation, NumericFactorization};
use super::linearize::{linearize_translation_action, LinearizationResult, LinearizeParams};
use super::tangency::{tangency_propagation_check, PropagationFields, PropagationTable};
use super::translation::{
    translation_action_from_conjugacy, verify_action_regularity, LeafTranslation, RegularityGrid,
    RegularityReport, TranslationAction,
};

/// Which action the experiment is run on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ActionSpec {
    /// `G(γ) = φ∘γ∘φ⁻¹` with `φ = id + phi`.
    Conjugated { phi: FourierPerturbation },
    /// Only the first generator, `g₁ = A₁ + perturbation`.
    SingleGenerator { perturbation: FourierPerturbation },
}

impl ActionSpec {
    pub fn identity() -> Self {
        ActionSpec::Conjugated {
            phi: FourierPerturbation::zero(),
        }
    }

    /// Generic perturbation of the contrast run: three modes scaled to
    /// derivative bound 0.03.
    pub fn default_contrast() -> Self {
        let p = FourierPerturbation::sine([0, 1], [0.5, 0.0])
            .plus(&FourierPerturbation::sine([1, 0], [0.0, 0.5]))
            .plus(&FourierPerturbation::cosine([1, 1], [0.5, 0.0]))
            .with_deriv_bound(0.03);
        ActionSpec::SingleGenerator { perturbation: p }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Minimal angle between first unstable and second stable directions.
    pub transversality: f64,
    pub lemma3: f64,
    pub prop1: f64,
    pub jacobian: f64,
    pub periodic: f64,
    /// Periodic-data mismatch above which the marking is declared obstructed.
    pub obstruction_floor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            transversality: 0.05,
            lemma3: 1e-3,
            prop1: 1e-6,
            jacobian: 1e-3,
            periodic: 1e-6,
            obstruction_floor: 1e-4,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        for (key, v) in [
            ("transversality", self.transversality),
            ("lemma3", self.lemma3),
            ("prop1", self.prop1),
            ("jacobian", self.jacobian),
            ("periodic", self.periodic),
            ("obstruction_floor", self.obstruction_floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err((key.into(), format!("must be positive, got {v}")));
            }
        }
        if self.obstruction_floor < self.periodic {
            return Err((
                "obstruction_floor".into(),
                format!("{} is below the periodic threshold {}", self.obstruction_floor, self.periodic),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    pub grid: usize,
    pub field_iterations: usize,
    pub leaf_step: f64,
    pub solver_tol: f64,
    /// Largest leaf translation.
    pub eps: f64,
    /// σ-extent of the transversals used for linearization.
    pub half_width: f64,
    /// Linear base point of the transversals.
    pub anchor: [f64; 2],
    /// Base point of the tangency propagation table.
    pub basepoint: [f64; 2],
    pub heteroclinic_radius: i64,
    pub max_period: u32,
    /// Stable slide used for the numeric factorization.
    pub factor_slide: f64,
    pub factor_samples: usize,
    pub jacobian_samples: usize,
    pub jacobian_delta: f64,
    pub holder_samples: usize,
    pub cone_aperture: f64,
    /// Seed for sampled diagnostic points; supplied by the caller.
    #[serde(skip)]
    pub seed: u64,
    pub linearize: LinearizeParams,
    pub graph: GraphParams,
    pub regularity: RegularityGrid,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            grid: 256,
            field_iterations: 20,
            leaf_step: 1e-3,
            solver_tol: 1e-11,
            eps: 0.05,
            half_width: 0.075,
            anchor: [0.3, 0.4],
            basepoint: [0.2, 0.3],
            heteroclinic_radius: 1,
            max_period: 2,
            factor_slide: 0.04,
            factor_samples: 9,
            jacobian_samples: 16,
            jacobian_delta: 1e-4,
            holder_samples: 16,
            cone_aperture: 0.3,
            seed: 0,
            linearize: LinearizeParams::default(),
            graph: GraphParams::default(),
            regularity: RegularityGrid::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Smooth,
    Obstructed,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    AtLeast,
    AtMost,
    Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Report,
    Error,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub name: String,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub comparison: Comparison,
    pub status: Status,
    pub detail: Option<String>,
}

impl Diagnostic {
    pub fn judged(name: &str, value: f64, threshold: f64, comparison: Comparison) -> Self {
        let ok = match comparison {
            Comparison::AtLeast => value >= threshold,
            Comparison::AtMost => value <= threshold,
            Comparison::Report => true,
        };
        Self {
            name: name.into(),
            value: Some(value),
            threshold: Some(threshold),
            comparison,
            status: if ok { Status::Pass } else { Status::Fail },
            detail: None,
        }
    }

    pub fn report(name: &str, value: f64) -> Self {
        Self {
            name: name.into(),
            value: Some(value),
            threshold: None,
            comparison: Comparison::Report,
            status: Status::Report,
            detail: None,
        }
    }

    pub fn error(name: &str, err: &Error) -> Self {
        Self {
            name: name.into(),
            value: None,
            threshold: None,
            comparison: Comparison::Report,
            status: Status::Error,
            detail: Some(err.to_string()),
        }
    }

    pub fn skipped(name: &str, why: &str) -> Self {
        Self {
            name: name.into(),
            value: None,
            threshold: None,
            comparison: Comparison::Report,
            status: Status::Skipped,
            detail: Some(why.into()),
        }
    }

    fn with_detail(mut self, detail: String) -> Self {
        self.detail = Some(detail);
        self
    }

    fn failed(mut self, detail: String) -> Self {
        self.status = Status::Fail;
        self.detail = Some(detail);
        self
    }
}

/// Diagnostics every smooth verdict needs.
pub const REQUIRED_DIAGNOSTICS: [&str; 5] = [
    "transversality_min_angle",
    "lemma3_deviation",
    "prop1_affinity_residual",
    "jacobian_consistency",
    "periodic_max_mismatch",
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransversalityEntry {
    pub pair: [&'static str; 2],
    pub angle: f64,
    pub angle_deg: f64,
    pub location: TorusPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JacobianSample {
    pub point: TorusPoint,
    /// Largest entry of `J(δ) − J(δ/2)`.
    pub refinement: f64,
    /// Largest entry of `J(δ) − Dφ`, when the marking is known.
    pub marking_gap: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearizationSummary {
    pub transversal: String,
    pub regularity: Option<RegularityReport>,
    pub result: Option<LinearizationResult>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ExperimentTables {
    pub pair_sine: Option<f64>,
    pub cones: Vec<ConeVerdict>,
    pub transversality: Vec<TransversalityEntry>,
    pub propagation: Option<PropagationTable>,
    pub linearization: Vec<LinearizationSummary>,
    pub factorization: Option<NumericFactorization>,
    pub jacobian: Vec<JacobianSample>,
    pub periodic: Vec<InvariantComparison>,
    pub holder: Option<HolderEstimate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TeichmullerVerdict {
    pub action: String,
    pub transversality_min_angle: Option<f64>,
    pub lemma3_deviation: Option<f64>,
    pub prop1_affinity_residual: Option<f64>,
    pub jacobian_consistency: Option<f64>,
    pub jacobian_marking_gap: Option<f64>,
    pub periodic_max_mismatch: Option<f64>,
    pub holder_exponent: Option<f64>,
    pub verdict: Verdict,
    pub diagnostics: Vec<Diagnostic>,
    pub tables: ExperimentTables,
}

impl TeichmullerVerdict {
    pub fn diagnostic(&self, name: &str) -> Option<&Diagnostic> {
        self.diagnostics.iter().find(|d| d.name == name)
    }
}

/// Smooth when every required diagnostic is present and every judged
/// diagnostic passes; obstructed when periodic data disagree beyond the
/// floor; otherwise inconclusive.
pub fn decide(diagnostics: &[Diagnostic], periodic_mismatch: Option<f64>, thresholds: &Thresholds) -> Verdict {
    if periodic_mismatch.is_some_and(|m| m > thresholds.obstruction_floor) {
        return Verdict::Obstructed;
    }
    if diagnostics.iter().any(|d| matches!(d.status, Status::Error | Status::Fail)) {
        return Verdict::Inconclusive;
    }
    let all_present = REQUIRED_DIAGNOSTICS
        .iter()
        .all(|name| diagnostics.iter().any(|d| d.name == *name && d.status == Status::Pass));
    if all_present {
        Verdict::Smooth
    } else {
        Verdict::Inconclusive
    }
}

/// Four foliation fields of a two-generator action.
pub struct ActionFields {
    pub f1u: Arc<LineField>,
    pub f1s: Arc<LineField>,
    pub f2u: Arc<LineField>,
    pub f2s: Arc<LineField>,
}

pub fn compute_action_fields(g1: &SharedMap, g2: &SharedMap, n: usize, iterations: usize) -> Result<ActionFields> {
    let jobs = [
        (g1, FieldLabel::Unstable),
        (g1, FieldLabel::Stable),
        (g2, FieldLabel::Unstable),
        (g2, FieldLabel::Stable),
    ];
    let mut fields: Vec<Arc<LineField>> = Vec::with_capacity(4);
    let results: Vec<Result<LineField>> = {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|(g, label)| compute_line_field(g, *label, n, iterations))
            .collect()
    };
    for r in results {
        fields.push(Arc::new(r?));
    }
    Ok(ActionFields {
        f1u: fields[0].clone(),
        f1s: fields[1].clone(),
        f2u: fields[2].clone(),
        f2s: fields[3].clone(),
    })
}

/// Angles between the first unstable and second stable fields and between
/// the second unstable and first stable fields.
pub fn transversality_table(fields: &ActionFields) -> Result<Vec<TransversalityEntry>> {
    let mut out = Vec::new();
    for (pair, a, b) in [
        (["E1u", "E2s"], &fields.f1u, &fields.f2s),
        (["E2u", "E1s"], &fields.f2u, &fields.f1s),
    ] {
        let (angle, location) = min_transversality_angle(a, b)?;
        out.push(TransversalityEntry {
            pair,
            angle,
            angle_deg: angle.to_degrees(),
            location,
        });
    }
    Ok(out)
}

/// Translation action on the image of the linear leaf through `anchor` in
/// direction `v`.
pub fn transversal_action(
    h: Arc<Conjugacy>,
    v: Vec2,
    field: &LineField,
    params: &ExperimentParams,
) -> Result<LeafTranslation> {
    translation_action_from_conjugacy(
        h,
        Vec2::new(params.anchor[0], params.anchor[1]),
        v,
        field,
        params.eps,
        params.half_width,
        params.leaf_step,
    )
}

pub fn linearize_transversal(s: &LeafTranslation, params: &ExperimentParams) -> Result<LinearizationResult> {
    linearize_translation_action(s, s.param_of(0.0), s.domain(), &params.linearize)
}

/// Secant Jacobians of `h` at seeded sample points, at `δ` and `δ/2`.
pub fn jacobian_samples(h: &Conjugacy, marking: Option<&Diffeo>, params: &ExperimentParams) -> Vec<JacobianSample> {
    use rayon::prelude::*;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let points: Vec<Vec2> = (0..params.jacobian_samples.max(1))
        .map(|_| Vec2::new(rng.gen(), rng.gen()))
        .collect();
    let d = params.jacobian_delta;
    points
        .par_iter()
        .map(|&x| {
            let j1 = h.secant_jacobian(x, d);
            let j2 = h.secant_jacobian(x, 0.5 * d);
            JacobianSample {
                point: TorusPoint::from_lift(x),
                refinement: (j1 - j2).abs().max(),
                marking_gap: marking.map(|phi| (j1 - phi.jacobian(x)).abs().max()),
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub verdict: TeichmullerVerdict,
    /// Wall-clock seconds per stage, in execution order.
    pub timings: Vec<(String, f64)>,
}

struct Clock {
    start: Instant,
    timings: Vec<(String, f64)>,
}

impl Clock {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            timings: Vec::new(),
        }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.timings.push((name.into(), (now - self.start).as_secs_f64()));
        self.start = now;
    }
}

/// Runs every numerically checkable consequence of smooth rigidity on the
/// configured action and combines them into a verdict.
pub fn teichmuller_experiment(
    generators: [IntMatrix2; 2],
    action: &ActionSpec,
    params: &ExperimentParams,
    thresholds: &Thresholds,
) -> Result<ExperimentOutput> {
    if let Err((key, msg)) = thresholds.validate() {
        return Err(Error::InvalidArgument(format!("thresholds.{key}: {msg}")));
    }
    let e1 = HyperbolicElement::new(generators[0])?;
    let e2 = HyperbolicElement::new(generators[1])?;
    match action {
        ActionSpec::Conjugated { phi } => run_group(e1, e2, phi, params, thresholds),
        ActionSpec::SingleGenerator { perturbation } => run_single(e1, perturbation, params, thresholds),
    }
}

fn holder_diagnostic(h: &Conjugacy, e: &HyperbolicElement, params: &ExperimentParams, tables: &mut ExperimentTables) -> Diagnostic {
    match estimate_holder_exponent(h, e.v_u, &default_holder_scales(), params.holder_samples, params.seed) {
        Ok(est) => {
            tables.holder = Some(est);
            Diagnostic::report("holder_exponent", est.exponent)
        }
        Err(err) => Diagnostic::error("holder_exponent", &err),
    }
}

fn periodic_diagnostic(
    maps: &[(&SharedMap, &HyperbolicElement)],
    params: &ExperimentParams,
    thresholds: &Thresholds,
    tables: &mut ExperimentTables,
) -> (Diagnostic, Option<f64>) {
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for (g, e) in maps {
        match compare_smooth_invariants(g.as_ref(), e, params.max_period) {
            Ok(cmp) => {
                worst = worst.max(cmp.max_mismatch);
                notes.extend(cmp.failures.iter().cloned());
                tables.periodic.push(cmp);
            }
            Err(err) => return (Diagnostic::error("periodic_max_mismatch", &err), None),
        }
    }
    let mut d = Diagnostic::judged("periodic_max_mismatch", worst, thresholds.periodic, Comparison::AtMost);
    if !notes.is_empty() {
        d = d.failed(notes.join("; "));
    }
    (d, Some(worst))
}

fn cone_diagnostic(maps: &[(&SharedMap, &HyperbolicElement)], params: &ExperimentParams, tables: &mut ExperimentTables) -> Diagnostic {
    let mut margin = f64::INFINITY;
    for (g, e) in maps {
        match verify_anosov_cones(g.as_ref(), &ConeParams::for_element(e, params.cone_aperture)) {
            Ok(v) => {
                margin = margin.min(v.expansion_margin);
                tables.cones.push(v);
                if !v.anosov {
                    return Diagnostic::report("cone_expansion_margin", v.expansion_margin)
                        .failed("cone fields are not invariant".into());
                }
            }
            Err(err) => return Diagnostic::error("cone_expansion_margin", &err),
        }
    }
    Diagnostic::judged("cone_expansion_margin", margin, 1.0, Comparison::AtLeast)
}

fn run_group(
    e1: HyperbolicElement,
    e2: HyperbolicElement,
    phi: &FourierPerturbation,
    params: &ExperimentParams,
    thresholds: &Thresholds,
) -> Result<ExperimentOutput> {
    let mut clock = Clock::new();
    let mut tables = ExperimentTables::default();
    let mut diags = Vec::new();

    let cert = PairHypothesisCertificate::check(&e1, &e2);
    tables.pair_sine = Some(cert.min_pairwise_sine);
    let pair = Diagnostic::report("pair_min_sine", cert.min_pairwise_sine);
    diags.push(if cert.hypothesis_ok() {
        pair
    } else {
        pair.failed("pair hypothesis fails".into())
    });

    let marking = Diffeo::new(phi.clone())?;
    let group: MarkedAction = conjugated_action(marking.clone(), &[e1, e2])?;
    let (g1, g2) = (group.generator(0).clone(), group.generator(1).clone());
    diags.push(cone_diagnostic(&[(&g1, &e1), (&g2, &e2)], params, &mut tables));
    clock.lap("cones");

    let h = match solve_conjugacy(&e1, g1.clone(), params.grid, params.solver_tol) {
        Ok(h) => Arc::new(h),
        Err(err) => {
            diags.push(Diagnostic::error("conjugacy_residual", &err));
            return Ok(finish("conjugated", diags, None, tables, thresholds, clock));
        }
    };
    diags.push(Diagnostic::report("conjugacy_residual", h.residual()).with_detail(format!("{} sweeps", h.sweeps())));
    clock.lap("conjugacy");

    let fields = match compute_action_fields(&g1, &g2, params.grid, params.field_iterations) {
        Ok(f) => f,
        Err(err) => {
            diags.push(Diagnostic::error("foliation_fields", &err));
            return Ok(finish("conjugated", diags, None, tables, thresholds, clock));
        }
    };
    clock.lap("fields");

    match transversality_table(&fields) {
        Ok(rows) => {
            let min = rows.iter().map(|r| r.angle).fold(f64::INFINITY, f64::min);
            tables.transversality = rows;
            diags.push(Diagnostic::judged(
                "transversality_min_angle",
                min,
                thresholds.transversality,
                Comparison::AtLeast,
            ));
        }
        Err(err) => diags.push(Diagnostic::error("transversality_min_angle", &err)),
    }
    clock.lap("transversality");

    let pf = PropagationFields {
        f1u: &fields.f1u,
        f1s: &fields.f1s,
        f2s: &fields.f2s,
    };
    let z = Vec2::new(params.basepoint[0], params.basepoint[1]);
    let graph = GraphParams {
        step: params.leaf_step,
        ..params.graph
    };
    match tangency_propagation_check(pf, &e1, z, params.heteroclinic_radius, &graph) {
        Ok(table) => {
            let mut d = Diagnostic::judged("lemma3_deviation", table.max_transport_deviation, thresholds.lemma3, Comparison::AtMost);
            if table.tangency_events > 0 || !table.failures.is_empty() {
                d = d.failed(format!(
                    "{} tangency events, {} failures",
                    table.tangency_events,
                    table.failures.len()
                ));
            }
            diags.push(d);
            diags.push(Diagnostic::report("lemma3_slope_difference", table.max_slope_difference));
            diags.push(Diagnostic::report("tangency_events", table.tangency_events as f64));
            tables.propagation = Some(table);
        }
        Err(err) => diags.push(Diagnostic::error("lemma3_deviation", &err)),
    }
    clock.lap("lemma3");

    let mut prop1: Option<f64> = Some(0.0);
    let mut unstable_action = None;
    for (name, v, field) in [("unstable", e1.v_u, &fields.f1u), ("stable", e1.v_s, &fields.f1s)] {
        let mut summary = LinearizationSummary {
            transversal: name.into(),
            regularity: None,
            result: None,
        };
        let outcome = transversal_action(h.clone(), v, field, params).and_then(|s| {
            summary.regularity = Some(verify_action_regularity(&s, &params.regularity)?);
            let r = linearize_transversal(&s, params)?;
            Ok((s, r))
        });
        match outcome {
            Ok((s, r)) => {
                prop1 = prop1.map(|p| p.max(r.affinity_residual));
                diags.push(Diagnostic::report(&format!("alpha_{name}"), r.alpha));
                diags.push(Diagnostic::report(&format!("cocycle_defect_{name}"), r.cocycle_defect));
                if let Some(reg) = summary.regularity {
                    diags.push(Diagnostic::report(&format!("regularity_refinement_{name}"), reg.refinement_stability));
                }
                summary.result = Some(r);
                if name == "unstable" {
                    unstable_action = Some(Arc::new(s));
                }
            }
            Err(err) => {
                prop1 = None;
                diags.push(Diagnostic::error(&format!("prop1_{name}"), &err));
            }
        }
        tables.linearization.push(summary);
    }
    if let Some(p) = prop1 {
        diags.push(Diagnostic::judged("prop1_affinity_residual", p, thresholds.prop1, Comparison::AtMost));
    }
    clock.lap("prop1");

    if let Some(s) = unstable_action {
        let composed = ComposedTranslation::new(
            s,
            &e1,
            &e2,
            fields.f1u.clone(),
            fields.f1s.clone(),
            fields.f2s.clone(),
            params.leaf_step,
            1.0,
        )
        .and_then(|c| factor_translation_numeric(&c, &e1, &e2, params.factor_slide, params.factor_samples));
        match composed {
            Ok(f) => {
                diags.push(Diagnostic::report("factorization_deviation", f.result.numeric_deviation));
                diags.push(Diagnostic::report("factorization_t_mismatch", f.t_mismatch));
                tables.factorization = Some(f);
            }
            Err(err) => diags.push(Diagnostic::error("factorization_deviation", &err)),
        }
    }
    clock.lap("factorization");

    let samples = jacobian_samples(&h, Some(&marking), params);
    let refinement = samples.iter().map(|s| s.refinement).fold(0.0, f64::max);
    let gap = samples.iter().filter_map(|s| s.marking_gap).fold(0.0, f64::max);
    diags.push(Diagnostic::judged("jacobian_consistency", refinement, thresholds.jacobian, Comparison::AtMost));
    diags.push(Diagnostic::judged("jacobian_marking_gap", gap, thresholds.jacobian, Comparison::AtMost));
    tables.jacobian = samples;
    clock.lap("jacobian");

    let (d, mismatch) = periodic_diagnostic(&[(&g1, &e1), (&g2, &e2)], params, thresholds, &mut tables);
    diags.push(d);
    clock.lap("periodic");
    diags.push(holder_diagnostic(&h, &e1, params, &mut tables));
    clock.lap("holder");

    Ok(finish("conjugated", diags, mismatch, tables, thresholds, clock))
}

fn run_single(
    e1: HyperbolicElement,
    p: &FourierPerturbation,
    params: &ExperimentParams,
    thresholds: &Thresholds,
) -> Result<ExperimentOutput> {
    let mut clock = Clock::new();
    let mut tables = ExperimentTables::default();
    let mut diags = Vec::new();
    let g1: SharedMap = Arc::new(PerturbedMap::new(&e1, p.clone()));
    diags.push(cone_diagnostic(&[(&g1, &e1)], params, &mut tables));
    clock.lap("cones");

    let (d, mismatch) = periodic_diagnostic(&[(&g1, &e1)], params, thresholds, &mut tables);
    diags.push(d);
    clock.lap("periodic");

    match solve_conjugacy(&e1, g1.clone(), params.grid, params.solver_tol) {
        Ok(h) => {
            diags.push(Diagnostic::report("conjugacy_residual", h.residual()).with_detail(format!("{} sweeps", h.sweeps())));
            clock.lap("conjugacy");
            let samples = jacobian_samples(&h, None, params);
            let refinement = samples.iter().map(|s| s.refinement).fold(0.0, f64::max);
            diags.push(Diagnostic::judged("jacobian_consistency", refinement, thresholds.jacobian, Comparison::AtMost));
            tables.jacobian = samples;
            clock.lap("jacobian");
            diags.push(holder_diagnostic(&h, &e1, params, &mut tables));
            clock.lap("holder");
        }
        Err(err) => diags.push(Diagnostic::error("conjugacy_residual", &err)),
    }
    for name in ["transversality_min_angle", "lemma3_deviation", "prop1_affinity_residual"] {
        diags.push(Diagnostic::skipped(name, "single generator, no group structure"));
    }
    Ok(finish("single-generator", diags, mismatch, tables, thresholds, clock))
}

fn finish(
    action: &str,
    diagnostics: Vec<Diagnostic>,
    mismatch: Option<f64>,
    tables: ExperimentTables,
    thresholds: &Thresholds,
    clock: Clock,
) -> ExperimentOutput {
    let value = |name: &str| diagnostics.iter().find(|d| d.name == name).and_then(|d| d.value);
    let verdict = decide(&diagnostics, mismatch, thresholds);
    ExperimentOutput {
        verdict: TeichmullerVerdict {
            action: action.into(),
            transversality_min_angle: value("transversality_min_angle"),
            lemma3_deviation: value("lemma3_deviation"),
            prop1_affinity_residual: value("prop1_affinity_residual"),
            jacobian_consistency: value("jacobian_consistency"),
            jacobian_marking_gap: value("jacobian_marking_gap"),
            periodic_max_mismatch: value("periodic_max_mismatch"),
            holder_exponent: value("holder_exponent"),
            verdict,
            diagnostics,
            tables,
        },
        timings: clock.timings,
    }
}
