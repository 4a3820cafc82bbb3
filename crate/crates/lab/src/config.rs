//! Experiment configuration: one JSON document with sections `group`,
//! `action`, `resolution`, `thresholds` and `experiment`.

use std::path::Path;

use anosov_core::fourier::FourierPerturbation;
use anosov_core::rigidity::{ActionSpec, ExperimentParams, SyntheticHomeo, Thresholds};
use anosov_core::{HyperbolicElement, IntMatrix2};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::LabError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupSection {
    pub generators: Vec<IntMatrix2>,
}

impl Default for GroupSection {
    fn default() -> Self {
        Self {
            generators: vec![
                IntMatrix2::new(2, 1, 1, 1).expect("unimodular"),
                IntMatrix2::new(1, 1, 1, 2).expect("unimodular"),
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionKind {
    /// Both generators conjugated by `φ = id + q`.
    Conjugated,
    /// The first generator alone, perturbed additively.
    SingleGenerator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeShape {
    Sin,
    Cos,
}

/// `amplitude · sin(2π k·x)` or `amplitude · cos(2π k·x)`, per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub k: [i32; 2],
    pub shape: ModeShape,
    pub amplitude: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionSection {
    pub kind: ActionKind,
    pub modes: Vec<ModeSpec>,
    /// When set, the modes are rescaled so that `Σ 4π|c||k|` equals it.
    pub deriv_bound: Option<f64>,
}

impl Default for ActionSection {
    fn default() -> Self {
        Self {
            kind: ActionKind::Conjugated,
            modes: Vec::new(),
            deriv_bound: None,
        }
    }
}

impl ActionSection {
    pub fn perturbation(&self) -> FourierPerturbation {
        let p = self.modes.iter().fold(FourierPerturbation::zero(), |acc, m| {
            let term = match m.shape {
                ModeShape::Sin => FourierPerturbation::sine(m.k, m.amplitude),
                ModeShape::Cos => FourierPerturbation::cosine(m.k, m.amplitude),
            };
            acc.plus(&term)
        });
        match self.deriv_bound {
            Some(b) if !p.is_zero() => p.with_deriv_bound(b),
            _ => p,
        }
    }

    pub fn spec(&self) -> ActionSpec {
        match self.kind {
            ActionKind::Conjugated => ActionSpec::Conjugated {
                phi: self.perturbation(),
            },
            ActionKind::SingleGenerator => ActionSpec::SingleGenerator {
                perturbation: self.perturbation(),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Json,
    CsvBundle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub output_dir: String,
    pub seed: u64,
    pub format: ReportFormat,
    /// Scalar homeomorphism for a synthetic `prop1` run.
    pub synthetic: Option<SyntheticHomeo>,
    /// Base value of the synthetic linearization.
    pub y0: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            name: "anosov-lab".into(),
            output_dir: "anosov-lab-out".into(),
            seed: 0,
            format: ReportFormat::Json,
            synthetic: None,
            y0: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabConfig {
    pub group: GroupSection,
    pub action: ActionSection,
    pub resolution: ExperimentParams,
    pub thresholds: Thresholds,
    pub experiment: ExperimentSection,
}

impl LabConfig {
    /// Experiment parameters with the configured seed applied.
    pub fn params(&self) -> ExperimentParams {
        ExperimentParams {
            seed: self.experiment.seed,
            ..self.resolution
        }
    }

    pub fn generators(&self) -> [IntMatrix2; 2] {
        [self.group.generators[0], self.group.generators[1]]
    }

    pub fn elements(&self) -> anosov_core::Result<[HyperbolicElement; 2]> {
        Ok([
            HyperbolicElement::new(self.group.generators[0])?,
            HyperbolicElement::new(self.group.generators[1])?,
        ])
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let err = |path: &str, message: String| LabError::Config {
            path: path.into(),
            message,
        };
        if self.group.generators.len() != 2 {
            return Err(err(
                "group.generators",
                format!("expected two generators, got {}", self.group.generators.len()),
            ));
        }
        for (i, m) in self.group.generators.iter().enumerate() {
            if !m.is_hyperbolic() {
                return Err(err(
                    &format!("group.generators[{i}]"),
                    format!("trace {} is not hyperbolic", m.trace()),
                ));
            }
        }

        let r = &self.resolution;
        if !r.grid.is_power_of_two() || !(64..=1024).contains(&r.grid) {
            return Err(err(
                "resolution.grid",
                format!("{} is not a power of two in [64, 1024]", r.grid),
            ));
        }
        for (path, v) in [
            ("resolution.leaf_step", r.leaf_step),
            ("resolution.solver_tol", r.solver_tol),
            ("resolution.eps", r.eps),
            ("resolution.half_width", r.half_width),
            ("resolution.jacobian_delta", r.jacobian_delta),
            ("resolution.cone_aperture", r.cone_aperture),
            ("resolution.linearize.h_y", r.linearize.h_y),
            ("resolution.linearize.spacing", r.linearize.spacing),
            ("resolution.graph.eps", r.graph.eps),
            ("resolution.graph.step", r.graph.step),
            ("resolution.graph.budget", r.graph.budget),
            ("resolution.regularity.h_y", r.regularity.h_y),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(err(path, format!("must be strictly positive, got {v}")));
            }
        }
        for (path, v, lo) in [
            ("resolution.field_iterations", r.field_iterations, 2),
            ("resolution.factor_samples", r.factor_samples, 3),
            ("resolution.jacobian_samples", r.jacobian_samples, 1),
            ("resolution.holder_samples", r.holder_samples, 2),
            ("resolution.linearize.t_count", r.linearize.t_count, 2),
            ("resolution.linearize.z_count", r.linearize.z_count, 2),
            ("resolution.regularity.t_count", r.regularity.t_count, 1),
            ("resolution.regularity.y_count", r.regularity.y_count, 2),
        ] {
            if v < lo {
                return Err(err(path, format!("must be at least {lo}, got {v}")));
            }
        }
        if r.graph.samples < 3 || r.graph.samples.is_multiple_of(2) {
            return Err(err("resolution.graph.samples", format!("{} must be odd and at least 3", r.graph.samples)));
        }
        if !(1..=3).contains(&r.heteroclinic_radius) {
            return Err(err("resolution.heteroclinic_radius", format!("{} outside 1..=3", r.heteroclinic_radius)));
        }
        if !(1..=8).contains(&r.max_period) {
            return Err(err("resolution.max_period", format!("{} outside 1..=8", r.max_period)));
        }
        if r.cone_aperture >= std::f64::consts::FRAC_PI_2 {
            return Err(err("resolution.cone_aperture", "must be below π/2".into()));
        }
        if !r.factor_slide.is_finite() {
            return Err(err("resolution.factor_slide", "must be finite".into()));
        }
        for (path, v) in [("resolution.anchor", r.anchor), ("resolution.basepoint", r.basepoint)] {
            if v.iter().any(|c| !c.is_finite()) {
                return Err(err(path, "coordinates must be finite".into()));
            }
        }

        if let Err((key, message)) = self.thresholds.validate() {
            return Err(err(&format!("thresholds.{key}"), message));
        }

        if let Some(b) = self.action.deriv_bound {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(err("action.deriv_bound", format!("must be non-negative, got {b}")));
            }
        }
        for (i, m) in self.action.modes.iter().enumerate() {
            if m.k == [0, 0] {
                return Err(err(&format!("action.modes[{i}].k"), "constant modes are not allowed".into()));
            }
            if m.amplitude.iter().any(|a| !a.is_finite()) {
                return Err(err(&format!("action.modes[{i}].amplitude"), "must be finite".into()));
            }
        }
        let bound = self.action.perturbation().deriv_bound();
        if self.action.kind == ActionKind::Conjugated && bound >= 1.0 {
            return Err(err(
                "action",
                format!("derivative bound {bound} does not define a diffeomorphism"),
            ));
        }

        if let Some(h) = &self.experiment.synthetic {
            h.validate().map_err(|e| err("experiment.synthetic", e.to_string()))?;
        }
        if !self.experiment.y0.is_finite() {
            return Err(err("experiment.y0", "must be finite".into()));
        }
        Ok(())
    }
}

/// Sets `value` at a dotted `path`, creating objects along the way. The
/// value is parsed as JSON and falls back to a plain string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), LabError> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| LabError::Config {
        path: assignment.into(),
        message: "override must look like key=value".into(),
    })?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(LabError::Config {
            path: path.into(),
            message: "empty key in override path".into(),
        });
    }
    let mut node = doc;
    for (i, key) in keys.iter().enumerate() {
        if !node.is_object() {
            return Err(LabError::Config {
                path: keys[..i].join("."),
                message: "cannot set a field inside a non-object value".into(),
            });
        }
        let map = node.as_object_mut().expect("checked object");
        if i + 1 == keys.len() {
            map.insert((*key).into(), value);
            return Ok(());
        }
        node = map
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Parses, applies overrides, and validates.
pub fn load_config(text: Option<&str>, overrides: &[String]) -> Result<LabConfig, LabError> {
    let mut doc: Value = match text {
        Some(t) => serde_json::from_str(t).map_err(|e| LabError::Config {
            path: "<document>".into(),
            message: e.to_string(),
        })?,
        None => Value::Object(Default::default()),
    };
    if !doc.is_object() {
        return Err(LabError::Config {
            path: "<document>".into(),
            message: "top level must be a JSON object".into(),
        });
    }
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let config: LabConfig = serde_path_to_error::deserialize(doc).map_err(|e| LabError::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config_file(path: Option<&Path>, overrides: &[String]) -> Result<LabConfig, LabError> {
    let text = match path {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|source| LabError::Io {
            path: p.to_path_buf(),
            source,
        })?),
        None => None,
    };
    load_config(text.as_deref(), overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = load_config(None, &[]).unwrap();
        let text = serde_json::to_string(&c.to_value()).unwrap();
        assert_eq!(load_config(Some(&text), &[]).unwrap(), c);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = load_config(
            None,
            &["resolution.grid=128".into(), "resolution.linearize.h_y=2e-5".into(), "experiment.name=run".into()],
        )
        .unwrap();
        assert_eq!(c.resolution.grid, 128);
        assert_eq!(c.resolution.linearize.h_y, 2e-5);
        assert_eq!(c.experiment.name, "run");
    }

    #[test]
    fn errors_name_the_offending_key() {
        let e = load_config(Some(r#"{"group": {"generators": [[2,1,1,1],[2,0,0,2]]}}"#), &[]).unwrap_err();
        assert!(matches!(&e, LabError::Config { path, .. } if path == "group.generators[1]"), "{e}");
        let e = load_config(None, &["resolution.grid=100".into()]).unwrap_err();
        assert!(matches!(&e, LabError::Config { path, .. } if path == "resolution.grid"));
        let e = load_config(None, &["resolution.solver_tol=0".into()]).unwrap_err();
        assert!(matches!(&e, LabError::Config { path, .. } if path == "resolution.solver_tol"));
        let e = load_config(None, &["resolution.gird=64".into()]).unwrap_err();
        assert!(matches!(&e, LabError::Config { path, .. } if path.starts_with("resolution")), "{e}");
        let e = load_config(None, &["thresholds.obstruction_floor=1e-9".into()]).unwrap_err();
        assert!(matches!(&e, LabError::Config { path, .. } if path == "thresholds.obstruction_floor"));
    }

    #[test]
    fn mode_specs_build_perturbations() {
        let c = load_config(
            Some(r#"{"action": {"modes": [{"k": [0, 1], "shape": "sin", "amplitude": [0.02, 0.0]}]}}"#),
            &[],
        )
        .unwrap();
        let p = c.action.perturbation();
        assert_eq!(p, FourierPerturbation::sine([0, 1], [0.02, 0.0]));
        let scaled = load_config(None, &[
            r#"action.modes=[{"k":[0,1],"shape":"sin","amplitude":[1,0]}]"#.into(),
            "action.deriv_bound=0.05".into(),
        ])
        .unwrap();
        assert!((scaled.action.perturbation().deriv_bound() - 0.05).abs() < 1e-15);
    }
}
