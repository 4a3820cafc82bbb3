//! Leaf translations, their linearization and factorization into holonomies,
//! tangency propagation, and the end-to-end smoothness experiment.

pub mod experiment;
pub mod factorize;
pub mod linearize;
pub mod tangency;
pub mod translation;

pub use factorize::{
    factor_translation_linear, factor_translation_numeric, ComposedTranslation, FactorizationResult,
    NumericFactorization,
};
pub use linearize::{linearize_translation_action, LinearizationResult, LinearizeParams};
pub use translation::{
    translation_action_from_conjugacy, verify_action_regularity, LeafTranslation, Provenance, RegularityGrid,
    RegularityReport, SyntheticAction, SyntheticHomeo, TranslationAction,
};
pub use tangency::{tangency_propagation_check, PropagationFields, PropagationRow, PropagationTable};
pub use experiment::{
    compute_action_fields, decide, jacobian_samples, linearize_transversal, teichmuller_experiment, transversal_action, transversality_table, ActionFields, ActionSpec,
    Comparison, Diagnostic, ExperimentOutput, ExperimentParams, ExperimentTables, Status, TeichmullerVerdict,
    Thresholds, Verdict, REQUIRED_DIAGNOSTICS,
};
