use thiserror::Error;

/// Every failure mode surfaced by the laboratory.
///
/// Numerical failures carry the measured quantity that tripped them so that
/// experiment drivers can record them in diagnostic tables instead of crashing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix has determinant {det}, expected 1")]
    NotUnimodular { det: i64 },

    #[error("matrix with trace {trace} is not hyperbolic (|trace| <= 2)")]
    NotHyperbolic { trace: i64 },

    #[error("perturbation derivative bound {bound} >= 1; id + q is not guaranteed to be a diffeomorphism")]
    NotADiffeo { bound: f64 },

    #[error("map is not homotopic to its declared linear part (defect {defect:e})")]
    DegreeMismatch { defect: f64 },

    #[error("cone test inconclusive: expansion margin {margin} within 1e-6 of 1")]
    Inconclusive { margin: f64 },

    #[error("conjugacy solver diverged after {sweeps} sweeps (residual {residual:e}, sup|u| {sup_norm})")]
    SolverDiverged {
        sweeps: usize,
        residual: f64,
        sup_norm: f64,
    },

    #[error("secant length {length:e} below 1e-12")]
    DegenerateSecant { length: f64 },

    #[error("Newton iteration failed to converge from seed ({seed_x}, {seed_y}), last residual {residual:e}")]
    NewtonFailed {
        seed_x: f64,
        seed_y: f64,
        residual: f64,
    },

    #[error("line field not converged: max angular change {residual:e} after {iters} iterations")]
    NotConverged { residual: f64, iters: usize },

    #[error("leaf orientation ambiguous: heading turned by {angle} rad in one step")]
    SignAmbiguity { angle: f64 },

    #[error("leaf escaped: no crossing of the target transversal within {budget} arc length")]
    LeafEscaped { budget: f64 },

    #[error("tangency suspected: crossing angle {angle:e} rad below 0.01")]
    TangencySuspected { angle: f64 },

    #[error("leaf left the chart: needed parameter {needed}, available [{lo}, {hi}]")]
    ChartOverflow { needed: f64, lo: f64, hi: f64 },

    #[error("heteroclinic refinement failed for k = ({k1}, {k2}): residual {residual:e}")]
    RefinementFailed { k1: i64, k2: i64, residual: f64 },

    #[error("composed holonomy/graph domain is empty")]
    DomainMismatch,

    #[error("could not bracket t(y) for y = {y} in [{lo}, {hi}]")]
    RootBracketFailed { y: f64, lo: f64, hi: f64 },

    #[error("linearizing coordinate g is not strictly monotone near y = {y}")]
    NonMonotoneG { y: f64 },

    #[error("holonomy samples are not strictly monotone")]
    NonMonotone,

    #[error("singular 2x2 system (determinant {det:e})")]
    SingularSystem { det: f64 },

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
