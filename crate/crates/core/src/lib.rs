//! Numerical laboratory for hyperbolic dynamics on the 2-torus.
//!
//! Integer SL(2,Z) actions, nonlinear perturbations and their conjugacies,
//! invariant foliations with holonomy, and the rigidity diagnostics built on
//! them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod foliations;
pub mod fourier;
pub mod geometry;
pub mod interp;
pub mod lattice;
pub mod roots;
pub mod conjugacy;
pub mod periodic;
pub mod rigidity;
pub mod torus_maps;

pub use error::{Error, Result};
pub use fourier::{FourierMode, FourierPerturbation};
pub use geometry::{Mat2, TorusPoint, Vec2};
pub use lattice::{HyperbolicElement, IntMatrix2, PairHypothesisCertificate};
pub use torus_maps::{
    conjugated_action, verify_anosov_cones, ConeParams, ConeVerdict, ConjugatedMap, Diffeo,
    MarkedAction, PerturbedMap, SharedMap, TorusMap,
};
