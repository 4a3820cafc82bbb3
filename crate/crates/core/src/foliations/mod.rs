//! Stable and unstable foliations of torus maps: line fields, leaves,
//! holonomy between transversals, local graphs and heteroclinic points.

pub mod graph;
pub mod heteroclinic;
pub mod holonomy;
pub mod leaf;
pub mod line_field;

pub use graph::{local_graph, verify_graph_transport, GraphMap, GraphParams, LocalFrame, TransportCheck};
pub use heteroclinic::{heteroclinic_points, heteroclinic_seeds, HeteroclinicPoint};
pub use holonomy::{holonomy, linspace, slide_to, Crossing, HolonomyMap, HolonomyParams};
pub use leaf::{
    integrate_leaf, integrate_leaf_centered, integrate_leaf_from, LeafSegment, Projection,
    DEFAULT_LEAF_STEP,
};
pub use line_field::{compute_line_field, min_transversality_angle, FieldLabel, LineField};
