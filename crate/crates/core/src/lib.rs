//! Fill-in-the-middle machinery for low-poly meshes.
//!
//! The crate covers everything around a local mesh generator except the
//! generator itself: token serialization of a context/target split, region
//! sampling, the gated conditioning math, automatic defect detection by
//! multi-view back-face analysis, iterative local repair with an overflow
//! gate, and the evaluation metrics used to score a regenerated patch.
//!
//! Generators plug in through [`generators::Generator`]; three reference
//! implementations ship (ground-truth replay, boundary-loop triangulation and
//! a whole-mesh crop-and-snap adapter) plus a subprocess bridge that speaks
//! the token-sequence wire format.

use std::collections::BTreeSet;

pub mod detect;
pub mod gate;
pub mod generators;
pub mod mesh;
pub mod metrics;
pub mod region;
pub mod repair;
pub mod spatial;
pub mod synth;
pub mod tokenizer;
pub mod union_find;

pub type Point = nalgebra::Point3<f64>;
pub type Vector = nalgebra::Vector3<f64>;

/// Ordered set of face ids.
pub type FaceSet = BTreeSet<usize>;

/// Ordered set of vertex ids.
pub type VertexSet = BTreeSet<usize>;

/// Schema version stamped into every JSON document this crate writes.
pub const SCHEMA_VERSION: u32 = 1;
