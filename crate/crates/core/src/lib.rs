//! Generation-based fuzzing of tabletop manipulation policies.
//!
//! The crate synthesizes test scenes ([`fuzzgen`]), executes black-box
//! policies against them in a deterministic kinematic simulator ([`sim`])
//! through a rendered camera view ([`render`]) and a wire protocol
//! ([`policy`]), and scores the outcomes with per-step task oracles and
//! robustness metrics ([`oracle`], [`metrics`], [`stats`]).
//! [`campaign`] ties everything together into reproducible experiments.
//!
//! Geometry, metrics and statistics are generic over the scalar type
//! ([`Real`]); the simulator and file formats use `f64`.

pub mod campaign;
pub mod fuzzgen;
pub mod geometry;
pub mod metrics;
pub mod oracle;
pub mod policy;
pub mod render;
pub mod scalar;
pub mod scene;
pub mod sim;
pub mod stats;

pub use geometry::{Aabb, Footprint, Matrix3, Outline, Vector3};
pub use scalar::Real;

/// Double precision 3-vector used throughout the simulator and file formats.
pub type Vec3 = Vector3<f64>;
/// Single precision 3-vector.
pub type Vec3f = Vector3<f32>;
pub type Mat3 = Matrix3<f64>;
pub type Footprint2 = Footprint<f64>;
pub type Box3 = Aabb<f64>;
