//! Sensor-free robot cell modeling.
//!
//! Recorded joint trajectories of a fixed-base serial manipulator are turned
//! into a conservative triangle-mesh model of the space the robot has never
//! visited. The pipeline runs in four steps:
//!
//! 1. trajectory ingestion and resampling ([`kinematics`]),
//! 2. per-link swept volumes by SDF stamping ([`sweep`]),
//! 3. optional decimation with containment restored ([`decimate`]),
//! 4. obstacle carving: bounding volume minus all swept volumes ([`carve`]).
//!
//! The resulting [`carve::ObstacleModel`] answers collision queries through
//! [`collide`]. Synthetic scenes, simulated exploration and a brute-force
//! Monte Carlo oracle live in [`harness`].
//!
//! Grid work and Monte Carlo sampling run on rayon when the `parallel`
//! feature is enabled (the default) and sequentially otherwise. Results are
//! bit-identical either way.

pub mod carve;
pub mod collide;
pub mod decimate;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod kinematics;
pub mod par;
pub mod pipeline;
pub mod sweep;

pub use error::{Error, Result};
pub use geometry::{Aabb, Bvh, MeshQuery, Point, RigidTransform, TriangleMesh, Vec3};
