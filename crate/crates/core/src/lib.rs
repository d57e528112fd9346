//! Delaunay edge flips for dense surface triangulations.
//!
//! A dense triangulation of a smooth closed surface can be flipped into a
//! Gabriel triangulation (every triangle's diametric ball is empty of
//! vertices) when its vertices are uniformly spaced, and into an almost
//! Gabriel triangulation otherwise. This crate provides the flip algorithm,
//! the stabbing predicates it is driven by, brute-force oracles for every
//! accelerated query, density analysis against analytic reference surfaces,
//! and generators for test meshes.

pub mod analysis;
pub mod flip;
pub mod geometry;
pub mod io;
pub mod mesh;
pub mod predicates;
pub mod surface;

pub use geometry::{Ball, Plane, Point3, Triangle, UnitVector3, Vector3};
pub use mesh::{EdgeHandle, EdgeId, FaceHandle, FaceId, FlipRecord, TriangleMesh, VertexId};
