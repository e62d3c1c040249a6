//! Chart-based numerical engine for contact, Sasakian and homogeneous
//! Kähler structures.
//!
//! Manifolds are finite atlases of coordinate boxes glued by explicit
//! transition maps. Tensor fields are per-chart component functions over a
//! nested dual scalar, so every derivative (exterior derivative, brackets,
//! Lie derivatives, Nijenhuis torsion, Christoffel symbols) is exact to
//! machine precision. Structural claims are certified by sampling.

pub mod bundle;
pub mod cli;
pub mod contact;
pub mod corpus;
pub mod error;
pub mod kahler;
pub mod exprlang;
pub mod manifold;
pub mod numkernel;
pub mod product;
pub mod report;
pub mod sasaki;
pub mod tensor;

pub use error::{GeomError, Result};
