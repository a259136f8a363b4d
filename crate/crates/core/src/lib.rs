//! Weighted multishift tuples on directed Cartesian products of rooted
//! directed trees.
//!
//! The crate models a family of bounded operator tuples acting on the
//! square-summable functions over the vertex set of a product tree: each
//! coordinate operator pushes mass from a vertex to its children along one
//! axis, scaled by a positive weight. On top of that it computes the joint
//! kernel of the adjoint tuple, verifies the generating (wandering) property
//! of that kernel, derives Cauchy duals and polar factorizations, and
//! classifies balanced weight families by moment positivity, hyponormality,
//! spectral radii, and essential normality of the commutators.
//!
//! Everything is materialized up to an explicit depth budget. Operations
//! whose answer would depend on vertices beyond the budget return an error
//! instead of guessing.

pub mod classify;
pub mod error;
pub mod kernel;
pub mod numeric;
pub mod product;
pub mod shift;
pub mod tree;
pub mod weights;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;
