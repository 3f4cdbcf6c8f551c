#![cfg_attr(not(test), no_std)]
#![allow(clippy::needless_range_loop)]

//! Symbolic and numerical engine for first-order classical field theories in
//! the k-symplectic and k-cosymplectic formalisms.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is pure
//! computation: expression trees, derived field equations, pointwise
//! structure checks, Legendre maps, Hamilton–Jacobi machinery and grid
//! solvers. File formats and the command-line front end live in the `kfield`
//! crate.
//!
//! # Layout
//!
//! - [`expr`]: parse, print, evaluate and differentiate scalar expressions.
//! - [`model`]: coordinate frames, system definitions and k-vector fields.
//! - [`structures`]: canonical k-(co)symplectic forms and axiom checks.
//! - [`hamiltonian`]: Hamilton–De Donder–Weyl equations and the gauge solution.
//! - [`lagrangian`]: energy, Poincaré–Cartan data, regularity and SOPDE checks.
//! - [`legendre`]: forward/inverse Legendre map and the induced Hamiltonian.
//! - [`cosymplectic`]: explicit base-coordinate dependence and suspension.
//! - [`hamjac`]: Hamilton–Jacobi defects, projected fields and lifted sections.
//! - [`fields`]: grid sections, residuals, leapfrog and Gauss–Seidel solvers.
//! - [`gallery`]: registry of worked example systems with analytic solutions.

extern crate alloc;

pub mod cosymplectic;
pub mod expr;
pub mod fields;
pub mod gallery;
pub mod hamiltonian;
pub mod hamjac;
pub mod lagrangian;
pub mod legendre;
pub mod linalg;
pub(crate) mod math;
pub mod model;
mod probe;
pub mod sampling;
pub mod structures;

pub use expr::{Assignment, Expr, ExprError};
pub use model::{CoordFrame, Formalism, KVectorField, ModelError, SystemDef, SystemKind};

/// Default tolerance for symbolic-point checks.
pub const POINT_TOL: f64 = 1e-10;

/// Default tolerance for grid checks.
pub const GRID_TOL: f64 = 1e-8;
