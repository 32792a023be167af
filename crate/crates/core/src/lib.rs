//! Numerical core for Fuller indices of non-singular vector fields.
//!
//! Everything here is `no_std` with `alloc`: closed-form manifolds and fields,
//! an adaptive Dormand-Prince integrator with variational equations, Newton
//! shooting for periodic orbits, fixed-point and Conley-Zehnder indices,
//! pseudo-arclength continuation across homotopies, the cyclic k-fold lift of
//! orbits, and Reeb dynamics of conformally rescaled contact forms.
//!
//! IO, the command line and threading live in the `fullerkit` crate.
#![no_std]

extern crate alloc;

pub mod config;
pub mod continuation;
pub mod correspondence;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod index;
pub mod linalg;
pub mod orbits;
pub mod reeb;
pub mod scenarios;

pub use config::Config;
pub use error::{Error, Result};
pub use geometry::{ContactFormFamily, Manifold, VectorFieldFamily};
pub use orbits::{OrbitSet, PeriodicOrbit};
