//! Numerical first Dirichlet eigenpairs of concave, 1-homogeneous Hessian
//! operators `F(D²u) = f(λ(D²u))` on planar domains.
//!
//! Supported operators are the normalized k-Hessian operators on the Gårding
//! cones `Γ_k` and the p-Monge–Ampère operators on the p-convex cones.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod newton;
pub mod operators;
pub mod radial;
pub mod sparse;
pub mod verify;

pub use config::{parse_config, RunConfig};
pub use eigen::{compute_eigenpair, EigenOptions, EigenResult};
pub use error::{Error, Result};
pub use grid::{DomainSpec, Grid, GridField};
pub use newton::{newton_solve, solve_family, NewtonOptions, RhsSpec};
pub use operators::{HessianOperator, OperatorKind, Spectrum};
