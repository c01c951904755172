//! Guaranteed two-sided bounds for the cost functional of elliptic optimal
//! control problems with distributed control.
//!
//! The crate discretizes `-Laplace y = f + v` on the unit square with
//! Lagrange elements for the state, Raviart-Thomas elements for the flux and
//! discontinuous P1 controls, and evaluates computable lower and upper
//! bounds of `J(v) = ||grad(y(v) - y_d)||^2 + alpha ||v - u_d||^2` that hold
//! for the exact (not the discrete) state.

pub mod algorithms;
pub mod error;
pub mod fem;
pub mod field;
pub mod mesh;
pub mod ocp;
pub mod problems;
pub mod quadrature;
pub mod verify;

pub use algorithms::{
    generate_cost_estimates, golden_section, projected_gradient, update_rule, AlgOneParams, PgParams, PgRecord, PgTrace,
};
pub use error::{Error, Result};
pub use fem::{build_space, Family, FeFunction, FeSpace, SparseOperator};
pub use field::{Analytic, AnalyticFlux};
pub use mesh::{refine_uniform, unit_square_mesh, Mesh};
pub use ocp::{AdmissibleSet, CostBounds, DiscreteProblem, Discretization, ErrBounds, ProblemData};
pub use problems::{build_case, reference_cost, ManufacturedCase, ManufacturedParams, ReferenceValues};
pub use quadrature::{quadrature, QuadratureRule};
