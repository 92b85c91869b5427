//! Sparse optimal control of a static Timoshenko beam.
//!
//! P1 finite elements for deflection and rotation, with optional
//! reduced (midpoint) shear integration, a piecewise constant control with
//! box constraints and an L¹ penalty, and a semismooth Newton solver.

pub mod banded;
pub mod control;
pub mod data;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod mesh;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod problem;
pub mod quadrature;
pub mod ssn;

pub use control::{
    active_set, active_set_from_mean, branches, check_kkt, classify, complementarity, complementarity_scalar, cost,
    pointwise_optimal_control, shrink, variational_inequality_residual, ActiveSet, Branch, CLastTerm, ControlParams,
    CostBreakdown, KktReport, MultiplierState,
};
pub use data::Profile;
pub use error::{Error, Result};
pub use fem::{
    assemble_load, assemble_stiffness, error_norms, recover_shear, solve_adjoint, solve_state, AdjointSolution,
    BeamParams, BeamSystem, ErrorNorms, ExactPair, LoadData, Reference, Scheme, StateSolution,
};
pub use mesh::{p0_average, pi_h, Mesh1D, P0Field, P1Field};
pub use problem::ControlProblem;
pub use quadrature::{QuadratureRule, QuadratureTag};
pub use ssn::{residual, ssn_solve, SsnConfig, SsnResult, StepKind};
