//! Benchmark fixtures for the solver.

use timoshenko_core::experiments::ProblemFamily;
use timoshenko_core::{ssn_solve, ActiveSet, ControlProblem, P0Field, Scheme, SsnConfig};

/// The sparsity benchmark with unit Young's modulus, where the control is
/// nontrivial for small η.
pub fn unit_modulus_problem(n: usize, eta: f64) -> ControlProblem {
    let mut family = ProblemFamily::benchmark();
    family.young_modulus = 1.0;
    family
        .with_eta(eta)
        .build(n, 0.01, Scheme::LockingFree)
        .expect("benchmark problem")
}

/// Active set and control at the solution, for timing a single Newton step.
pub fn converged_state(problem: &ControlProblem) -> (ActiveSet, P0Field) {
    let r = ssn_solve(problem, &SsnConfig::default()).expect("benchmark solve");
    assert!(r.converged);
    let active = r.active_set_history.last().cloned().expect("at least one iterate");
    (active, r.u)
}
