#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timoshenko_core::experiments::ProblemFamily;
use timoshenko_core::{ControlProblem, LoadData, P0Field, Profile, Scheme};

pub const THICKNESSES: [f64; 3] = [1e-1, 1e-2, 1e-3];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest `|p̄|` of the uncontrolled problem; above it the optimal control
/// vanishes.
pub fn sparsity_threshold(problem: &ControlProblem) -> f64 {
    problem
        .adjoint_mean(&vec![0.0; problem.n()])
        .iter()
        .fold(0.0, |m: f64, p| m.max(p.abs()))
}

/// A random problem from the nondimensional family: random loads, target,
/// bounds, `ν`, thickness and `η` within a decade below the sparsity
/// threshold (sometimes slightly above).
pub fn random_problem(seed: u64, n_range: std::ops::RangeInclusive<usize>) -> ControlProblem {
    let mut r = rng(seed);
    let n = r.gen_range(n_range);
    let t = THICKNESSES[r.gen_range(0..3)];
    let (c1, k1) = (r.gen_range(0.5..2.0), r.gen_range(1..4) as f64);
    let (c2, k2) = (r.gen_range(-1.0..1.0), r.gen_range(2..6) as f64);
    let wd = r.gen_range(-0.03..0.03);
    let mut fam = ProblemFamily::nondimensional();
    fam.nu = 10f64.powf(r.gen_range(-6.5..-5.0));
    fam.lower = Profile::Constant(-r.gen_range(0.5..3.0));
    fam.upper = Profile::Constant(r.gen_range(0.5..3.0));
    fam.loads = LoadData {
        f: Profile::function(move |x| c1 * (k1 * std::f64::consts::PI * x).sin() + c2 * (k2 * std::f64::consts::PI * x).cos()),
        w_d: Profile::sine(wd, 1.0),
        ..Default::default()
    };
    let base = fam.with_eta(0.0).build(n, t, Scheme::LockingFree).unwrap();
    let eta = sparsity_threshold(&base) * 10f64.powf(r.gen_range(-1.0..0.2));
    base.with_eta(eta).unwrap()
}

pub fn l2_distance(problem: &ControlProblem, a: &P0Field, b: &P0Field) -> f64 {
    let d: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    P0Field::new(problem.mesh(), d).unwrap().l2_norm(problem.mesh())
}

pub fn zero_data_problem(n: usize, t: f64) -> ControlProblem {
    let mut fam = ProblemFamily::nondimensional();
    fam.loads = LoadData::default();
    fam.build(n, t, Scheme::LockingFree).unwrap()
}
