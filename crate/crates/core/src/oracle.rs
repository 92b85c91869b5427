//! Independent reference solvers used to certify the semismooth Newton
//! solver and the reduced-integration stiffness. They are slow on purpose:
//! each one follows a different route to the same answer.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::shrink;
use crate::error::{invalid, Error, Result};
use crate::fem::BeamParams;
use crate::mesh::{Mesh1D, P0Field};
use crate::problem::ControlProblem;

/// Settings of the proximal gradient reference solver.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub max_iter: usize,
    /// Stop when `|u_{k+1} - u_k|_∞ <= tol * max(1, |u|_∞)`.
    pub tol: f64,
    /// Power iterations used to estimate the Lipschitz constant.
    pub power_iterations: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_iter: 1_000_000,
            tol: 1e-12,
            power_iterations: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub u: P0Field,
    pub iterations: usize,
    pub converged: bool,
    pub fixed_point_residual: f64,
    pub lipschitz: f64,
}

/// Proximal gradient on the reduced functional with the exact
/// shrink-then-clip proximal map and fixed step `1 / Lip`.
pub fn prox_gradient_solve(problem: &ControlProblem, config: &OracleConfig) -> Result<OracleResult> {
    let params = problem.control();
    let n = problem.n();
    let eta = params.l1_weight();
    // 2% margin over the power-iteration estimate, which approaches from below
    let lip = 1.02 * problem.hessian_norm_estimate(config.power_iterations);
    let step = 1.0 / lip;
    let (lo, hi) = (params.lower().values(), params.upper().values());
    let mut u = vec![0.0; n];
    let mut res = f64::INFINITY;
    let mut converged = false;
    let mut it = 0;
    while it < config.max_iter {
        let g = problem.reduced_gradient(&u);
        let next: Vec<f64> = (0..n)
            .map(|j| shrink(u[j] - step * g[j], step * eta).clamp(lo[j], hi[j]))
            .collect();
        res = next.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = next.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        u = next;
        it += 1;
        if res <= config.tol * scale {
            converged = true;
            break;
        }
    }
    Ok(OracleResult {
        u: P0Field::new(problem.mesh(), u)?,
        iterations: it,
        converged,
        fixed_point_residual: res,
        lipschitz: lip,
    })
}

/// Compares the adjoint gradient `ν u - p̄` of the smooth part with central
/// differences along random directions. Returns the largest
/// `|adjoint - FD| / max(1, |FD|)`.
pub fn fd_gradient_check(problem: &ControlProblem, u: &P0Field, step: f64, directions: usize, seed: u64) -> Result<f64> {
    if u.len() != problem.n() {
        return Err(Error::ShapeMismatch {
            expected: problem.n(),
            actual: u.len(),
        });
    }
    let grad = problem.reduced_gradient(u.values());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..directions {
        let d: Vec<f64> = (0..problem.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let plus: Vec<f64> = u.values().iter().zip(&d).map(|(x, e)| x + step * e).collect();
        let minus: Vec<f64> = u.values().iter().zip(&d).map(|(x, e)| x - step * e).collect();
        let fd = (problem.smooth_cost(&plus)? - problem.smooth_cost(&minus)?) / (2.0 * step);
        let adj = problem.inner(&grad, &d);
        worst = worst.max((adj - fd).abs() / fd.abs().max(1.0));
    }
    Ok(worst)
}

/// Largest problem accepted by [`dense_kkt_solve`].
pub const DENSE_KKT_MAX_ELEMENTS: usize = 30;

/// Dense reduced Hessian `diag(h)(ν + G)`, symmetrized, and the linear term
/// `diag(h) p̄(0)`.
fn dense_reduced_qp(problem: &ControlProblem) -> (DMatrix<f64>, DVector<f64>) {
    let n = problem.n();
    let h = problem.mesh().sizes();
    let mut q = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let col = problem.hessian_apply(&e);
        for i in 0..n {
            q[(i, k)] = h[i] * col[i];
        }
    }
    let q = (&q + q.transpose()) * 0.5;
    let p0 = problem.adjoint_mean(&vec![0.0; n]);
    let c = DVector::from_iterator(n, (0..n).map(|i| h[i] * p0[i]));
    (q, c)
}

/// Ground truth for small problems: exact coordinate descent identifies the
/// sign/bound pattern, then the smooth KKT system for that pattern is solved
/// densely and checked for consistency.
pub fn dense_kkt_solve(problem: &ControlProblem) -> Result<P0Field> {
    let n = problem.n();
    if n > DENSE_KKT_MAX_ELEMENTS {
        return Err(invalid(format!(
            "dense KKT oracle accepts at most {DENSE_KKT_MAX_ELEMENTS} elements, got {n}"
        )));
    }
    let params = problem.control();
    let h = problem.mesh().sizes().to_vec();
    let eta = params.l1_weight();
    let (lo, hi) = (params.lower().values(), params.upper().values());
    let (q, c) = dense_reduced_qp(problem);

    // minimize ½ uᵀQu - cᵀu + η Σ h|u| on the box
    let mut u = DVector::zeros(n);
    for _sweep in 0..200_000 {
        let mut change = 0.0f64;
        for j in 0..n {
            let off = (q.row(j) * &u)[(0, 0)] - q[(j, j)] * u[j];
            let v = (shrink(c[j] - off, eta * h[j]) / q[(j, j)]).clamp(lo[j], hi[j]);
            change = change.max((v - u[j]).abs());
            u[j] = v;
        }
        if change <= 1e-13 * u.amax().max(1.0) {
            break;
        }
    }

    // pattern: fixed values on bounds and zeros, signed free values elsewhere
    let tol = 1e-9 * u.amax().max(1.0);
    let pattern: Vec<Option<f64>> = (0..n)
        .map(|j| {
            if u[j].abs() <= tol {
                Some(0.0)
            } else if (u[j] - lo[j]).abs() <= tol {
                Some(lo[j])
            } else if (u[j] - hi[j]).abs() <= tol {
                Some(hi[j])
            } else {
                None
            }
        })
        .collect();
    let free: Vec<usize> = (0..n).filter(|&j| pattern[j].is_none()).collect();
    let mut x = DVector::from_iterator(n, (0..n).map(|j| pattern[j].unwrap_or(0.0)));
    if !free.is_empty() {
        let k = free.len();
        let mut a = DMatrix::zeros(k, k);
        let mut b = DVector::zeros(k);
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                a[(r, s)] = q[(i, j)];
            }
            let fixed: f64 = (0..n)
                .filter(|j| pattern[*j].is_some())
                .map(|j| q[(i, j)] * x[j])
                .sum();
            b[r] = c[i] - fixed - eta * h[i] * u[i].signum();
        }
        let sol = a
            .lu()
            .solve(&b)
            .ok_or_else(|| invalid("singular reduced KKT system"))?;
        for (r, &i) in free.iter().enumerate() {
            x[i] = sol[r];
        }
    }
    // consistency of the pattern: free values keep their sign inside the box,
    // zeros satisfy |∇| <= η, bounds have an outward-pointing gradient
    let grad = &q * &x - &c;
    let slack = 1e-8 * c.amax().max(1e-300) / h.iter().cloned().fold(f64::INFINITY, f64::min);
    for j in 0..n {
        let g = grad[j] / h[j];
        let ok = match pattern[j] {
            None => x[j].signum() == u[j].signum() && x[j] >= lo[j] && x[j] <= hi[j],
            Some(v) if v == 0.0 => g.abs() <= eta + slack,
            Some(v) => {
                let s = g + eta * v.signum();
                (v != hi[j] || s <= slack) && (v != lo[j] || s >= -slack)
            }
        };
        if !ok {
            return Err(invalid(format!("dense KKT oracle: inconsistent pattern at element {j}")));
        }
    }
    P0Field::new(problem.mesh(), x.iter().copied().collect())
}

/// Explicit mixed (saddle point) matrix in the unknowns
/// `(interior w, θ interleaved, then γ per element)`:
///
/// ```text
/// [ A    Bᵀ       ]
/// [ B   -(t²/κ) D ]
/// ```
///
/// with `A` the bending block, `B_{j,·} = ∫_{e_j} (v' - β)` and `D = diag(h)`.
/// All entries are closed-form integrals; no quadrature is involved.
pub fn mixed_saddle_matrix(mesh: &Mesh1D, params: &BeamParams) -> DMatrix<f64> {
    let m = 2 * mesh.interior_count();
    let n = mesh.element_count();
    let last = mesh.node_count() - 1;
    let mut k = DMatrix::zeros(m + n, m + n);
    let e12 = params.bending_coeff();
    let inv = params.thickness() * params.thickness() / params.kappa();
    for (j, &h) in mesh.sizes().iter().enumerate() {
        let (a, b) = (j, j + 1);
        let th = |node: usize| (node != 0 && node != last).then(|| 2 * (node - 1) + 1);
        let wd = |node: usize| (node != 0 && node != last).then(|| 2 * (node - 1));
        // bending
        for (na, sa) in [(a, 1.0), (b, -1.0)] {
            for (nb, sb) in [(a, 1.0), (b, -1.0)] {
                if let (Some(p), Some(q)) = (th(na), th(nb)) {
                    k[(p, q)] += e12 / h * sa * sb;
                }
            }
        }
        // coupling: ∫ φ_w' = ∓1, ∫ φ_θ = h/2
        let g = m + j;
        let coupling = [(wd(a), -1.0), (wd(b), 1.0), (th(a), -h / 2.0), (th(b), -h / 2.0)];
        for (dof, v) in coupling {
            if let Some(d) = dof {
                k[(g, d)] += v;
                k[(d, g)] += v;
            }
        }
        k[(g, g)] = -inv * h;
    }
    k
}

/// Stiffness obtained by eliminating `γ` from [`mixed_saddle_matrix`]
/// (Schur complement, computed densely).
pub fn mixed_condensed_stiffness(mesh: &Mesh1D, params: &BeamParams) -> Result<DMatrix<f64>> {
    let m = 2 * mesh.interior_count();
    let n = mesh.element_count();
    let full = mixed_saddle_matrix(mesh, params);
    let a = full.view((0, 0), (m, m)).into_owned();
    let bt = full.view((0, m), (m, n)).into_owned();
    let b = full.view((m, 0), (n, m)).into_owned();
    let c = full.view((m, m), (n, n)).into_owned();
    let cinv_b = c
        .lu()
        .solve(&b)
        .ok_or_else(|| invalid("singular shear block"))?;
    Ok(a - bt * cinv_b)
}
