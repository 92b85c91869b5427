//! Semismooth Newton method on the discrete optimality system
//!
//! ```text
//! F1 = K y - (F + B u)            state
//! F2 = -p̄ + ν u + μ               gradient equation
//! F3 = K z - (r_d - M y)          adjoint
//! F4 = C(u, μ)                    complementarity
//! ```
//!
//! The generalized Jacobian of `C` switches on the active set `A` (elements
//! on a free branch). The last Newton row is written as
//! `(I - χ_A) δu + ν⁻¹ χ_A δμ = -F̂4` with `F̂4 = (1 - 2χ_A) C / ν`, i.e. the
//! true Jacobian row left-scaled by a nonsingular diagonal.
//!
//! Each step fixes `δu` on inactive elements and `δμ` on active ones from
//! the last row. The remaining unknowns `(δy, δz, δu)` form a sparse system
//! that is banded when ordered along the beam
//! (`u_0, [w θ p q]_1, u_1, [w θ p q]_2, ...`); it is factored directly by
//! banded LU with partial pivoting, then `δμ` on inactive elements follows
//! from row 2.

use crate::banded::{BandLu, BandMatrix};
use crate::control::{
    branches, check_kkt, complementarity, shrink, variational_inequality_residual, ActiveSet, Branch, CostBreakdown,
    KktReport, MultiplierState,
};
use crate::error::{check_len, invalid, Result};
use crate::fem::{AdjointSolution, StateSolution};
use crate::mesh::P0Field;
use crate::problem::ControlProblem;

/// Iteration control.
#[derive(Debug, Clone, PartialEq)]
pub struct SsnConfig {
    /// Tolerance on the max-norm of the scaled residual.
    pub tol: f64,
    pub max_iter: usize,
    pub initial_u: Option<P0Field>,
    pub initial_mu: Option<P0Field>,
}

impl Default for SsnConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            initial_u: None,
            initial_mu: None,
        }
    }
}

impl SsnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(invalid("max_iter must be at least 1"));
        }
        Ok(())
    }

    pub fn warm_started(&self, u: P0Field, mu: P0Field) -> Self {
        Self {
            initial_u: Some(u),
            initial_mu: Some(mu),
            ..self.clone()
        }
    }
}

/// A vector in the product space `(y, u, z, μ)`; also used for residuals
/// (rows 1..4) and increments.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    pub state: Vec<f64>,
    pub control: Vec<f64>,
    pub adjoint: Vec<f64>,
    pub multiplier: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(problem: &ControlProblem) -> Self {
        let (m, n) = (problem.state_dim(), problem.n());
        Self {
            state: vec![0.0; m],
            control: vec![0.0; n],
            adjoint: vec![0.0; m],
            multiplier: vec![0.0; n],
        }
    }

    pub fn neg(&self) -> Self {
        let f = |v: &Vec<f64>| v.iter().map(|x| -x).collect();
        Self {
            state: f(&self.state),
            control: f(&self.control),
            adjoint: f(&self.adjoint),
            multiplier: f(&self.multiplier),
        }
    }

    /// Concatenation in the order `(y, u, z, μ)`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.state.clone();
        v.extend_from_slice(&self.control);
        v.extend_from_slice(&self.adjoint);
        v.extend_from_slice(&self.multiplier);
        v
    }

    pub fn unflatten(problem: &ControlProblem, v: &[f64]) -> Result<Self> {
        let (m, n) = (problem.state_dim(), problem.n());
        check_len(2 * m + 2 * n, v.len())?;
        Ok(Self {
            state: v[..m].to_vec(),
            control: v[m..m + n].to_vec(),
            adjoint: v[m + n..2 * m + n].to_vec(),
            multiplier: v[2 * m + n..].to_vec(),
        })
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Unscaled residual blocks `F1..F4` (`F4` is `C(u, μ)` itself).
pub fn residual_at(problem: &ControlProblem, x: &BlockVector) -> Result<BlockVector> {
    let (m, n) = (problem.state_dim(), problem.n());
    check_len(m, x.state.len())?;
    check_len(n, x.control.len())?;
    check_len(m, x.adjoint.len())?;
    check_len(n, x.multiplier.len())?;
    let k = problem.system().stiffness();
    let nu = problem.control().nu();

    let bu = problem.control_load(&x.control);
    let f1: Vec<f64> = k
        .matvec(&x.state)
        .into_iter()
        .zip(problem.base_load().iter().zip(&bu))
        .map(|(ky, (f, b))| ky - f - b)
        .collect();

    let p_bar = problem.mean_deflection(&x.adjoint);
    let f2: Vec<f64> = p_bar
        .iter()
        .zip(x.control.iter().zip(&x.multiplier))
        .map(|(p, (u, mu))| -p + nu * u + mu)
        .collect();

    let my = problem.tracking_mass(&x.state);
    let f3: Vec<f64> = k
        .matvec(&x.adjoint)
        .into_iter()
        .zip(problem.target_rhs().iter().zip(&my))
        .map(|(kz, (r, m))| kz - r + m)
        .collect();

    let mesh = problem.mesh();
    let u = P0Field::new(mesh, x.control.clone())?;
    let mu = P0Field::new(mesh, x.multiplier.clone())?;
    let f4 = complementarity(&u, &mu, problem.control())?.into_vec();
    Ok(BlockVector {
        state: f1,
        control: f2,
        adjoint: f3,
        multiplier: f4,
    })
}

/// Residual at `(u, μ)` with the state and adjoint solved exactly.
pub fn residual(problem: &ControlProblem, u: &P0Field, mu: &P0Field) -> Result<BlockVector> {
    check_len(problem.n(), u.len())?;
    let y = problem.state_vector(u.values());
    let z = problem.adjoint_vector(&y);
    residual_at(
        problem,
        &BlockVector {
            state: y,
            control: u.values().to_vec(),
            adjoint: z,
            multiplier: mu.values().to_vec(),
        },
    )
}

/// Scaled max-norm used for the stopping test. `F1`, `F3` are measured as
/// backward errors of the linear solves; `F2` and `F4` are divided by `ν`
/// (control units) and by `max(1, |u|_∞)`.
pub fn scaled_residual_norm(problem: &ControlProblem, x: &BlockVector, r: &BlockVector) -> f64 {
    let k = problem.system().stiffness();
    let knorm = k.norm_inf();
    let nu = problem.control().nu();
    let uscale = max_abs(&x.control).max(1.0);
    let s1 = knorm * max_abs(&x.state) + max_abs(problem.base_load()) + max_abs(&problem.control_load(&x.control));
    let s3 = knorm * max_abs(&x.adjoint) + max_abs(problem.target_rhs()) + max_abs(&problem.tracking_mass(&x.state));
    let ratio = |a: f64, s: f64| if s > 0.0 { a / s } else { a };
    ratio(max_abs(&r.state), s1)
        .max(ratio(max_abs(&r.adjoint), s3))
        .max(max_abs(&r.control) / (nu * uscale))
        .max(max_abs(&r.multiplier) / (nu * uscale))
}

/// The Newton operator for a fixed active set, with its factorization.
pub struct NewtonSystem<'a> {
    problem: &'a ControlProblem,
    active: ActiveSet,
    lu: BandLu,
    row_scale: Vec<f64>,
}

// band layout: element j at 5j, node i (interior, 1-based) at 5i - 4 + c
const NODE_STRIDE: usize = 5;
const NEWTON_BAND: usize = 8;

fn node_dof(node: usize, c: usize) -> usize {
    NODE_STRIDE * node - 4 + c
}

impl<'a> NewtonSystem<'a> {
    pub fn new(problem: &'a ControlProblem, active: ActiveSet) -> Result<Self> {
        check_len(problem.n(), active.indicator.len())?;
        let mut a = Self::assemble(problem, &active);
        let row_scale = a.equilibrate_rows();
        let lu = a.lu()?;
        Ok(Self {
            problem,
            active,
            lu,
            row_scale,
        })
    }

    /// Reduced matrix in `(δy, δz, δu)` after the last row is used.
    fn assemble(problem: &ControlProblem, active: &ActiveSet) -> BandMatrix {
        let mesh = problem.mesh();
        let n = problem.n();
        let last = mesh.node_count() - 1;
        let nu = problem.control().nu();
        let tw = problem.theta_weight();
        let dim = NODE_STRIDE * n - 4;
        let mut a = BandMatrix::zeros(dim, NEWTON_BAND, NEWTON_BAND);
        let k = problem.system().stiffness();
        let kd = k.bandwidth();
        let interior = |node: usize| node != 0 && node != last;
        // interior vector index -> (node, component)
        let at = |idx: usize| (idx / 2 + 1, idx % 2);
        for r in 0..k.dim() {
            for c in r.saturating_sub(kd)..=(r + kd).min(k.dim() - 1) {
                let v = k.get(r, c);
                if v == 0.0 {
                    continue;
                }
                let ((nr, cr), (nc, cc)) = (at(r), at(c));
                // K δy in state rows, K δz in adjoint rows
                a.add(node_dof(nr, cr), node_dof(nc, cc), v);
                a.add(node_dof(nr, cr + 2), node_dof(nc, cc + 2), v);
            }
        }
        for (j, &h) in mesh.sizes().iter().enumerate() {
            let ends = [j, j + 1];
            // + M δy in adjoint rows
            for (ia, &na) in ends.iter().enumerate() {
                for (ib, &nb) in ends.iter().enumerate() {
                    if !(interior(na) && interior(nb)) {
                        continue;
                    }
                    let m = if ia == ib { h / 3.0 } else { h / 6.0 };
                    a.add(node_dof(na, 2), node_dof(nb, 0), m);
                    if tw > 0.0 {
                        a.add(node_dof(na, 3), node_dof(nb, 1), tw * m);
                    }
                }
            }
            let e = NODE_STRIDE * j;
            if active.indicator[j] {
                // ν δu_j - mean_j(δp)
                a.add(e, e, nu);
                for &nd in &ends {
                    if interior(nd) {
                        a.add(e, node_dof(nd, 2), -0.5);
                    }
                }
                // - B δu in state rows
                for &nd in &ends {
                    if interior(nd) {
                        a.add(node_dof(nd, 0), e, -0.5 * h);
                    }
                }
            } else {
                a.add(e, e, 1.0);
            }
        }
        a
    }

    pub fn active(&self) -> &ActiveSet {
        &self.active
    }

    /// Scales the complementarity residual to match the printed last row:
    /// `F̂4 = (1 - 2χ_A) C / ν`.
    pub fn scale_last_row(&self, c: &[f64]) -> Vec<f64> {
        let nu = self.problem.control().nu();
        c.iter()
            .zip(&self.active.indicator)
            .map(|(c, &a)| if a { -c / nu } else { c / nu })
            .collect()
    }

    /// Applies the block operator to an increment.
    pub fn apply(&self, d: &BlockVector) -> BlockVector {
        let p = self.problem;
        let k = p.system().stiffness();
        let nu = p.control().nu();
        let bu = p.control_load(&d.control);
        let r1 = k.matvec(&d.state).into_iter().zip(&bu).map(|(a, b)| a - b).collect();
        let dp = p.mean_deflection(&d.adjoint);
        let r2 = d
            .control
            .iter()
            .zip(dp.iter().zip(&d.multiplier))
            .map(|(u, (p, m))| nu * u - p + m)
            .collect();
        let my = p.tracking_mass(&d.state);
        let r3 = k.matvec(&d.adjoint).into_iter().zip(&my).map(|(a, b)| a + b).collect();
        let r4 = d
            .control
            .iter()
            .zip(&d.multiplier)
            .zip(&self.active.indicator)
            .map(|((u, m), &a)| if a { m / nu } else { *u })
            .collect();
        BlockVector {
            state: r1,
            control: r2,
            adjoint: r3,
            multiplier: r4,
        }
    }

    /// Solves `N δ = rhs`, with one step of iterative refinement.
    pub fn solve(&self, rhs: &BlockVector) -> BlockVector {
        let mut d = self.solve_once(rhs);
        let r = self.apply(&d);
        let corr = BlockVector {
            state: sub(&rhs.state, &r.state),
            control: sub(&rhs.control, &r.control),
            adjoint: sub(&rhs.adjoint, &r.adjoint),
            multiplier: sub(&rhs.multiplier, &r.multiplier),
        };
        let e = self.solve_once(&corr);
        add_into(&mut d.state, &e.state);
        add_into(&mut d.control, &e.control);
        add_into(&mut d.adjoint, &e.adjoint);
        add_into(&mut d.multiplier, &e.multiplier);
        d
    }

    fn solve_once(&self, rhs: &BlockVector) -> BlockVector {
        let p = self.problem;
        let n = p.n();
        let nu = p.control().nu();
        let act = &self.active.indicator;
        let m = p.state_dim();

        let mut dmu = vec![0.0; n];
        let mut x = vec![0.0; self.row_scale.len()];
        for j in 0..n {
            let e = NODE_STRIDE * j;
            if act[j] {
                dmu[j] = nu * rhs.multiplier[j];
                x[e] = rhs.control[j] - dmu[j];
            } else {
                x[e] = rhs.multiplier[j];
            }
        }
        for idx in 0..m {
            let (node, c) = (idx / 2 + 1, idx % 2);
            x[node_dof(node, c)] = rhs.state[idx];
            x[node_dof(node, c + 2)] = rhs.adjoint[idx];
        }
        x.iter_mut().zip(&self.row_scale).for_each(|(v, s)| *v *= s);
        self.lu.solve_in_place(&mut x);

        let du: Vec<f64> = (0..n).map(|j| x[NODE_STRIDE * j]).collect();
        let mut dy = vec![0.0; m];
        let mut dz = vec![0.0; m];
        for idx in 0..m {
            let (node, c) = (idx / 2 + 1, idx % 2);
            dy[idx] = x[node_dof(node, c)];
            dz[idx] = x[node_dof(node, c + 2)];
        }
        let dzbar = p.mean_deflection(&dz);
        for j in 0..n {
            if !act[j] {
                dmu[j] = rhs.control[j] - nu * du[j] + dzbar[j];
            }
        }
        BlockVector {
            state: dy,
            control: du,
            adjoint: dz,
            multiplier: dmu,
        }
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn add_into(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

/// FISTA on the reduced functional with step `1 / lip`; the proximal map
/// of the L¹ term plus box is shrink-then-clip.
fn accelerated_prox_steps(problem: &ControlProblem, u0: &[f64], lip: f64, steps: usize) -> Vec<f64> {
    let params = problem.control();
    let eta = params.l1_weight();
    let (lo, hi) = (params.lower().values(), params.upper().values());
    let step = 1.0 / lip;
    let mut u = u0.to_vec();
    let mut v = u.clone();
    let mut t = 1.0f64;
    for _ in 0..steps {
        let g = problem.reduced_gradient(&v);
        let next: Vec<f64> = (0..u.len())
            .map(|j| shrink(v[j] - step * g[j], step * eta).clamp(lo[j], hi[j]))
            .collect();
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        v = next.iter().zip(&u).map(|(x, xo)| x + beta * (x - xo)).collect();
        u = next;
        t = t_next;
    }
    u
}

/// Reduced cost at the box projection of `u`.
fn objective(problem: &ControlProblem, u: &[f64]) -> Result<f64> {
    let params = problem.control();
    let (lo, hi) = (params.lower().values(), params.upper().values());
    let v: Vec<f64> = (0..u.len()).map(|j| u[j].clamp(lo[j], hi[j])).collect();
    let l1: f64 = v.iter().zip(problem.mesh().sizes()).map(|(x, h)| h * x.abs()).sum();
    Ok(problem.smooth_cost(&v)? + params.l1_weight() * l1)
}

/// How an iterate was reached from its predecessor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepKind {
    /// Full Newton step with the branch values imposed.
    Full,
    /// Newton direction scaled by the given factor.
    Damped(f64),
    /// Accelerated proximal gradient steps.
    Proximal,
}

/// Output of the solver.
#[derive(Debug, Clone)]
pub struct SsnResult {
    pub u: P0Field,
    pub state: StateSolution,
    pub adjoint: AdjointSolution,
    pub multipliers: MultiplierState,
    pub branches: Vec<Branch>,
    pub cost: CostBreakdown,
    /// Newton steps taken.
    pub iterations: usize,
    /// Times the line search failed and proximal gradient steps were used.
    pub fallbacks: usize,
    /// Kind of every step taken; one shorter than `residual_history`.
    pub steps: Vec<StepKind>,
    /// Scaled residual max-norm at every visited iterate.
    pub residual_history: Vec<f64>,
    /// Active set at every visited iterate.
    pub active_set_history: Vec<ActiveSet>,
    /// Branch of every element at every visited iterate; finer than the
    /// active set, which does not distinguish zero from clamped elements.
    pub branch_history: Vec<Vec<Branch>>,
    pub converged: bool,
    /// `||u - clip(shrink(p̄)/ν)||_{L²}` at the returned control.
    pub vi_residual: f64,
    pub kkt: KktReport,
}

impl SsnResult {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::INFINITY)
    }

    /// Elements where the control is exactly zero.
    pub fn null_count(&self) -> usize {
        self.u.zero_count()
    }

    pub fn p_bar(&self) -> P0Field {
        crate::mesh::p0_average(&self.adjoint.p)
    }
}

/// Semismooth Newton iteration. Non-convergence is reported through
/// `converged = false`, not as an error.
pub fn ssn_solve(problem: &ControlProblem, config: &SsnConfig) -> Result<SsnResult> {
    config.validate()?;
    let mesh = problem.mesh();
    let n = problem.n();
    let params = problem.control();
    let nu = params.nu();
    let eta = params.l1_weight();

    let mut u = match &config.initial_u {
        Some(u0) => {
            check_len(n, u0.len())?;
            u0.values().to_vec()
        }
        None => vec![0.0; n],
    };
    let mut mu = match &config.initial_mu {
        Some(m0) => {
            check_len(n, m0.len())?;
            m0.values().to_vec()
        }
        None => vec![0.0; n],
    };

    let mut residual_history = Vec::new();
    let mut active_set_history: Vec<ActiveSet> = Vec::new();
    let mut branch_history: Vec<Vec<Branch>> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut fallbacks = 0;
    let mut steps = Vec::new();
    let mut fallback_budget = 100;
    let mut lipschitz: Option<f64> = None;
    let (mut y, mut z);
    loop {
        y = problem.state_vector(&u);
        z = problem.adjoint_vector(&y);
        let x = BlockVector {
            state: y.clone(),
            control: u.clone(),
            adjoint: z.clone(),
            multiplier: mu.clone(),
        };
        let r = residual_at(problem, &x)?;
        let res = scaled_residual_norm(problem, &x, &r);
        let zarg: Vec<f64> = u.iter().zip(&mu).map(|(u, m)| nu * u + m).collect();
        let br = branches(&zarg, params);
        let active = ActiveSet::from_branches(&br);
        let repeated = active_set_history.last() == Some(&active);
        residual_history.push(res);
        active_set_history.push(active.clone());
        branch_history.push(br.clone());
        if res <= config.tol && repeated {
            converged = true;
            break;
        }
        if iterations >= config.max_iter {
            break;
        }

        let newton = NewtonSystem::new(problem, active)?;
        // y and z are recomputed from u at every iterate, so rows 1 and 3
        // hold only matvec roundoff; feeding it back would let K⁻¹ amplify it
        let rhs = BlockVector {
            state: vec![0.0; r.state.len()],
            control: r.control.iter().map(|v| -v).collect(),
            adjoint: vec![0.0; r.adjoint.len()],
            multiplier: newton.scale_last_row(&r.multiplier).into_iter().map(|v| -v).collect(),
        };
        let d = newton.solve(&rhs);
        // full step with the branch values imposed exactly
        let mut u_full = u.clone();
        let mut mu_full = mu.clone();
        for j in 0..n {
            u_full[j] += d.control[j];
            mu_full[j] += d.multiplier[j];
            let (a, b) = (params.lower().values()[j], params.upper().values()[j]);
            match br[j] {
                Branch::Zero => u_full[j] = 0.0,
                Branch::Lower => u_full[j] = a,
                Branch::Upper => u_full[j] = b,
                Branch::PositiveFree => mu_full[j] = eta,
                Branch::NegativeFree => mu_full[j] = -eta,
            }
        }
        // globalization: the reduced objective (at the box projection) must
        // not increase, which rules out cycling; plain SSN can cycle when G
        // dominates ν
        let j0 = objective(problem, &u)?;
        let slack = 1e-12 * j0.abs();
        let mut step = None;
        if objective(problem, &u_full)? <= j0 + slack {
            step = Some((u_full, mu_full, StepKind::Full));
        } else {
            let mut alpha = 0.5;
            while alpha >= 1.0 / 16.0 {
                let ut: Vec<f64> = u.iter().zip(&d.control).map(|(x, dx)| x + alpha * dx).collect();
                if objective(problem, &ut)? < j0 {
                    let mt: Vec<f64> = mu.iter().zip(&d.multiplier).map(|(x, dx)| x + alpha * dx).collect();
                    step = Some((ut, mt, StepKind::Damped(alpha)));
                    break;
                }
                alpha *= 0.5;
            }
        }
        match step {
            Some((un, mn, kind)) => {
                (u, mu) = (un, mn);
                steps.push(kind);
            }
            None => {
                // Newton direction is not a descent direction here (the
                // branches are cycling); make progress with accelerated
                // proximal gradient and restart Newton from there
                let lip = *lipschitz.get_or_insert_with(|| 1.02 * problem.hessian_norm_estimate(60));
                fallback_budget *= 2;
                u = accelerated_prox_steps(problem, &u, lip, fallback_budget);
                let pbar = problem.adjoint_mean(&u);
                mu = (0..n).map(|j| pbar[j] - nu * u[j]).collect();
                fallbacks += 1;
                steps.push(StepKind::Proximal);
            }
        }
        iterations += 1;
    }

    let u_field = P0Field::new(mesh, u.clone())?;
    let mu_field = P0Field::new(mesh, mu.clone())?;
    let state = problem.state_solution(&y);
    let adjoint = problem.adjoint_solution(&z);
    let multipliers = MultiplierState::split(&u_field, &mu_field, params)?;
    let kkt = check_kkt(&u_field, &multipliers, params)?;
    let cost = problem.cost_with_state(&u_field, &state)?;
    let vi_residual = if params.is_admissible(&u_field, 1e-12) {
        variational_inequality_residual(mesh, &u_field, &adjoint.p, params)?
    } else {
        f64::INFINITY
    };
    let zarg: Vec<f64> = u.iter().zip(&mu).map(|(u, m)| nu * u + m).collect();
    Ok(SsnResult {
        branches: branches(&zarg, params),
        u: u_field,
        state,
        adjoint,
        multipliers,
        cost,
        iterations,
        fallbacks,
        steps,
        residual_history,
        active_set_history,
        branch_history,
        converged,
        vi_residual,
        kkt,
    })
}

/// Pure L² control (`η = 0`): the same iteration, active only on the bounds.
pub fn solve_pure_l2(problem: &ControlProblem, config: &SsnConfig) -> Result<SsnResult> {
    ssn_solve(&problem.with_eta(0.0)?, config)
}
