//! Problem families and the numerical studies built on them: η sweeps,
//! locking comparisons and mesh convergence. Everything the command-line
//! driver writes is computed here.

use std::time::Instant;

use rayon::prelude::*;

use crate::control::{CLastTerm, ControlParams};
use crate::data::Profile;
use crate::error::{invalid, Result};
use crate::fem::{
    error_norms, BeamParams, ErrorNorms, ExactPair, LoadData, Reference, Scheme, DEFAULT_POISSON,
    DEFAULT_SHEAR_CORRECTION, DEFAULT_YOUNG_MODULUS,
};
use crate::mesh::{eval_p1, p0_l2_distance, p1_h1_seminorm, p1_l2_norm, Mesh1D, P0Field, P1Field};
use crate::problem::ControlProblem;
use crate::ssn::{ssn_solve, SsnConfig, SsnResult};

/// The η grid of the sparsity benchmark.
pub const BENCHMARK_ETAS: [f64; 10] = [0.0, 3e-6, 6e-6, 9e-6, 1.2e-5, 1.5e-5, 1.8e-5, 2.1e-5, 2.4e-5, 2.7e-5];

/// Published reference values for the sparsity benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub eta: f64,
    pub cost: f64,
    pub l2_norm: f64,
    pub null_count: usize,
}

pub const BENCHMARK_TABLE: [TableRow; 10] = [
    TableRow { eta: 0.0, cost: 1.6986e-06, l2_norm: 9.4704, null_count: 0 },
    TableRow { eta: 3e-06, cost: 6.3031e-06, l2_norm: 3.179, null_count: 530 },
    TableRow { eta: 6e-06, cost: 8.9758e-06, l2_norm: 2.813, null_count: 545 },
    TableRow { eta: 9e-06, cost: 1.1125e-05, l2_norm: 2.5228, null_count: 555 },
    TableRow { eta: 1.2e-05, cost: 1.2841e-05, l2_norm: 2.203, null_count: 564 },
    TableRow { eta: 1.5e-05, cost: 1.4146e-05, l2_norm: 1.8141, null_count: 571 },
    TableRow { eta: 1.8e-05, cost: 1.5049e-05, l2_norm: 1.2875, null_count: 576 },
    TableRow { eta: 2.1e-05, cost: 1.5553e-05, l2_norm: 0.66013, null_count: 582 },
    TableRow { eta: 2.4e-05, cost: 1.5674e-05, l2_norm: 0.046107, null_count: 596 },
    TableRow { eta: 2.7e-05, cost: 1.5677e-05, l2_norm: 0.0, null_count: 600 },
];

/// Everything that defines a control problem except the mesh, the thickness
/// and the scheme, so the same problem can be posed on many discretizations.
#[derive(Debug, Clone)]
pub struct ProblemFamily {
    pub length: f64,
    pub young_modulus: f64,
    pub poisson: f64,
    pub shear_correction: f64,
    pub kappa_override: Option<f64>,
    pub nu: f64,
    pub eta: f64,
    pub lower: Profile,
    pub upper: Profile,
    pub loads: LoadData,
    pub l1_half_factor: bool,
    pub c_last_term: CLastTerm,
}

impl ProblemFamily {
    /// The sparsity benchmark: unit length, `ν = 5e-9`, `f = 100 sin(8πx)`,
    /// `w_d = 0`, bounds `±11.05`, physical material constants.
    pub fn benchmark() -> Self {
        Self {
            length: 1.0,
            young_modulus: DEFAULT_YOUNG_MODULUS,
            poisson: DEFAULT_POISSON,
            shear_correction: DEFAULT_SHEAR_CORRECTION,
            kappa_override: None,
            nu: 5e-9,
            eta: 0.0,
            lower: Profile::Constant(-11.05),
            upper: Profile::Constant(11.05),
            loads: LoadData {
                f: Profile::sine(100.0, 8.0),
                ..Default::default()
            },
            l1_half_factor: false,
            c_last_term: CLastTerm::Symmetric,
        }
    }

    /// A nondimensional family (bending stiffness 1) in which the control
    /// visibly moves the state, so discretization effects show in `u`.
    pub fn nondimensional() -> Self {
        Self {
            length: 1.0,
            young_modulus: 12.0,
            poisson: 0.3,
            shear_correction: DEFAULT_SHEAR_CORRECTION,
            kappa_override: Some(1.0),
            nu: 1e-6,
            eta: 1e-5,
            lower: Profile::Constant(-2.0),
            upper: Profile::Constant(2.0),
            loads: LoadData {
                f: Profile::sine(1.0, 2.0),
                w_d: Profile::sine(0.02, 1.0),
                ..Default::default()
            },
            l1_half_factor: false,
            c_last_term: CLastTerm::Symmetric,
        }
    }

    pub fn beam(&self, thickness: f64) -> Result<BeamParams> {
        match self.kappa_override {
            Some(k) => BeamParams::with_kappa(self.young_modulus, thickness, self.shear_correction, self.poisson, k),
            None => BeamParams::new(self.young_modulus, thickness, self.shear_correction, self.poisson),
        }
    }

    pub fn control(&self, mesh: &Mesh1D) -> Result<ControlParams> {
        let mut c = ControlParams::new(mesh, self.nu, self.eta, &self.lower, &self.upper)?;
        c.l1_half_factor = self.l1_half_factor;
        c.c_last_term = self.c_last_term;
        Ok(c)
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        Self { eta, ..self.clone() }
    }

    pub fn build(&self, n: usize, thickness: f64, scheme: Scheme) -> Result<ControlProblem> {
        let mesh = Mesh1D::uniform(n, self.length)?;
        let control = self.control(&mesh)?;
        ControlProblem::new(mesh, self.beam(thickness)?, scheme, self.loads.clone(), control)
    }
}

/// One row of an η sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub eta: f64,
    pub cost: f64,
    pub l2_norm: f64,
    /// Elements where the solver set `u` exactly to zero.
    pub null_count: usize,
    pub iterations: usize,
    pub runtime_secs: f64,
    pub converged: bool,
}

impl SweepRecord {
    pub fn from_result(problem: &ControlProblem, result: &SsnResult, runtime_secs: f64) -> Self {
        Self {
            eta: problem.control().eta(),
            cost: result.cost.total,
            l2_norm: result.u.l2_norm(problem.mesh()),
            null_count: result.null_count(),
            iterations: result.iterations,
            runtime_secs,
            converged: result.converged,
        }
    }
}

/// Solves `problem` for each η in order, warm-starting every solve from the
/// previous control. Non-convergence is recorded, not fatal.
pub fn eta_sweep(problem: &ControlProblem, etas: &[f64], config: &SsnConfig) -> Result<Vec<(SweepRecord, SsnResult)>> {
    if etas.is_empty() {
        return Err(invalid("eta list is empty"));
    }
    if etas.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("eta list must be sorted ascending"));
    }
    let mut out: Vec<(SweepRecord, SsnResult)> = Vec::with_capacity(etas.len());
    for &eta in etas {
        let p = problem.with_eta(eta)?;
        let cfg = match out.last() {
            Some((_, prev)) => config.warm_started(prev.u.clone(), prev.multipliers.mu.clone()),
            None => config.clone(),
        };
        let start = Instant::now();
        let res = ssn_solve(&p, &cfg)?;
        let rec = SweepRecord::from_result(&p, &res, start.elapsed().as_secs_f64());
        out.push((rec, res));
    }
    Ok(out)
}

/// Control L² error of one discretization against a fine reference.
#[derive(Debug, Clone, PartialEq)]
pub struct LockingRecord {
    pub scheme: Scheme,
    pub thickness: f64,
    pub n: usize,
    pub control_l2_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// For every thickness, solves with both schemes on every `n` and measures
/// the control error against a locking-free solve with `n_ref` elements.
/// Grid cells run in parallel; rows come back sorted by
/// `(scheme, thickness, n)`.
pub fn locking_study(
    family: &ProblemFamily,
    thicknesses: &[f64],
    ns: &[usize],
    n_ref: usize,
    config: &SsnConfig,
) -> Result<Vec<LockingRecord>> {
    if thicknesses.is_empty() || ns.is_empty() {
        return Err(invalid("thickness and mesh lists must be nonempty"));
    }
    let refs: Vec<(f64, Mesh1D, P0Field)> = thicknesses
        .par_iter()
        .map(|&t| {
            let p = family.build(n_ref, t, Scheme::LockingFree)?;
            let r = ssn_solve(&p, config)?;
            Ok((t, p.mesh().clone(), r.u))
        })
        .collect::<Result<_>>()?;
    let cells: Vec<(Scheme, usize, usize)> = [Scheme::Standard, Scheme::LockingFree]
        .into_iter()
        .flat_map(|s| (0..thicknesses.len()).flat_map(move |ti| ns.iter().map(move |&n| (s, ti, n))))
        .collect();
    let mut rows: Vec<LockingRecord> = cells
        .par_iter()
        .map(|&(scheme, ti, n)| {
            let (t, ref_mesh, ref_u) = &refs[ti];
            let p = family.build(n, *t, scheme)?;
            let r = ssn_solve(&p, config)?;
            Ok(LockingRecord {
                scheme,
                thickness: *t,
                n,
                control_l2_error: p0_l2_distance(p.mesh(), &r.u, ref_mesh, ref_u)?,
                iterations: r.iterations,
                converged: r.converged,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| {
        (a.scheme, a.thickness, a.n)
            .partial_cmp(&(b.scheme, b.thickness, b.n))
            .expect("finite thickness")
    });
    Ok(rows)
}

/// Errors of one mesh against the fine reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub n: usize,
    pub h: f64,
    pub control_l2: f64,
    pub state_l2: f64,
    pub state_h1: f64,
    pub adjoint_l2: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Log-log slopes of the error columns against `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRates {
    pub control_l2: f64,
    pub state_l2: f64,
    pub state_h1: f64,
    pub adjoint_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub thickness: f64,
    pub scheme: Scheme,
    pub n_ref: usize,
    pub records: Vec<ConvergenceRecord>,
    pub rates: ConvergenceRates,
}

/// Control, state and adjoint errors on each `n` against a solve with
/// `n_ref` elements; every `n` must divide `n_ref`.
pub fn convergence_study(
    family: &ProblemFamily,
    thickness: f64,
    scheme: Scheme,
    ns: &[usize],
    n_ref: usize,
    config: &SsnConfig,
) -> Result<ConvergenceReport> {
    if ns.len() < 2 {
        return Err(invalid("a convergence study needs at least two meshes"));
    }
    if let Some(n) = ns.iter().find(|&&n| n == 0 || n_ref % n != 0) {
        return Err(invalid(format!("mesh size {n} does not divide the reference size {n_ref}")));
    }
    let rp = family.build(n_ref, thickness, scheme)?;
    let rr = ssn_solve(&rp, config)?;
    let fine = rp.mesh();
    let mut records: Vec<ConvergenceRecord> = ns
        .par_iter()
        .map(|&n| {
            let p = family.build(n, thickness, scheme)?;
            let r = ssn_solve(&p, config)?;
            let mesh = p.mesh();
            let w = nested_p1_error(mesh, &r.state.w, fine, &rr.state.w)?;
            let th = nested_p1_error(mesh, &r.state.theta, fine, &rr.state.theta)?;
            let pe = nested_p1_error(mesh, &r.adjoint.p, fine, &rr.adjoint.p)?;
            let qe = nested_p1_error(mesh, &r.adjoint.q, fine, &rr.adjoint.q)?;
            Ok(ConvergenceRecord {
                n,
                h: mesh.h(),
                control_l2: p0_l2_distance(mesh, &r.u, fine, &rr.u)?,
                state_l2: w.l2.hypot(th.l2),
                state_h1: w.h1.hypot(th.h1),
                adjoint_l2: pe.l2.hypot(qe.l2),
                iterations: r.iterations,
                converged: r.converged,
            })
        })
        .collect::<Result<_>>()?;
    records.sort_by_key(|r| r.n);
    let rates = rates_of(&records);
    Ok(ConvergenceReport {
        thickness,
        scheme,
        n_ref,
        records,
        rates,
    })
}

fn rates_of(records: &[ConvergenceRecord]) -> ConvergenceRates {
    let h: Vec<f64> = records.iter().map(|r| r.h).collect();
    let col = |f: fn(&ConvergenceRecord) -> f64| fit_slope(&h, &records.iter().map(f).collect::<Vec<_>>());
    ConvergenceRates {
        control_l2: col(|r| r.control_l2),
        state_l2: col(|r| r.state_l2),
        state_h1: col(|r| r.state_h1),
        adjoint_l2: col(|r| r.adjoint_l2),
    }
}

/// L² and H¹ norms of `coarse - fine` for a P1 field on a mesh nested in
/// `fine`. Exact: the coarse field is linear on every fine element.
pub fn nested_p1_error(coarse_mesh: &Mesh1D, coarse: &P1Field, fine_mesh: &Mesh1D, fine: &P1Field) -> Result<ErrorNorms> {
    let lifted = fine_mesh
        .nodes()
        .iter()
        .map(|&x| eval_p1(coarse_mesh, coarse, x))
        .collect::<Result<Vec<_>>>()?;
    let diff: Vec<f64> = lifted.iter().zip(fine.values()).map(|(a, b)| a - b).collect();
    let d = P1Field::from_nodal(fine_mesh, diff)?;
    let l2 = p1_l2_norm(fine_mesh, &d);
    Ok(ErrorNorms {
        l2,
        h1: l2.hypot(p1_h1_seminorm(fine_mesh, &d)),
        linf: d.max_abs(),
    })
}

/// Least-squares slope of `log y` against `log x`. Zero or non-finite
/// entries are skipped; fewer than two usable points give NaN.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(sx, sy), (a, b)| (sx + a / m, sy + b / m));
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |(sxy, sxx), (a, b)| (sxy + (a - mx) * (b - my), sxx + (a - mx) * (a - mx)));
    sxy / sxx
}

/// State errors for the manufactured pair `w = sin²(πx)`,
/// `θ = w' - t² sin(πx)` on the unit interval, one row per `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedRecord {
    pub thickness: f64,
    pub n: usize,
    pub h: f64,
    pub errors: ErrorNorms,
}

/// Loads `(f, g)` producing the manufactured pair for the given beam.
pub fn manufactured_loads(beam: &BeamParams) -> LoadData {
    use std::f64::consts::PI;
    let t2 = beam.thickness().powi(2);
    let kappa = beam.kappa();
    let e12 = beam.bending_coeff();
    // shear γ = (κ/t²)(w' - θ) = κ ψ with ψ = sin(πx)
    let f = move |x: f64| -kappa * PI * (PI * x).cos();
    let g = move |x: f64| {
        // θ'' = w''' + t² π² sin(πx), w''' = -4π³ sin(2πx)
        let theta_dd = -4.0 * PI.powi(3) * (2.0 * PI * x).sin() + t2 * PI * PI * (PI * x).sin();
        (12.0 / t2) * (-e12 * theta_dd - kappa * (PI * x).sin())
    };
    LoadData {
        f: Profile::function(f),
        g: Profile::function(g),
        ..Default::default()
    }
}

/// State error study for the manufactured solution; no control involved.
pub fn manufactured_study(
    beam_at: impl Fn(f64) -> Result<BeamParams> + Sync,
    thicknesses: &[f64],
    ns: &[usize],
    scheme: Scheme,
) -> Result<Vec<ManufacturedRecord>> {
    use std::f64::consts::PI;
    let cells: Vec<(f64, usize)> = thicknesses
        .iter()
        .flat_map(|&t| ns.iter().map(move |&n| (t, n)))
        .collect();
    cells
        .par_iter()
        .map(|&(t, n)| {
            let beam = beam_at(t)?;
            let loads = manufactured_loads(&beam);
            let mesh = Mesh1D::uniform(n, 1.0)?;
            let st = crate::fem::solve_state(&mesh, &beam, &loads, &P0Field::zeros(&mesh), scheme)?;
            let t2 = t * t;
            let w = |x: f64| (PI * x).sin().powi(2);
            let dw = |x: f64| PI * (2.0 * PI * x).sin();
            let theta = move |x: f64| PI * (2.0 * PI * x).sin() - t2 * (PI * x).sin();
            let dtheta = move |x: f64| 2.0 * PI * PI * (2.0 * PI * x).cos() - t2 * PI * (PI * x).cos();
            let exact = ExactPair {
                w: &w,
                dw: &dw,
                theta: &theta,
                dtheta: &dtheta,
            };
            Ok(ManufacturedRecord {
                thickness: t,
                n,
                h: mesh.h(),
                errors: error_norms(&mesh, &st.w, &st.theta, &Reference::Exact(exact))?,
            })
        })
        .collect()
}
