//! The fully discrete optimal control problem.
//!
//! Minimize `½||w_h - w_d||² + (ν/2)||u||² + η||u||_{L¹}` over piecewise
//! constant `u` with elementwise bounds, where `w_h` solves the discrete
//! beam problem with load `f + u`. The reduced maps used by the solvers are
//!
//! * `u -> y = K⁻¹(F + B u)` (state),
//! * `y -> z = K⁻¹(r_d - M y)` (adjoint),
//! * `z -> p̄` (elementwise mean of the adjoint deflection),
//!
//! so that `ν u - p̄` is the pointwise gradient of the smooth part.

use std::sync::Arc;

use crate::control::{cost as control_cost, tracking_term, ControlParams, CostBreakdown};
use crate::error::{check_len, Result};
use crate::fem::{
    add_control_load, apply_tracking_mass, assemble_load, block_average, AdjointSolution, BeamParams,
    BeamSystem, LoadData, Scheme, StateSolution,
};
use crate::mesh::{Mesh1D, P0Field};

#[derive(Debug, Clone)]
pub struct ControlProblem {
    system: Arc<BeamSystem>,
    loads: LoadData,
    control: ControlParams,
    // ∫ f v + (t²/12) ∫ g β
    base_load: Vec<f64>,
    // ∫ w_d v [+ (t²/12) ∫ θ_d β]
    target_rhs: Vec<f64>,
    theta_weight: f64,
}

impl ControlProblem {
    pub fn new(
        mesh: Mesh1D,
        beam: BeamParams,
        scheme: Scheme,
        loads: LoadData,
        control: ControlParams,
    ) -> Result<Self> {
        check_len(mesh.element_count(), control.len())?;
        loads.check(&mesh)?;
        let system = Arc::new(BeamSystem::new(mesh, beam, scheme)?);
        Self::with_system(system, loads, control)
    }

    /// Reuses an existing factorization.
    pub fn with_system(system: Arc<BeamSystem>, loads: LoadData, control: ControlParams) -> Result<Self> {
        let mesh = system.mesh();
        check_len(mesh.element_count(), control.len())?;
        loads.check(mesh)?;
        let base_load = assemble_load(mesh, system.params(), &loads.f, &P0Field::zeros(mesh), &loads.g)?;
        let zero = vec![0.0; base_load.len()];
        let target_rhs = system.adjoint_rhs(&zero, &loads);
        let theta_weight = if loads.track_rotation {
            system.params().moment_coeff()
        } else {
            0.0
        };
        Ok(Self {
            system,
            loads,
            control,
            base_load,
            target_rhs,
            theta_weight,
        })
    }

    /// Same problem with a different L¹ weight; shares the factorization.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        let mut out = self.clone();
        out.control = self.control.with_eta(eta)?;
        Ok(out)
    }

    pub fn with_control(&self, control: ControlParams) -> Result<Self> {
        check_len(self.n(), control.len())?;
        let mut out = self.clone();
        out.control = control;
        Ok(out)
    }

    pub fn system(&self) -> &Arc<BeamSystem> {
        &self.system
    }
    pub fn mesh(&self) -> &Mesh1D {
        self.system.mesh()
    }
    pub fn beam(&self) -> &BeamParams {
        self.system.params()
    }
    pub fn scheme(&self) -> Scheme {
        self.system.scheme()
    }
    pub fn loads(&self) -> &LoadData {
        &self.loads
    }
    pub fn control(&self) -> &ControlParams {
        &self.control
    }

    /// Number of control elements.
    pub fn n(&self) -> usize {
        self.mesh().element_count()
    }

    /// Size of the interior `(w, θ)` vector.
    pub fn state_dim(&self) -> usize {
        self.base_load.len()
    }

    pub fn base_load(&self) -> &[f64] {
        &self.base_load
    }

    pub fn target_rhs(&self) -> &[f64] {
        &self.target_rhs
    }

    pub fn theta_weight(&self) -> f64 {
        self.theta_weight
    }

    /// `B u`: load vector of a piecewise constant control.
    pub fn control_load(&self, u: &[f64]) -> Vec<f64> {
        let mut rhs = vec![0.0; self.state_dim()];
        add_control_load(self.mesh(), u, &mut rhs);
        rhs
    }

    /// Elementwise mean of the w-type block (`Bᵀ z / h`).
    pub fn mean_deflection(&self, z: &[f64]) -> Vec<f64> {
        block_average(self.mesh(), z, 0)
    }

    /// Tracking mass `M y`.
    pub fn tracking_mass(&self, y: &[f64]) -> Vec<f64> {
        apply_tracking_mass(self.mesh(), y, self.theta_weight)
    }

    /// State vector for control `u`.
    pub fn state_vector(&self, u: &[f64]) -> Vec<f64> {
        let mut rhs = self.control_load(u);
        for (r, b) in rhs.iter_mut().zip(&self.base_load) {
            *r += b;
        }
        self.system.solve(&rhs)
    }

    /// Adjoint vector for state `y`.
    pub fn adjoint_vector(&self, y: &[f64]) -> Vec<f64> {
        let my = self.tracking_mass(y);
        let rhs: Vec<f64> = self.target_rhs.iter().zip(&my).map(|(t, m)| t - m).collect();
        self.system.solve(&rhs)
    }

    /// `p̄(u)`.
    pub fn adjoint_mean(&self, u: &[f64]) -> Vec<f64> {
        self.mean_deflection(&self.adjoint_vector(&self.state_vector(u)))
    }

    /// Linear part `G v = avg(K⁻¹ M K⁻¹ B v)`, so that `p̄(u) = p̄(0) - G u`.
    pub fn g_apply(&self, v: &[f64]) -> Vec<f64> {
        let y = self.system.solve(&self.control_load(v));
        let z = self.system.solve(&self.tracking_mass(&y));
        self.mean_deflection(&z)
    }

    /// `(ν + G) v`, the reduced Hessian in pointwise form. Self-adjoint and
    /// positive definite in the `h`-weighted inner product.
    pub fn hessian_apply(&self, v: &[f64]) -> Vec<f64> {
        let nu = self.control.nu();
        self.g_apply(v)
            .into_iter()
            .zip(v)
            .map(|(g, x)| g + nu * x)
            .collect()
    }

    /// Largest eigenvalue of `ν + G` in the `h`-weighted inner product, by
    /// power iteration from a fixed start (slightly underestimates).
    pub fn hessian_norm_estimate(&self, iterations: usize) -> f64 {
        let n = self.n();
        let mut v: Vec<f64> = (0..n).map(|j| 1.0 + 0.1 * ((j * 7919) % 13) as f64).collect();
        let mut lambda = self.control.nu();
        for _ in 0..iterations.max(1) {
            let norm = self.inner(&v, &v).sqrt();
            if norm == 0.0 {
                break;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            let hv = self.hessian_apply(&v);
            lambda = self.inner(&v, &hv);
            v = hv;
        }
        lambda
    }

    /// Pointwise gradient `ν u - p̄` of the smooth part.
    pub fn reduced_gradient(&self, u: &[f64]) -> Vec<f64> {
        let nu = self.control.nu();
        self.adjoint_mean(u)
            .into_iter()
            .zip(u)
            .map(|(p, x)| nu * x - p)
            .collect()
    }

    /// `h`-weighted inner product.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(self.mesh().sizes())
            .map(|((x, y), h)| h * x * y)
            .sum()
    }

    pub fn state_solution(&self, y: &[f64]) -> StateSolution {
        self.system.state_from_vector(y)
    }

    pub fn adjoint_solution(&self, z: &[f64]) -> AdjointSolution {
        self.system.adjoint_from_vector(z)
    }

    /// Full cost breakdown at `u`.
    pub fn cost(&self, u: &P0Field) -> Result<CostBreakdown> {
        check_len(self.n(), u.len())?;
        let state = self.state_solution(&self.state_vector(u.values()));
        self.cost_with_state(u, &state)
    }

    pub fn cost_with_state(&self, u: &P0Field, state: &StateSolution) -> Result<CostBreakdown> {
        let mesh = self.mesh();
        let mut c = control_cost(mesh, u, &state.w, &self.loads.w_d, &self.control)?;
        if self.loads.track_rotation {
            let rot = self.theta_weight * tracking_term(mesh, &state.theta, &self.loads.theta_d)?;
            c = CostBreakdown::new(c.tracking, rot, c.l2_term, c.l1_term);
        }
        Ok(c)
    }

    /// Smooth part `½||w - w_d||² [+ rotation] + (ν/2)||u||²`.
    pub fn smooth_cost(&self, u: &[f64]) -> Result<f64> {
        let c = self.cost(&P0Field::new(self.mesh(), u.to_vec())?)?;
        Ok(c.total - c.l1_term)
    }
}
