//! Finite element discretization of the static Timoshenko beam.
//!
//! Both unknowns `w` (deflection) and `theta` (rotation) are continuous
//! piecewise linears with homogeneous Dirichlet conditions. The discrete
//! bilinear form is
//!
//! ```text
//! a(w, θ; v, β) = (E/12) ∫ θ' β' + (κ/t²) ∫ (w' - θ)(v' - β)
//! ```
//!
//! The locking-free scheme evaluates the shear integral with the one-point
//! midpoint rule, which is algebraically the mixed method with a piecewise
//! constant shear stress `γ` eliminated element by element. The standard
//! scheme integrates the shear term exactly and locks as `t -> 0`.
//!
//! Unknowns are interleaved per interior node, `(w_1, θ_1, w_2, θ_2, ...)`,
//! which gives a symmetric band of half-width 3.

use crate::banded::{BandCholesky, SymBandMatrix};
use crate::data::Profile;
use crate::error::{check_len, invalid, Result};
use crate::mesh::{p1_h1_seminorm, p1_l2_norm, Mesh1D, P0Field, P1Field};
use crate::quadrature::QuadratureRule;

/// Half bandwidth of the stiffness matrix in the interleaved ordering.
pub const STIFFNESS_BANDWIDTH: usize = 3;

/// Young modulus used in the reference experiments (Pa).
pub const DEFAULT_YOUNG_MODULUS: f64 = 1.44e9;
/// Poisson ratio used in the reference experiments.
pub const DEFAULT_POISSON: f64 = 0.35;
/// Shear correction factor.
pub const DEFAULT_SHEAR_CORRECTION: f64 = 5.0 / 6.0;

/// Material and geometric constants of the beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    young: f64,
    thickness: f64,
    shear_correction: f64,
    poisson: f64,
    kappa: f64,
}

impl BeamParams {
    /// `κ = k G` with `G = E / (2 (1 + ν̄))`.
    pub fn new(young: f64, thickness: f64, shear_correction: f64, poisson: f64) -> Result<Self> {
        let shear_modulus = young / (2.0 * (1.0 + poisson));
        Self::with_kappa(young, thickness, shear_correction, poisson, shear_correction * shear_modulus)
    }

    /// Same as [`BeamParams::new`] but with an explicit shear coefficient.
    pub fn with_kappa(
        young: f64,
        thickness: f64,
        shear_correction: f64,
        poisson: f64,
        kappa: f64,
    ) -> Result<Self> {
        if !(young > 0.0 && young.is_finite()) {
            return Err(invalid(format!("Young modulus must be positive, got {young}")));
        }
        if !(thickness > 0.0 && thickness <= 1.0) {
            return Err(invalid(format!("thickness must lie in (0, 1], got {thickness}")));
        }
        if !(shear_correction > 0.0 && shear_correction < 1.0) {
            return Err(invalid(format!(
                "shear correction factor must lie in (0, 1), got {shear_correction}"
            )));
        }
        if !(0.0..0.5).contains(&poisson) {
            return Err(invalid(format!("Poisson ratio must lie in [0, 0.5), got {poisson}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(invalid(format!("shear coefficient must be positive, got {kappa}")));
        }
        Ok(Self {
            young,
            thickness,
            shear_correction,
            poisson,
            kappa,
        })
    }

    /// Reference material with the given thickness.
    pub fn reference(thickness: f64) -> Result<Self> {
        Self::new(
            DEFAULT_YOUNG_MODULUS,
            thickness,
            DEFAULT_SHEAR_CORRECTION,
            DEFAULT_POISSON,
        )
    }

    pub fn young(&self) -> f64 {
        self.young
    }
    pub fn thickness(&self) -> f64 {
        self.thickness
    }
    pub fn shear_correction(&self) -> f64 {
        self.shear_correction
    }
    pub fn poisson(&self) -> f64 {
        self.poisson
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Coefficient `E/12` of the bending term.
    pub fn bending_coeff(&self) -> f64 {
        self.young / 12.0
    }

    /// Coefficient `κ/t²` of the shear term.
    pub fn shear_coeff(&self) -> f64 {
        self.kappa / (self.thickness * self.thickness)
    }

    /// Scaling `t²/12` of the moment load and rotation tracking terms.
    pub fn moment_coeff(&self) -> f64 {
        self.thickness * self.thickness / 12.0
    }

    /// Copy with a different thickness (κ is kept).
    pub fn with_thickness(&self, thickness: f64) -> Result<Self> {
        Self::with_kappa(
            self.young,
            thickness,
            self.shear_correction,
            self.poisson,
            self.kappa,
        )
    }
}

/// Which rule integrates the shear energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Exact (two-point Gauss) shear integration; locks for thin beams.
    Standard,
    /// Reduced (midpoint) shear integration, equivalent to the mixed method.
    LockingFree,
}

impl Scheme {
    pub fn shear_rule(self) -> QuadratureRule {
        match self {
            Scheme::Standard => QuadratureRule::gauss2(),
            Scheme::LockingFree => QuadratureRule::midpoint(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Standard => "standard",
            Scheme::LockingFree => "locking_free",
        }
    }
}

/// Loads and tracking targets.
#[derive(Debug, Clone, Default)]
pub struct LoadData {
    /// Transverse load `f`.
    pub f: Profile,
    /// Bending moment `g`.
    pub g: Profile,
    /// Desired deflection `w_d`.
    pub w_d: Profile,
    /// Desired rotation `θ_d`; only used when `track_rotation` is set.
    pub theta_d: Profile,
    /// Adds `(t²/12) ∫ (θ_d - θ) β` to the adjoint right-hand side, i.e.
    /// tracks the rotation with weight `t²/24` in the cost.
    pub track_rotation: bool,
}

impl LoadData {
    pub fn check(&self, mesh: &Mesh1D) -> Result<()> {
        self.f.check(mesh)?;
        self.g.check(mesh)?;
        self.w_d.check(mesh)?;
        self.theta_d.check(mesh)
    }
}

/// Discrete state `(w, θ)` and the recovered shear stress `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSolution {
    pub w: P1Field,
    pub theta: P1Field,
    pub gamma: P0Field,
}

/// Discrete adjoint `(p, q)` and its shear variable `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointSolution {
    pub p: P1Field,
    pub q: P1Field,
    pub r: P0Field,
}

#[inline]
fn w_dof(node: usize) -> usize {
    2 * (node - 1)
}

#[inline]
fn theta_dof(node: usize) -> usize {
    2 * (node - 1) + 1
}

/// Global dofs of element `j` in local order `(w_a, θ_a, w_b, θ_b)`.
fn element_dofs(mesh: &Mesh1D, j: usize) -> [Option<usize>; 4] {
    let last = mesh.node_count() - 1;
    let dof = |node: usize, f: fn(usize) -> usize| {
        if node == 0 || node == last {
            None
        } else {
            Some(f(node))
        }
    };
    [
        dof(j, w_dof),
        dof(j, theta_dof),
        dof(j + 1, w_dof),
        dof(j + 1, theta_dof),
    ]
}

/// Element stiffness in local order `(w_a, θ_a, w_b, θ_b)`.
pub fn element_stiffness(h: f64, params: &BeamParams, scheme: Scheme) -> [[f64; 4]; 4] {
    let mut k = [[0.0; 4]; 4];
    let eb = params.bending_coeff() / h;
    k[1][1] += eb;
    k[1][3] -= eb;
    k[3][1] -= eb;
    k[3][3] += eb;
    let cs = params.shear_coeff();
    for (xi, wq) in scheme.shear_rule().iter() {
        // shear strain w' - θ at xi, as a row over local dofs
        let g = [-1.0 / h, -(1.0 - xi), 1.0 / h, -xi];
        for a in 0..4 {
            for b in 0..4 {
                k[a][b] += cs * h * wq * g[a] * g[b];
            }
        }
    }
    k
}

/// Global stiffness on the interior `(w, θ)` unknowns.
pub fn assemble_stiffness(mesh: &Mesh1D, params: &BeamParams, scheme: Scheme) -> SymBandMatrix {
    let m = 2 * mesh.interior_count();
    let mut k = SymBandMatrix::zeros(m, STIFFNESS_BANDWIDTH);
    for (j, &h) in mesh.sizes().iter().enumerate() {
        let ke = element_stiffness(h, params, scheme);
        let dofs = element_dofs(mesh, j);
        for a in 0..4 {
            let Some(ga) = dofs[a] else { continue };
            for b in 0..=a {
                let Some(gb) = dofs[b] else { continue };
                // each unordered pair once; the band stores both triangles
                k.add(ga, gb, ke[a][b]);
            }
        }
    }
    k
}

/// Adds `∫ s φ_i` over the selected block (0 = w, 1 = θ), scaled by `scale`.
fn add_profile_rhs(mesh: &Mesh1D, rhs: &mut [f64], s: &Profile, block: usize, scale: f64) {
    if s.is_zero() {
        return;
    }
    let rule = QuadratureRule::gauss2();
    for j in 0..mesh.element_count() {
        let dofs = element_dofs(mesh, j);
        let (a, b) = mesh.element(j);
        let h = b - a;
        let (mut ia, mut ib) = (0.0, 0.0);
        for (xi, wq) in rule.iter() {
            let v = s.eval_in(mesh, j, a + xi * h);
            ia += wq * v * (1.0 - xi);
            ib += wq * v * xi;
        }
        if let Some(g) = dofs[block] {
            rhs[g] += scale * h * ia;
        }
        if let Some(g) = dofs[2 + block] {
            rhs[g] += scale * h * ib;
        }
    }
}

/// Right-hand side `∫ (f + u) v + (t²/12) ∫ g β`.
pub fn assemble_load(
    mesh: &Mesh1D,
    params: &BeamParams,
    f: &Profile,
    u: &P0Field,
    g: &Profile,
) -> Result<Vec<f64>> {
    f.check(mesh)?;
    g.check(mesh)?;
    check_len(mesh.element_count(), u.len())?;
    let mut rhs = vec![0.0; 2 * mesh.interior_count()];
    add_profile_rhs(mesh, &mut rhs, f, 0, 1.0);
    add_control_load(mesh, u.values(), &mut rhs);
    add_profile_rhs(mesh, &mut rhs, g, 1, params.moment_coeff());
    Ok(rhs)
}

/// Adds `∫ u v` for a piecewise constant `u` (exact: `u_j h_j / 2` per node).
pub(crate) fn add_control_load(mesh: &Mesh1D, u: &[f64], rhs: &mut [f64]) {
    let last = mesh.node_count() - 1;
    for (j, (&uj, &h)) in u.iter().zip(mesh.sizes()).enumerate() {
        let c = 0.5 * h * uj;
        if j > 0 {
            rhs[w_dof(j)] += c;
        }
        if j + 1 < last {
            rhs[w_dof(j + 1)] += c;
        }
    }
}

/// Elementwise means of the `w`-type component (index 0) or `θ`-type
/// component (index 1) of an interior vector.
pub(crate) fn block_average(mesh: &Mesh1D, y: &[f64], block: usize) -> Vec<f64> {
    let last = mesh.node_count() - 1;
    let val = |node: usize| {
        if node == 0 || node == last {
            0.0
        } else {
            y[2 * (node - 1) + block]
        }
    };
    (0..mesh.element_count())
        .map(|j| 0.5 * (val(j) + val(j + 1)))
        .collect()
}

/// Applies the (rotation-weighted) mass operator used by the adjoint:
/// `∫ w v` on the w-block and, if `theta_weight > 0`, `theta_weight ∫ θ β`.
pub(crate) fn apply_tracking_mass(mesh: &Mesh1D, y: &[f64], theta_weight: f64) -> Vec<f64> {
    let last = mesh.node_count() - 1;
    let mut out = vec![0.0; y.len()];
    let val = |node: usize, block: usize| {
        if node == 0 || node == last {
            0.0
        } else {
            y[2 * (node - 1) + block]
        }
    };
    for (j, &h) in mesh.sizes().iter().enumerate() {
        for (block, weight) in [(0usize, 1.0), (1usize, theta_weight)] {
            if weight == 0.0 {
                continue;
            }
            let (va, vb) = (val(j, block), val(j + 1, block));
            let ma = weight * h / 6.0 * (2.0 * va + vb);
            let mb = weight * h / 6.0 * (va + 2.0 * vb);
            if j > 0 {
                out[2 * (j - 1) + block] += ma;
            }
            if j + 1 < last {
                out[2 * j + block] += mb;
            }
        }
    }
    out
}

/// Splits an interior vector into two P1 fields.
pub fn split_fields(mesh: &Mesh1D, y: &[f64]) -> (P1Field, P1Field) {
    let w: Vec<f64> = y.iter().step_by(2).copied().collect();
    let t: Vec<f64> = y.iter().skip(1).step_by(2).copied().collect();
    (
        P1Field::from_interior(mesh, &w).expect("interior length"),
        P1Field::from_interior(mesh, &t).expect("interior length"),
    )
}

/// Interleaves two P1 fields into an interior vector.
pub fn join_fields(w: &P1Field, theta: &P1Field) -> Vec<f64> {
    w.interior()
        .iter()
        .zip(theta.interior())
        .flat_map(|(a, b)| [*a, *b])
        .collect()
}

/// Shear variable of the mixed formulation: `(κ/t²)(w' - θ̄)` per element.
pub fn recover_shear(mesh: &Mesh1D, params: &BeamParams, w: &P1Field, theta: &P1Field) -> Result<P0Field> {
    check_len(mesh.node_count(), w.len())?;
    check_len(mesh.node_count(), theta.len())?;
    let cs = params.shear_coeff();
    let slopes = w.slopes(mesh);
    let values = slopes
        .iter()
        .zip(theta.values().windows(2))
        .map(|(s, t)| cs * (s - 0.5 * (t[0] + t[1])))
        .collect();
    P0Field::new(mesh, values)
}

/// Assembled and factorized beam operator on one mesh; shared by the state
/// and adjoint solves.
#[derive(Debug, Clone)]
pub struct BeamSystem {
    mesh: Mesh1D,
    params: BeamParams,
    scheme: Scheme,
    stiffness: SymBandMatrix,
    factor: BandCholesky,
}

impl BeamSystem {
    pub fn new(mesh: Mesh1D, params: BeamParams, scheme: Scheme) -> Result<Self> {
        let stiffness = assemble_stiffness(&mesh, &params, scheme);
        let factor = stiffness.cholesky()?;
        Ok(Self {
            mesh,
            params,
            scheme,
            stiffness,
            factor,
        })
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }
    pub fn params(&self) -> &BeamParams {
        &self.params
    }
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
    pub fn stiffness(&self) -> &SymBandMatrix {
        &self.stiffness
    }
    pub fn factor(&self) -> &BandCholesky {
        &self.factor
    }

    /// Solves `K y = rhs`; two refinement steps with a compensated residual
    /// keep the forward error near roundoff despite `κ/t²` stiffness.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.factor.solve_refined(&self.stiffness, rhs, 2)
    }

    /// Normwise backward error `|K y - rhs|_∞ / (|K|_∞ |y|_∞ + |rhs|_∞)`.
    pub fn relative_residual(&self, y: &[f64], rhs: &[f64]) -> f64 {
        let ky = self.stiffness.matvec(y);
        let r = ky.iter().zip(rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let ny = y.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        let scale = self.stiffness.norm_inf() * ny + rhs.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        if scale > 0.0 {
            r / scale
        } else {
            r
        }
    }

    /// Interior right-hand side of the adjoint problem:
    /// `∫ (w_d - w) v + [(t²/12) ∫ (θ_d - θ) β]`.
    pub fn adjoint_rhs(&self, y: &[f64], loads: &LoadData) -> Vec<f64> {
        let theta_w = if loads.track_rotation {
            self.params.moment_coeff()
        } else {
            0.0
        };
        let mut rhs: Vec<f64> = apply_tracking_mass(&self.mesh, y, theta_w)
            .into_iter()
            .map(|v| -v)
            .collect();
        add_profile_rhs(&self.mesh, &mut rhs, &loads.w_d, 0, 1.0);
        if loads.track_rotation {
            add_profile_rhs(&self.mesh, &mut rhs, &loads.theta_d, 1, theta_w);
        }
        rhs
    }

    pub fn state_from_vector(&self, y: &[f64]) -> StateSolution {
        let (w, theta) = split_fields(&self.mesh, y);
        let gamma = recover_shear(&self.mesh, &self.params, &w, &theta).expect("same mesh");
        StateSolution { w, theta, gamma }
    }

    pub fn adjoint_from_vector(&self, z: &[f64]) -> AdjointSolution {
        let (p, q) = split_fields(&self.mesh, z);
        let r = recover_shear(&self.mesh, &self.params, &p, &q).expect("same mesh");
        AdjointSolution { p, q, r }
    }

    pub fn solve_state(&self, loads: &LoadData, u: &P0Field) -> Result<StateSolution> {
        loads.check(&self.mesh)?;
        let rhs = assemble_load(&self.mesh, &self.params, &loads.f, u, &loads.g)?;
        Ok(self.state_from_vector(&self.solve(&rhs)))
    }

    pub fn solve_adjoint(&self, state: &StateSolution, loads: &LoadData) -> Result<AdjointSolution> {
        loads.check(&self.mesh)?;
        check_len(self.mesh.node_count(), state.w.len())?;
        let y = join_fields(&state.w, &state.theta);
        let rhs = self.adjoint_rhs(&y, loads);
        Ok(self.adjoint_from_vector(&self.solve(&rhs)))
    }
}

/// Assembles, factorizes and solves the state problem for load `f + u`.
pub fn solve_state(
    mesh: &Mesh1D,
    params: &BeamParams,
    loads: &LoadData,
    u: &P0Field,
    scheme: Scheme,
) -> Result<StateSolution> {
    BeamSystem::new(mesh.clone(), *params, scheme)?.solve_state(loads, u)
}

/// Solves the adjoint problem driven by the tracking residual of `state`.
///
/// Sign convention: `a((p, q), (v, β)) = ∫ (w_d - w) v [+ (t²/12) ∫ (θ_d - θ) β]`,
/// so that `ν u - p̄` is the gradient of the smooth part of the cost.
pub fn solve_adjoint(
    mesh: &Mesh1D,
    params: &BeamParams,
    state: &StateSolution,
    loads: &LoadData,
    scheme: Scheme,
) -> Result<AdjointSolution> {
    BeamSystem::new(mesh.clone(), *params, scheme)?.solve_adjoint(state, loads)
}

/// Norms of the difference of two `(w, θ)` pairs, combined over both
/// components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
}

/// Closed-form `(w, θ)` with derivatives.
pub struct ExactPair<'a> {
    pub w: &'a dyn Fn(f64) -> f64,
    pub dw: &'a dyn Fn(f64) -> f64,
    pub theta: &'a dyn Fn(f64) -> f64,
    pub dtheta: &'a dyn Fn(f64) -> f64,
}

/// What a discrete pair is compared against.
pub enum Reference<'a> {
    Discrete {
        mesh: &'a Mesh1D,
        w: &'a P1Field,
        theta: &'a P1Field,
    },
    Exact(ExactPair<'a>),
}

/// L², H¹ and L^∞ norms of `(w, θ) - reference`.
pub fn error_norms(mesh: &Mesh1D, w: &P1Field, theta: &P1Field, reference: &Reference<'_>) -> Result<ErrorNorms> {
    check_len(mesh.node_count(), w.len())?;
    check_len(mesh.node_count(), theta.len())?;
    match reference {
        Reference::Discrete {
            mesh: other,
            w: rw,
            theta: rt,
        } => {
            if *other != mesh {
                return Err(invalid(
                    "discrete fields on different meshes need closed-form references",
                ));
            }
            let dw = P1Field::from_nodal(mesh, sub(w.values(), rw.values()))?;
            let dt = P1Field::from_nodal(mesh, sub(theta.values(), rt.values()))?;
            let l2sq = p1_l2_norm(mesh, &dw).powi(2) + p1_l2_norm(mesh, &dt).powi(2);
            let semi = p1_h1_seminorm(mesh, &dw).powi(2) + p1_h1_seminorm(mesh, &dt).powi(2);
            Ok(ErrorNorms {
                l2: l2sq.sqrt(),
                h1: (l2sq + semi).sqrt(),
                linf: dw.max_abs().max(dt.max_abs()),
            })
        }
        Reference::Exact(ex) => {
            let rule = QuadratureRule::gauss4();
            let sw = w.slopes(mesh);
            let st = theta.slopes(mesh);
            let (mut l2sq, mut semi, mut linf) = (0.0f64, 0.0f64, 0.0f64);
            for j in 0..mesh.element_count() {
                let (a, b) = mesh.element(j);
                let h = b - a;
                for (xi, wq) in rule.iter() {
                    let x = a + xi * h;
                    let wh = (1.0 - xi) * w.values()[j] + xi * w.values()[j + 1];
                    let th = (1.0 - xi) * theta.values()[j] + xi * theta.values()[j + 1];
                    let ew = wh - (ex.w)(x);
                    let et = th - (ex.theta)(x);
                    let edw = sw[j] - (ex.dw)(x);
                    let edt = st[j] - (ex.dtheta)(x);
                    l2sq += h * wq * (ew * ew + et * et);
                    semi += h * wq * (edw * edw + edt * edt);
                    linf = linf.max(ew.abs()).max(et.abs());
                }
            }
            for (i, &x) in mesh.nodes().iter().enumerate() {
                linf = linf
                    .max((w.values()[i] - (ex.w)(x)).abs())
                    .max((theta.values()[i] - (ex.theta)(x)).abs());
            }
            Ok(ErrorNorms {
                l2: l2sq.sqrt(),
                h1: (l2sq + semi).sqrt(),
                linf,
            })
        }
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params(t: f64) -> BeamParams {
        // E = 12 so the bending coefficient is one; κ = 1.
        BeamParams::with_kappa(12.0, t, 5.0 / 6.0, 0.3, 1.0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(BeamParams::reference(0.01).is_ok());
        assert!(BeamParams::reference(0.0).is_err());
        assert!(BeamParams::reference(1.5).is_err());
        assert!(BeamParams::new(-1.0, 0.1, 0.8, 0.3).is_err());
        assert!(BeamParams::new(1.0, 0.1, 1.0, 0.3).is_err());
        assert!(BeamParams::new(1.0, 0.1, 0.8, 0.5).is_err());
        let p = BeamParams::reference(0.01).unwrap();
        let g = DEFAULT_YOUNG_MODULUS / (2.0 * 1.35);
        assert!((p.kappa() - 5.0 / 6.0 * g).abs() / p.kappa() < 1e-15);
    }

    #[test]
    fn bending_block_is_scaled_laplacian() {
        let mesh = Mesh1D::uniform(2, 1.0).unwrap();
        let p = BeamParams::reference(0.1).unwrap();
        let k = assemble_stiffness(&mesh, &p, Scheme::LockingFree);
        // single interior node: θ-θ entry = (E/12)(2/h) + shear part
        let shear_tt = p.shear_coeff() * 2.0 * 0.5 * 0.25;
        let bend = k.get(1, 1) - shear_tt;
        assert!((bend - p.bending_coeff() * 4.0).abs() / bend < 1e-12);
    }

    #[test]
    fn schemes_differ_only_in_theta_theta() {
        let p = unit_params(0.3);
        let h = 0.25;
        let std = element_stiffness(h, &p, Scheme::Standard);
        let red = element_stiffness(h, &p, Scheme::LockingFree);
        let cs = p.shear_coeff();
        for a in 0..4 {
            for b in 0..4 {
                let d = std[a][b] - red[a][b];
                let theta_theta = a % 2 == 1 && b % 2 == 1;
                if theta_theta {
                    // exact mass h/6 [[2,1],[1,2]] minus midpoint h/4 [[1,1],[1,1]]
                    let expect = if a == b { cs * h / 12.0 } else { -cs * h / 12.0 };
                    assert!((d - expect).abs() < 1e-12, "({a},{b}) {d} vs {expect}");
                } else {
                    assert!(d.abs() < 1e-12, "({a},{b}) differs by {d}");
                }
            }
        }
    }

    #[test]
    fn stiffness_is_spd_for_all_thicknesses() {
        let mesh = Mesh1D::uniform(32, 1.0).unwrap();
        for t in [1.0, 1e-1, 1e-2, 1e-3] {
            for scheme in [Scheme::Standard, Scheme::LockingFree] {
                let p = BeamParams::reference(t).unwrap();
                let k = assemble_stiffness(&mesh, &p, scheme);
                let d = k.to_dense();
                for i in 0..d.len() {
                    for j in 0..d.len() {
                        assert_eq!(d[i][j], d[j][i]);
                    }
                }
                assert!(k.cholesky().is_ok(), "t={t} {scheme:?}");
            }
        }
    }

    #[test]
    fn load_examples() {
        let mesh = Mesh1D::uniform(4, 1.0).unwrap();
        let p = BeamParams::with_kappa(12.0, 1.0, 0.8, 0.3, 1.0).unwrap();
        let zero = assemble_load(&mesh, &p, &Profile::Zero, &P0Field::zeros(&mesh), &Profile::Zero).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let unit = assemble_load(&mesh, &p, &Profile::Zero, &P0Field::constant(&mesh, 1.0), &Profile::Zero).unwrap();
        let f1 = assemble_load(&mesh, &p, &Profile::Constant(1.0), &P0Field::zeros(&mesh), &Profile::Zero).unwrap();
        for i in 0..3 {
            assert!((unit[2 * i] - 0.25).abs() < 1e-15);
            assert!((f1[2 * i] - 0.25).abs() < 1e-15);
            assert_eq!(unit[2 * i + 1], 0.0);
        }
        let g = assemble_load(&mesh, &p, &Profile::Zero, &P0Field::zeros(&mesh), &Profile::Constant(1.0)).unwrap();
        for i in 0..3 {
            assert!((g[2 * i + 1] - 0.25 / 12.0).abs() < 1e-15);
            assert_eq!(g[2 * i], 0.0);
        }
    }

    #[test]
    fn zero_data_gives_zero_state() {
        let mesh = Mesh1D::uniform(8, 1.0).unwrap();
        let p = BeamParams::reference(0.01).unwrap();
        let s = solve_state(&mesh, &p, &LoadData::default(), &P0Field::zeros(&mesh), Scheme::LockingFree).unwrap();
        assert_eq!(s.w.max_abs(), 0.0);
        assert_eq!(s.theta.max_abs(), 0.0);
        assert!(s.gamma.values().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn recover_shear_examples() {
        let mesh = Mesh1D::uniform(4, 1.0).unwrap();
        let p = unit_params(1.0);
        let z = P1Field::zeros(&mesh);
        assert!(recover_shear(&mesh, &p, &z, &z).unwrap().values().iter().all(|&g| g == 0.0));
        // slope-one ramp; the Dirichlet zero at x = L only matters on the last element
        let ramp = P1Field::from_nodal(&mesh, vec![0.0, 0.25, 0.5, 0.75, 0.0]).unwrap();
        let g = recover_shear(&mesh, &p, &ramp, &z).unwrap();
        assert_eq!(&g.values()[..3], &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn residual_of_solved_state_is_small() {
        let mesh = Mesh1D::uniform(64, 1.0).unwrap();
        let p = BeamParams::reference(1e-3).unwrap();
        let sys = BeamSystem::new(mesh.clone(), p, Scheme::LockingFree).unwrap();
        let loads = LoadData {
            f: Profile::sine(100.0, 8.0),
            g: Profile::Constant(3.0),
            ..Default::default()
        };
        let u = P0Field::constant(&mesh, 2.0);
        let rhs = assemble_load(&mesh, &p, &loads.f, &u, &loads.g).unwrap();
        let y = sys.solve(&rhs);
        assert!(sys.relative_residual(&y, &rhs) < 1e-10);
    }

    #[test]
    fn adjoint_of_matching_target_vanishes() {
        let mesh = Mesh1D::uniform(10, 1.0).unwrap();
        let p = BeamParams::reference(0.1).unwrap();
        let sys = BeamSystem::new(mesh.clone(), p, Scheme::LockingFree).unwrap();
        let loads = LoadData {
            f: Profile::sine(1.0, 1.0),
            ..Default::default()
        };
        let s = sys.solve_state(&loads, &P0Field::zeros(&mesh)).unwrap();
        let tracked = LoadData {
            w_d: Profile::Nodal(s.w.values().to_vec()),
            theta_d: Profile::Nodal(s.theta.values().to_vec()),
            track_rotation: true,
            ..loads
        };
        let a = sys.solve_adjoint(&s, &tracked).unwrap();
        assert!(a.p.max_abs() < 1e-30 && a.q.max_abs() < 1e-30);
    }

    #[test]
    fn adjoint_with_hat_target_matches_hat_load() {
        let mesh = Mesh1D::uniform(6, 1.0).unwrap();
        let p = BeamParams::reference(0.05).unwrap();
        let sys = BeamSystem::new(mesh.clone(), p, Scheme::LockingFree).unwrap();
        let mut hat = vec![0.0; 7];
        hat[3] = 1.0;
        // state with zero load, adjoint target = hat
        let zero_state = sys.solve_state(&LoadData::default(), &P0Field::zeros(&mesh)).unwrap();
        let adj = sys
            .solve_adjoint(
                &zero_state,
                &LoadData {
                    w_d: Profile::Nodal(hat.clone()),
                    ..Default::default()
                },
            )
            .unwrap();
        let direct = sys
            .solve_state(
                &LoadData {
                    f: Profile::Nodal(hat),
                    ..Default::default()
                },
                &P0Field::zeros(&mesh),
            )
            .unwrap();
        for (a, b) in adj.p.values().iter().zip(direct.w.values()) {
            assert!((a - b).abs() <= 1e-14 * direct.w.max_abs());
        }
    }

    #[test]
    fn error_norm_examples() {
        let mesh = Mesh1D::uniform(2, 1.0).unwrap();
        let z = P1Field::zeros(&mesh);
        let hat = P1Field::from_nodal(&mesh, vec![0.0, 1.0, 0.0]).unwrap();
        let same = error_norms(&mesh, &hat, &z, &Reference::Discrete { mesh: &mesh, w: &hat, theta: &z }).unwrap();
        assert_eq!(same, ErrorNorms::default());
        let e = error_norms(&mesh, &hat, &z, &Reference::Discrete { mesh: &mesh, w: &z, theta: &z }).unwrap();
        assert_eq!(e.linf, 1.0);
        let other = Mesh1D::uniform(3, 1.0).unwrap();
        let z3 = P1Field::zeros(&other);
        assert!(error_norms(&mesh, &hat, &z, &Reference::Discrete { mesh: &other, w: &z3, theta: &z3 }).is_err());
        let zero_fn = |_: f64| 0.0;
        let ex = ExactPair { w: &zero_fn, dw: &zero_fn, theta: &zero_fn, dtheta: &zero_fn };
        let e2 = error_norms(&mesh, &hat, &z, &Reference::Exact(ex)).unwrap();
        assert!((e2.l2 - e.l2).abs() < 1e-15);
        assert!((e2.h1 - e.h1).abs() < 1e-14);
        assert_eq!(e2.linf, 1.0);
    }
}
