//! Cost functional, admissible set and the pointwise optimality machinery
//! (soft thresholding, multipliers, complementarity function, active set).

use crate::data::Profile;
use crate::error::{check_len, invalid, Result};
use crate::mesh::{p0_average, Mesh1D, P0Field, P1Field};
use crate::quadrature::QuadratureRule;

/// Variant of the last term of the complementarity function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CLastTerm {
    /// `min(0, ν(u - a) + μ - η)`. Misclassifies part of the dead zone.
    Literal,
    /// `min(0, ν(u - a) + μ + η)`, mirroring the upper-bound term.
    #[default]
    Symmetric,
}

/// Discrete control parameters: weights and elementwise bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlParams {
    nu: f64,
    eta: f64,
    lower: P0Field,
    upper: P0Field,
    /// Weight the L¹ term by `η/2` instead of `η`.
    pub l1_half_factor: bool,
    pub c_last_term: CLastTerm,
}

impl ControlParams {
    /// Projects the bounds with the elementwise mean and validates
    /// `ν > 0`, `η >= 0` and `a <= 0 <= b`.
    pub fn new(mesh: &Mesh1D, nu: f64, eta: f64, lower: &Profile, upper: &Profile) -> Result<Self> {
        let lo = match lower {
            Profile::Constant(c) if c.is_infinite() => P0Field::constant(mesh, *c),
            other => other.project_p0(mesh)?,
        };
        let hi = match upper {
            Profile::Constant(c) if c.is_infinite() => P0Field::constant(mesh, *c),
            other => other.project_p0(mesh)?,
        };
        Self::from_bounds(nu, eta, lo, hi)
    }

    pub fn from_bounds(nu: f64, eta: f64, lower: P0Field, upper: P0Field) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(invalid(format!("nu must be positive, got {nu}")));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(invalid(format!("eta must be nonnegative, got {eta}")));
        }
        check_len(lower.len(), upper.len())?;
        for (j, (a, b)) in lower.values().iter().zip(upper.values()).enumerate() {
            if a.is_nan() || b.is_nan() || *a > 0.0 || *b < 0.0 {
                return Err(invalid(format!(
                    "bounds must satisfy a <= 0 <= b; element {j} has [{a}, {b}]"
                )));
            }
        }
        Ok(Self {
            nu,
            eta,
            lower,
            upper,
            l1_half_factor: false,
            c_last_term: CLastTerm::Symmetric,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// The L¹ weight as configured (before the optional halving).
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// The weight actually multiplying `||u||_{L¹}` in the cost and used as
    /// the soft-threshold level.
    pub fn l1_weight(&self) -> f64 {
        if self.l1_half_factor {
            0.5 * self.eta
        } else {
            self.eta
        }
    }

    pub fn lower(&self) -> &P0Field {
        &self.lower
    }

    pub fn upper(&self) -> &P0Field {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Copy with a different `η`.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        let mut out = Self::from_bounds(self.nu, eta, self.lower.clone(), self.upper.clone())?;
        out.l1_half_factor = self.l1_half_factor;
        out.c_last_term = self.c_last_term;
        Ok(out)
    }

    pub fn is_admissible(&self, u: &P0Field, slack: f64) -> bool {
        u.len() == self.len()
            && u
                .values()
                .iter()
                .zip(self.lower.values().iter().zip(self.upper.values()))
                .all(|(v, (a, b))| *v >= a - slack * a.abs().max(1.0) && *v <= b + slack * b.abs().max(1.0))
    }
}

/// `sign(s) max(|s| - η, 0)`; ties `|s| = η` map to zero.
#[inline]
pub fn shrink(s: f64, eta: f64) -> f64 {
    if s > eta {
        s - eta
    } else if s < -eta {
        s + eta
    } else {
        0.0
    }
}

/// Pointwise branch of the optimality conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// `u = a`.
    Lower,
    /// `a < u <= 0`, `u = (z + η)/ν`.
    NegativeFree,
    /// `u = 0`, `|z| < η`.
    Zero,
    /// `0 <= u < b`, `u = (z - η)/ν`.
    PositiveFree,
    /// `u = b`.
    Upper,
}

impl Branch {
    /// Free branches form the active set in the Newton system.
    pub fn is_free(self) -> bool {
        matches!(self, Branch::NegativeFree | Branch::PositiveFree)
    }
}

/// Classifies `z = ν u + μ` (equal to `p̄` at a solution).
#[inline]
pub fn classify(z: f64, nu: f64, eta: f64, a: f64, b: f64) -> Branch {
    if z - eta >= nu * b {
        Branch::Upper
    } else if z - eta >= 0.0 {
        Branch::PositiveFree
    } else if z + eta <= nu * a {
        Branch::Lower
    } else if z + eta <= 0.0 {
        Branch::NegativeFree
    } else {
        Branch::Zero
    }
}

/// Branch of every element for the given `z`.
pub fn branches(z: &[f64], params: &ControlParams) -> Vec<Branch> {
    let (nu, eta) = (params.nu, params.l1_weight());
    z.iter()
        .zip(params.lower.values().iter().zip(params.upper.values()))
        .map(|(&z, (&a, &b))| classify(z, nu, eta, a, b))
        .collect()
}

/// `u_j = clip(shrink(p̄_j, η)/ν, a_j, b_j)`.
pub fn pointwise_optimal_control(p_bar: &P0Field, params: &ControlParams) -> Result<P0Field> {
    check_len(params.len(), p_bar.len())?;
    let (nu, eta) = (params.nu, params.l1_weight());
    let values = p_bar
        .values()
        .iter()
        .zip(params.lower.values().iter().zip(params.upper.values()))
        .map(|(&p, (&a, &b))| {
            if a > b {
                return Err(invalid("lower bound exceeds upper bound"));
            }
            Ok((shrink(p, eta) / nu).clamp(a, b))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(P0Field::from_vec_unchecked(values))
}

/// Scalar complementarity function.
#[inline]
pub fn complementarity_scalar(u: f64, mu: f64, nu: f64, eta: f64, a: f64, b: f64, last: CLastTerm) -> f64 {
    let z = nu * u + mu;
    let last_shift = match last {
        CLastTerm::Literal => -eta,
        CLastTerm::Symmetric => eta,
    };
    // infinite bounds make the clamp terms vanish
    let upper_term = if b.is_finite() { (nu * (u - b) + mu - eta).max(0.0) } else { 0.0 };
    let lower_term = if a.is_finite() { (nu * (u - a) + mu + last_shift).min(0.0) } else { 0.0 };
    nu * u - (z - eta).max(0.0) - (z + eta).min(0.0) + upper_term + lower_term
}

/// Elementwise complementarity function `C(u, μ)`; zero exactly where the
/// pointwise optimality conditions hold.
pub fn complementarity(u: &P0Field, mu: &P0Field, params: &ControlParams) -> Result<P0Field> {
    check_len(params.len(), u.len())?;
    check_len(params.len(), mu.len())?;
    let (nu, eta) = (params.nu, params.l1_weight());
    let values = u
        .values()
        .iter()
        .zip(mu.values())
        .zip(params.lower.values().iter().zip(params.upper.values()))
        .map(|((&u, &m), (&a, &b))| complementarity_scalar(u, m, nu, eta, a, b, params.c_last_term))
        .collect();
    Ok(P0Field::from_vec_unchecked(values))
}

/// Active set with its characteristic vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    pub indices: Vec<usize>,
    pub indicator: Vec<bool>,
}

impl ActiveSet {
    pub fn from_indicator(indicator: Vec<bool>) -> Self {
        let indices = indicator
            .iter()
            .enumerate()
            .filter_map(|(j, &a)| a.then_some(j))
            .collect();
        Self { indices, indicator }
    }

    pub fn from_branches(branches: &[Branch]) -> Self {
        Self::from_indicator(branches.iter().map(|b| b.is_free()).collect())
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indicator.get(j).copied().unwrap_or(false)
    }
}

/// `A = {νa < p̄ + η <= 0} ∪ {0 <= p̄ - η < νb}` with `p̄` the elementwise
/// mean of the adjoint deflection.
pub fn active_set(p: &P1Field, params: &ControlParams) -> Result<ActiveSet> {
    let p_bar = p0_average(p);
    active_set_from_mean(&p_bar, params)
}

pub fn active_set_from_mean(p_bar: &P0Field, params: &ControlParams) -> Result<ActiveSet> {
    check_len(params.len(), p_bar.len())?;
    let (nu, eta) = (params.nu, params.l1_weight());
    let indicator = p_bar
        .values()
        .iter()
        .zip(params.lower.values().iter().zip(params.upper.values()))
        .map(|(&p, (&a, &b))| (nu * a < p + eta && p + eta <= 0.0) || (0.0 <= p - eta && p - eta < nu * b))
        .collect();
    Ok(ActiveSet::from_indicator(indicator))
}

/// `||u - clip(shrink(p̄)/ν)||_{L²}`; zero iff the discrete first-order
/// conditions hold.
pub fn variational_inequality_residual(
    mesh: &Mesh1D,
    u: &P0Field,
    p: &P1Field,
    params: &ControlParams,
) -> Result<f64> {
    check_len(mesh.element_count(), u.len())?;
    if !params.is_admissible(u, 1e-12) {
        return Err(invalid("control violates its bounds"));
    }
    let target = pointwise_optimal_control(&p0_average(p), params)?;
    Ok(u
        .values()
        .iter()
        .zip(target.values())
        .zip(mesh.sizes())
        .map(|((a, b), h)| h * (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// The cost split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    /// `½ ||w - w_d||²`.
    pub tracking: f64,
    /// `(t²/24) ||θ - θ_d||²`; zero unless rotation tracking is enabled.
    pub rotation_tracking: f64,
    /// `(ν/2) ||u||²`.
    pub l2_term: f64,
    /// `η ||u||_{L¹}` (or `η/2` with the half factor).
    pub l1_term: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(tracking: f64, rotation_tracking: f64, l2_term: f64, l1_term: f64) -> Self {
        Self {
            tracking,
            rotation_tracking,
            l2_term,
            l1_term,
            total: tracking + rotation_tracking + l2_term + l1_term,
        }
    }
}

/// `½ ∫ (v - target)²`, integrated with the two-point Gauss rule (exact
/// when the target is piecewise linear).
pub fn tracking_term(mesh: &Mesh1D, v: &P1Field, target: &Profile) -> Result<f64> {
    check_len(mesh.node_count(), v.len())?;
    target.check(mesh)?;
    let rule = QuadratureRule::gauss2();
    let mut acc = 0.0;
    for j in 0..mesh.element_count() {
        let (a, b) = mesh.element(j);
        let h = b - a;
        for (xi, wq) in rule.iter() {
            let x = a + xi * h;
            let vh = (1.0 - xi) * v.values()[j] + xi * v.values()[j + 1];
            let d = vh - target.eval_in(mesh, j, x);
            acc += h * wq * d * d;
        }
    }
    Ok(0.5 * acc)
}

/// `½||w - w_d||² + (ν/2)||u||² + η||u||_{L¹}`.
pub fn cost(mesh: &Mesh1D, u: &P0Field, w: &P1Field, w_d: &Profile, params: &ControlParams) -> Result<CostBreakdown> {
    check_len(mesh.element_count(), u.len())?;
    let tracking = tracking_term(mesh, w, w_d)?;
    let l2 = 0.5 * params.nu * u.l2_norm(mesh).powi(2);
    let l1 = params.l1_weight() * u.l1_norm(mesh);
    Ok(CostBreakdown::new(tracking, 0.0, l2, l1))
}

/// Multipliers reconstructed from `(u, μ)` with `μ = λ + λ_b - λ_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierState {
    pub mu: P0Field,
    pub lambda: P0Field,
    pub lambda_a: P0Field,
    pub lambda_b: P0Field,
}

impl MultiplierState {
    /// Splits `μ` according to the branch of each element.
    pub fn split(u: &P0Field, mu: &P0Field, params: &ControlParams) -> Result<Self> {
        check_len(params.len(), u.len())?;
        check_len(params.len(), mu.len())?;
        let (nu, eta) = (params.nu, params.l1_weight());
        let n = params.len();
        let (mut lambda, mut la, mut lb) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for j in 0..n {
            let (uj, mj) = (u.values()[j], mu.values()[j]);
            let (a, b) = (params.lower.values()[j], params.upper.values()[j]);
            match classify(nu * uj + mj, nu, eta, a, b) {
                Branch::Upper => {
                    lambda[j] = eta;
                    lb[j] = mj - eta;
                }
                Branch::Lower => {
                    lambda[j] = -eta;
                    la[j] = -mj - eta;
                }
                _ => lambda[j] = mj,
            }
        }
        Ok(Self {
            mu: mu.clone(),
            lambda: P0Field::from_vec_unchecked(lambda),
            lambda_a: P0Field::from_vec_unchecked(la),
            lambda_b: P0Field::from_vec_unchecked(lb),
        })
    }
}

/// Largest violations of the pointwise optimality conditions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktReport {
    /// `max(|λ| - η)` over `{u = 0}`.
    pub subgradient_bound: f64,
    /// `max |λ - η sign(u)|` over `{u != 0}`.
    pub sign_condition: f64,
    /// `max(-λ_a, -λ_b)`.
    pub multiplier_sign: f64,
    /// `max(|λ_a (u - a)|, |λ_b (b - u)|)`.
    pub slackness: f64,
    /// `max |μ - (λ + λ_b - λ_a)|`.
    pub decomposition: f64,
}

impl KktReport {
    pub fn max_violation(&self) -> f64 {
        [
            self.subgradient_bound,
            self.sign_condition,
            self.multiplier_sign,
            self.slackness,
            self.decomposition,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Checks the multiplier conditions of the optimality system.
pub fn check_kkt(u: &P0Field, m: &MultiplierState, params: &ControlParams) -> Result<KktReport> {
    check_len(params.len(), u.len())?;
    let eta = params.l1_weight();
    let mut r = KktReport::default();
    for j in 0..params.len() {
        let uj = u.values()[j];
        let (a, b) = (params.lower.values()[j], params.upper.values()[j]);
        let (l, la, lb, mu) = (
            m.lambda.values()[j],
            m.lambda_a.values()[j],
            m.lambda_b.values()[j],
            m.mu.values()[j],
        );
        if uj == 0.0 {
            r.subgradient_bound = r.subgradient_bound.max(l.abs() - eta);
        } else {
            r.sign_condition = r.sign_condition.max((l - eta * uj.signum()).abs());
        }
        r.multiplier_sign = r.multiplier_sign.max(-la).max(-lb);
        let sa = if a.is_finite() { (la * (uj - a)).abs() } else { la.abs() };
        let sb = if b.is_finite() { (lb * (b - uj)).abs() } else { lb.abs() };
        r.slackness = r.slackness.max(sa).max(sb);
        r.decomposition = r.decomposition.max((mu - (l + lb - la)).abs());
    }
    Ok(r)
}
