//! Scalar data on the beam: loads, targets and control bounds.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_len, Result};
use crate::mesh::{pi_h, Mesh1D, P0Field};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar function on `[0, L]`, either closed-form or already discrete.
#[derive(Clone)]
pub enum Profile {
    Zero,
    Constant(f64),
    Function(ScalarFn),
    /// One value per element of the mesh it is used with.
    Elementwise(Vec<f64>),
    /// Nodal values (all `n + 1` of them) of a piecewise-linear function.
    Nodal(Vec<f64>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Function(_) => write!(f, "Function(..)"),
            Self::Elementwise(v) => write!(f, "Elementwise({} values)", v.len()),
            Self::Nodal(v) => write!(f, "Nodal({} values)", v.len()),
        }
    }
}

impl Default for Profile {
    fn default() -> Self {
        Self::Zero
    }
}

impl From<f64> for Profile {
    fn from(c: f64) -> Self {
        if c == 0.0 {
            Self::Zero
        } else {
            Self::Constant(c)
        }
    }
}

impl Profile {
    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Function(Arc::new(f))
    }

    /// `amplitude * sin(frequency * pi * x)`.
    pub fn sine(amplitude: f64, frequency: f64) -> Self {
        Self::function(move |x| amplitude * (frequency * std::f64::consts::PI * x).sin())
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Constant(c) => *c == 0.0,
            Self::Elementwise(v) | Self::Nodal(v) => v.iter().all(|&x| x == 0.0),
            Self::Function(_) => false,
        }
    }

    /// Checks that discrete data matches the mesh.
    pub fn check(&self, mesh: &Mesh1D) -> Result<()> {
        match self {
            Self::Elementwise(v) => check_len(mesh.element_count(), v.len()),
            Self::Nodal(v) => check_len(mesh.node_count(), v.len()),
            _ => Ok(()),
        }
    }

    /// Value at `x`, known to lie in element `elem`. Avoids ambiguity of
    /// discontinuous data at nodes.
    pub fn eval_in(&self, mesh: &Mesh1D, elem: usize, x: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant(c) => *c,
            Self::Function(f) => f(x),
            Self::Elementwise(v) => v[elem],
            Self::Nodal(v) => {
                let (a, b) = mesh.element(elem);
                let s = (x - a) / (b - a);
                (1.0 - s) * v[elem] + s * v[elem + 1]
            }
        }
    }

    /// Elementwise means (the quasi-interpolant onto piecewise constants).
    pub fn project_p0(&self, mesh: &Mesh1D) -> Result<P0Field> {
        self.check(mesh)?;
        match self {
            Self::Zero => Ok(P0Field::zeros(mesh)),
            Self::Constant(c) => Ok(P0Field::constant(mesh, *c)),
            Self::Function(f) => pi_h(|x| f(x), mesh),
            Self::Elementwise(v) => P0Field::new(mesh, v.clone()),
            Self::Nodal(v) => P0Field::new(mesh, v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()),
        }
    }
}

impl From<P0Field> for Profile {
    fn from(p: P0Field) -> Self {
        Self::Elementwise(p.into_vec())
    }
}
