//! One-dimensional meshes and the discrete spaces built on them.
//!
//! `P1Field` holds nodal values of a continuous piecewise-linear function
//! with homogeneous Dirichlet conditions (the two boundary zeros are stored),
//! `P0Field` holds one value per element.

use crate::error::{check_len, invalid, Error, Result};
use crate::quadrature::QuadratureRule;

/// Partition `0 = s_0 < s_1 < ... < s_n = L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    nodes: Vec<f64>,
    sizes: Vec<f64>,
    h_max: f64,
}

impl Mesh1D {
    /// Builds a mesh from explicit node coordinates.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(invalid("a mesh needs at least two elements"));
        }
        if nodes[0] != 0.0 {
            return Err(invalid("the first node must be at x = 0"));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(invalid("node coordinates must be finite"));
        }
        let sizes: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        if sizes.iter().any(|&h| h <= 0.0) {
            return Err(invalid("nodes must be strictly increasing"));
        }
        let h_max = sizes.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            nodes,
            sizes,
            h_max,
        })
    }

    /// `n` equal elements on `[0, length]`.
    pub fn uniform(n: usize, length: f64) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("element count must be >= 2, got {n}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(invalid(format!("length must be positive, got {length}")));
        }
        let h = length / n as f64;
        let mut nodes: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        nodes[n] = length;
        Self::from_nodes(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn element_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn interior_count(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn length(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Element sizes `h_j`.
    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    /// Mesh size `h = max h_j`.
    pub fn h(&self) -> f64 {
        self.h_max
    }

    /// Endpoints of element `j` (0-based).
    pub fn element(&self, j: usize) -> (f64, f64) {
        (self.nodes[j], self.nodes[j + 1])
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Index of the element containing `x`; nodes shared by two elements
    /// resolve to the left one.
    pub fn locate(&self, x: f64) -> Result<usize> {
        let length = self.length();
        if !(0.0..=length).contains(&x) {
            return Err(Error::OutOfDomain { x, length });
        }
        let idx = self.nodes.partition_point(|&s| s < x);
        Ok(idx.saturating_sub(1).min(self.element_count() - 1))
    }
}

/// Continuous piecewise-linear field with zero boundary values.
#[derive(Debug, Clone, PartialEq)]
pub struct P1Field {
    values: Vec<f64>,
}

impl P1Field {
    pub fn zeros(mesh: &Mesh1D) -> Self {
        Self {
            values: vec![0.0; mesh.node_count()],
        }
    }

    /// From all `n + 1` nodal values; the boundary entries must be zero.
    pub fn from_nodal(mesh: &Mesh1D, values: Vec<f64>) -> Result<Self> {
        check_len(mesh.node_count(), values.len())?;
        if values[0] != 0.0 || values[values.len() - 1] != 0.0 {
            return Err(invalid("P1 field must vanish at both ends"));
        }
        Ok(Self { values })
    }

    /// From the `n - 1` interior values.
    pub fn from_interior(mesh: &Mesh1D, interior: &[f64]) -> Result<Self> {
        check_len(mesh.interior_count(), interior.len())?;
        let mut values = Vec::with_capacity(mesh.node_count());
        values.push(0.0);
        values.extend_from_slice(interior);
        values.push(0.0);
        Ok(Self { values })
    }

    /// Nodal interpolant of `f` (boundary values forced to zero).
    pub fn interpolate(mesh: &Mesh1D, f: impl Fn(f64) -> f64) -> Self {
        let n = mesh.node_count();
        let values = mesh
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &x)| if i == 0 || i == n - 1 { 0.0 } else { f(x) })
            .collect();
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interior(&self) -> &[f64] {
        &self.values[1..self.values.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Elementwise slopes `(v_j - v_{j-1}) / h_j`.
    pub fn slopes(&self, mesh: &Mesh1D) -> Vec<f64> {
        self.values
            .windows(2)
            .zip(mesh.sizes())
            .map(|(v, h)| (v[1] - v[0]) / h)
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Piecewise-constant field, one value per element.
#[derive(Debug, Clone, PartialEq)]
pub struct P0Field {
    values: Vec<f64>,
}

impl P0Field {
    pub fn zeros(mesh: &Mesh1D) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn constant(mesh: &Mesh1D, c: f64) -> Self {
        Self {
            values: vec![c; mesh.element_count()],
        }
    }

    pub fn new(mesh: &Mesh1D, values: Vec<f64>) -> Result<Self> {
        check_len(mesh.element_count(), values.len())?;
        Ok(Self { values })
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of elements carrying exactly zero.
    pub fn zero_count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 0.0).count()
    }

    /// `||u||_{L^2}`.
    pub fn l2_norm(&self, mesh: &Mesh1D) -> f64 {
        self.values
            .iter()
            .zip(mesh.sizes())
            .map(|(u, h)| h * u * u)
            .sum::<f64>()
            .sqrt()
    }

    /// `||u||_{L^1}`.
    pub fn l1_norm(&self, mesh: &Mesh1D) -> f64 {
        self.values
            .iter()
            .zip(mesh.sizes())
            .map(|(u, h)| h * u.abs())
            .sum()
    }

    /// Maximal runs of consecutive elements with nonzero values, as
    /// half-open index ranges.
    pub fn support_runs(&self) -> Vec<std::ops::Range<usize>> {
        let mut runs = Vec::new();
        let mut start = None;
        for (j, &v) in self.values.iter().enumerate() {
            match (v != 0.0, start) {
                (true, None) => start = Some(j),
                (false, Some(s)) => {
                    runs.push(s..j);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push(s..self.values.len());
        }
        runs
    }

    /// Measure of `{u != 0}`.
    pub fn support_measure(&self, mesh: &Mesh1D) -> f64 {
        self.values
            .iter()
            .zip(mesh.sizes())
            .filter(|(v, _)| **v != 0.0)
            .map(|(_, h)| h)
            .sum()
    }
}

/// Quasi-interpolation onto piecewise constants: each element receives the
/// mean of `u` over it.
pub fn pi_h(u: impl Fn(f64) -> f64, mesh: &Mesh1D) -> Result<P0Field> {
    let rule = QuadratureRule::gauss4();
    let values = (0..mesh.element_count())
        .map(|j| {
            let (a, b) = mesh.element(j);
            let mean = rule.integrate(a, b, &u) / (b - a);
            if mean.is_finite() {
                Ok(mean)
            } else {
                Err(Error::EvaluationFailure(format!(
                    "non-finite element mean on [{a}, {b}]"
                )))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(P0Field { values })
}

/// Exact elementwise mean of a P1 field.
pub fn p0_average(v: &P1Field) -> P0Field {
    P0Field {
        values: v.values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
    }
}

/// Evaluates a P1 field at `x` by linear interpolation.
pub fn eval_p1(mesh: &Mesh1D, v: &P1Field, x: f64) -> Result<f64> {
    check_len(mesh.node_count(), v.len())?;
    let j = mesh.locate(x)?;
    let (a, b) = mesh.element(j);
    let s = (x - a) / (b - a);
    Ok((1.0 - s) * v.values[j] + s * v.values[j + 1])
}

/// `||v||_{L^2}` of a P1 field (exact).
pub fn p1_l2_norm(mesh: &Mesh1D, v: &P1Field) -> f64 {
    v.values
        .windows(2)
        .zip(mesh.sizes())
        .map(|(w, h)| h / 3.0 * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]))
        .sum::<f64>()
        .sqrt()
}

/// `||v'||_{L^2}` of a P1 field (exact).
pub fn p1_h1_seminorm(mesh: &Mesh1D, v: &P1Field) -> f64 {
    v.slopes(mesh)
        .iter()
        .zip(mesh.sizes())
        .map(|(s, h)| h * s * s)
        .sum::<f64>()
        .sqrt()
}

/// `||u - v||_{L^2}` for piecewise constants living on two different meshes
/// of the same interval, integrated exactly over the merged breakpoints.
pub fn p0_l2_distance(mesh_a: &Mesh1D, a: &P0Field, mesh_b: &Mesh1D, b: &P0Field) -> Result<f64> {
    check_len(mesh_a.element_count(), a.len())?;
    check_len(mesh_b.element_count(), b.len())?;
    let la = mesh_a.length();
    let lb = mesh_b.length();
    if ((la - lb) / la.max(lb)).abs() > 1e-12 {
        return Err(invalid("meshes cover different intervals"));
    }
    let (na, nb) = (mesh_a.nodes(), mesh_b.nodes());
    let (mut i, mut k) = (0usize, 0usize);
    let mut x = 0.0;
    let mut acc = 0.0;
    while i < a.len() && k < b.len() {
        let end = na[i + 1].min(nb[k + 1]);
        let d = a.values[i] - b.values[k];
        acc += (end - x).max(0.0) * d * d;
        x = end;
        if na[i + 1] <= end {
            i += 1;
        }
        if nb[k + 1] <= end {
            k += 1;
        }
    }
    Ok(acc.sqrt())
}
