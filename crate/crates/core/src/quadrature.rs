//! Quadrature rules on the reference element `[0, 1]`.

/// Which rule to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuadratureTag {
    /// One point at the element midpoint; exact for linears.
    Midpoint1,
    /// Two-point Gauss-Legendre; exact for cubics.
    Gauss2,
    /// Four-point Gauss-Legendre; exact up to degree 7. Used only when
    /// comparing discrete fields against smooth closed-form functions.
    Gauss4,
}

/// Points and weights on `[0, 1]`; the weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub tag: QuadratureTag,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(tag: QuadratureTag) -> Self {
        match tag {
            QuadratureTag::Midpoint1 => Self {
                tag,
                points: vec![0.5],
                weights: vec![1.0],
            },
            QuadratureTag::Gauss2 => {
                let d = 0.5 / 3f64.sqrt();
                Self {
                    tag,
                    points: vec![0.5 - d, 0.5 + d],
                    weights: vec![0.5, 0.5],
                }
            }
            QuadratureTag::Gauss4 => {
                // Gauss-Legendre nodes/weights on [-1, 1], mapped to [0, 1].
                let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
                let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
                let wa = (18.0 + 30f64.sqrt()) / 36.0;
                let wb = (18.0 - 30f64.sqrt()) / 36.0;
                let xs = [-b, -a, a, b];
                let ws = [wb, wa, wa, wb];
                Self {
                    tag,
                    points: xs.iter().map(|x| 0.5 * (x + 1.0)).collect(),
                    weights: ws.iter().map(|w| 0.5 * w).collect(),
                }
            }
        }
    }

    pub fn midpoint() -> Self {
        Self::new(QuadratureTag::Midpoint1)
    }

    pub fn gauss2() -> Self {
        Self::new(QuadratureTag::Gauss2)
    }

    pub fn gauss4() -> Self {
        Self::new(QuadratureTag::Gauss4)
    }

    /// Iterates over `(xi, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let h = b - a;
        self.iter().map(|(xi, w)| w * f(a + xi * h)).sum::<f64>() * h
    }
}
