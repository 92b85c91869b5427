//! Symmetric banded matrices and their Cholesky factorization.

use crate::error::{Error, Result};

/// Symmetric matrix stored by its lower band (`bandwidth` sub-diagonals).
#[derive(Debug, Clone, PartialEq)]
pub struct SymBandMatrix {
    n: usize,
    kd: usize,
    // row-major lower band: row i holds columns i-kd ..= i
    data: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            kd: bandwidth,
            data: vec![0.0; n * (bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.kd
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.kd {
            None
        } else {
            Some(r * (self.kd + 1) + self.kd - (r - c))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`). Entries outside
    /// the band panic.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside bandwidth {}", self.kd));
        self.data[s] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kd);
            for j in lo..i {
                let a = self.data[i * (self.kd + 1) + self.kd - (i - j)];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += self.data[i * (self.kd + 1) + self.kd] * x[i];
        }
        y
    }

    /// `b - A x` accumulated in compensated (twice-working-precision)
    /// arithmetic, for iterative refinement.
    pub fn residual_compensated(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        assert_eq!(b.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kd);
                let hi = (i + self.kd).min(self.n - 1);
                let (mut s, mut c) = (b[i], 0.0);
                for j in lo..=hi {
                    let p = -self.get(i, j) * x[j];
                    let pe = (-self.get(i, j)).mul_add(x[j], -p);
                    let (t, e) = two_sum(s, p);
                    s = t;
                    c += e + pe;
                }
                s + c
            })
            .collect()
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kd);
                let hi = (i + self.kd).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j).abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, kd) = (self.n, self.kd);
        let w = kd + 1;
        let mut l = vec![0.0; n * w];
        let at = |i: usize, j: usize| i * w + kd - (i - j);
        for i in 0..n {
            let lo = i.saturating_sub(kd);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(kd));
                let mut s = self.data[at(i, j)];
                for k in klo..j {
                    s -= l[at(i, k)] * l[at(j, k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::LinearSolve {
                            reason: format!("matrix not positive definite at pivot {i} (value {s:.3e})"),
                            condition_estimate: pivot_condition(&l, n, w, kd, i),
                        });
                    }
                    l[at(i, i)] = s.sqrt();
                } else {
                    l[at(i, j)] = s / l[at(j, j)];
                }
            }
        }
        Ok(BandCholesky { n, kd, l })
    }
}

fn pivot_condition(l: &[f64], _n: usize, w: usize, kd: usize, upto: usize) -> f64 {
    if upto == 0 {
        return f64::INFINITY;
    }
    let diag = (0..upto).map(|i| l[i * w + kd]);
    let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    (hi / lo).powi(2)
}

/// `A = L L^T` with `L` lower banded. Immutable, so one factorization can
/// serve any number of right-hand sides concurrently.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    kd: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * (self.kd + 1) + self.kd - (i - j)]
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solve followed by `steps` rounds of refinement against `a` with a
    /// compensated residual. `a` must be the matrix this factor came from.
    pub fn solve_refined(&self, a: &SymBandMatrix, b: &[f64], steps: usize) -> Vec<f64> {
        let mut x = self.solve(b);
        for _ in 0..steps {
            let mut r = a.residual_compensated(&x, b);
            self.solve_in_place(&mut r);
            x.iter_mut().zip(&r).for_each(|(x, d)| *x += d);
        }
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let kd = self.kd;
        for i in 0..self.n {
            let lo = i.saturating_sub(kd);
            let mut s = x[i];
            for k in lo..i {
                s -= self.at(i, k) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
        for i in (0..self.n).rev() {
            let hi = (i + kd).min(self.n - 1);
            let mut s = x[i];
            for k in i + 1..=hi {
                s -= self.at(k, i) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
    }

    /// Squared ratio of the extreme Cholesky pivots; a cheap lower-bound
    /// style estimate of the 2-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        pivot_condition(&self.l, self.n, self.kd + 1, self.kd, self.n)
    }
}

/// General (nonsymmetric) banded matrix with `kl` sub- and `ku`
/// super-diagonals. Row `i` is stored over columns `i - kl ..= i + kl + ku`
/// so the fill from row interchanges fits.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (2 * kl + ku + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width() + j + self.kl - i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Adds `v` at `(i, j)`. Panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside the band");
        let k = self.slot(i, j);
        self.data[k] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Divides every row by its largest entry; returns the factors so the
    /// right-hand side can be scaled the same way.
    pub fn equilibrate_rows(&mut self) -> Vec<f64> {
        let w = self.width();
        self.data
            .chunks_mut(w)
            .map(|row| {
                let m = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let s = if m > 0.0 { 1.0 / m } else { 1.0 };
                row.iter_mut().for_each(|v| *v *= s);
                s
            })
            .collect()
    }

    /// LU factorization with partial pivoting.
    pub fn lu(mut self) -> Result<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let reach = kl + ku;
        let mut piv = vec![0usize; n];
        let mut lower = vec![0.0; n * kl];
        let (mut dmax, mut dmin) = (0.0f64, f64::INFINITY);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            for i in k + 1..=last {
                if self.data[self.slot(i, k)].abs() > self.data[self.slot(p, k)].abs() {
                    p = i;
                }
            }
            piv[k] = p;
            let right = (k + reach).min(n - 1);
            if p != k {
                for j in k..=right {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.slot(k, k)];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::LinearSolve {
                    reason: format!("zero pivot in column {k}"),
                    condition_estimate: f64::INFINITY,
                });
            }
            dmax = dmax.max(d.abs());
            dmin = dmin.min(d.abs());
            for i in k + 1..=last {
                let m = self.data[self.slot(i, k)] / d;
                lower[k * kl + (i - k - 1)] = m;
                if m != 0.0 {
                    for j in k + 1..=right {
                        let akj = self.data[self.slot(k, j)];
                        let s = self.slot(i, j);
                        self.data[s] -= m * akj;
                    }
                }
            }
        }
        Ok(BandLu {
            u: self,
            lower,
            piv,
            condition_estimate: dmax / dmin,
        })
    }
}

/// Factors `P A = L U` of a [`BandMatrix`].
#[derive(Debug, Clone)]
pub struct BandLu {
    u: BandMatrix,
    lower: Vec<f64>,
    piv: Vec<usize>,
    condition_estimate: f64,
}

impl BandLu {
    /// Ratio of extreme pivots; a cheap lower bound on the condition number.
    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let a = &self.u;
        let (n, kl) = (a.n, a.kl);
        assert_eq!(x.len(), n);
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                x[i] -= self.lower[k * kl + (i - k - 1)] * xk;
            }
        }
        for k in (0..n).rev() {
            let right = (k + a.kl + a.ku).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=right {
                s -= a.data[a.slot(k, j)] * x[j];
            }
            x[k] = s / a.data[a.slot(k, k)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}
