//! Dense complex matrix helpers shared by every module.
//!
//! Everything is stored as `faer::Mat<c64>`. The helpers here are the small
//! set of operations the dynamics need over and over: commutators, traces,
//! norms and functions of Hermitian matrices through their eigendecomposition.

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type CMat = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

#[inline]
pub fn real(x: f64) -> c64 {
    c64::new(x, 0.0)
}

pub fn zeros(n: usize) -> CMat {
    Mat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

/// Build a complex matrix from real row-major data.
pub fn from_real_rows(rows: &[Vec<f64>]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    Mat::from_fn(n, m, |i, j| real(rows[i][j]))
}

pub fn diagonal(values: &[f64]) -> CMat {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { real(values[i]) } else { ZERO })
}

pub fn adjoint(a: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

pub fn scale(a: MatRef<'_, c64>, s: c64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// `a + s * b`
pub fn axpy(a: MatRef<'_, c64>, s: f64, b: MatRef<'_, c64>) -> CMat {
    assert_eq!(a.shape(), b.shape());
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + b[(i, j)] * s)
}

/// In-place `a += s * b`.
pub fn add_scaled(a: &mut CMat, s: f64, b: MatRef<'_, c64>) {
    assert_eq!(a.shape(), b.shape());
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            a[(i, j)] += b[(i, j)] * s;
        }
    }
}

pub fn trace(a: MatRef<'_, c64>) -> c64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn frobenius_norm(a: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// Frobenius norm of `a - b`.
pub fn distance(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += (a[(i, j)] - b[(i, j)]).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Largest entry-wise modulus of `a - b`.
pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let mut worst: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

/// `‖A − A†‖_F`
pub fn hermiticity_error(a: MatRef<'_, c64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += (a[(i, j)] - a[(j, i)].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

/// `(A + A†) / 2`
pub fn hermitize(a: MatRef<'_, c64>) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

pub fn matmul(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    a * b
}

/// `[A, B] = AB − BA`
pub fn commutator(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    let ab = a * b;
    let ba = b * a;
    ab - ba
}

/// `{A, B} = AB + BA`
pub fn anticommutator(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    let ab = a * b;
    let ba = b * a;
    ab + ba
}

/// `Tr(ρ · ½{X, Y})`, real part. This is the state-weighted inner product
/// used for Gram matrices and multiplier right-hand sides.
pub fn weighted_inner(rho: MatRef<'_, c64>, x: MatRef<'_, c64>, y: MatRef<'_, c64>) -> f64 {
    let xy = x * y;
    let yx = y * x;
    0.5 * (trace_product(rho, xy.as_ref()) + trace_product(rho, yx.as_ref())).re
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(a: MatRef<'_, c64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Shape(format!(
                "eigendecomposition needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let evd = a
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
        let s = evd.S().column_vector();
        let mut order: Vec<usize> = (0..a.nrows()).collect();
        let values_raw: Vec<f64> = (0..a.nrows()).map(|i| s[i].re).collect();
        order.sort_by(|&x, &y| values_raw[x].total_cmp(&values_raw[y]));
        let u = evd.U();
        let vectors = Mat::from_fn(a.nrows(), a.nrows(), |i, j| u[(i, order[j])]);
        let values = order.iter().map(|&k| values_raw[k]).collect();
        Ok(Self { values, vectors })
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// `U f(Λ) U†`
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let u = &self.vectors;
        let scaled = Mat::from_fn(n, n, |i, j| u[(i, j)] * fv[j]);
        let u_adj = adjoint(u.as_ref());
        scaled * u_adj
    }

    /// `U g(Λ) U†` for a complex-valued spectral function.
    pub fn map_complex(&self, f: impl Fn(f64) -> c64) -> CMat {
        let n = self.values.len();
        let fv: Vec<c64> = self.values.iter().map(|&v| f(v)).collect();
        let u = &self.vectors;
        let scaled = Mat::from_fn(n, n, |i, j| u[(i, j)] * fv[j]);
        let u_adj = adjoint(u.as_ref());
        scaled * u_adj
    }
}

/// `exp(−i H t)` for Hermitian `H`.
pub fn unitary_propagator(h: MatRef<'_, c64>, t: f64) -> Result<CMat> {
    let eig = HermitianEigen::new(h)?;
    Ok(eig.map_complex(|e| c64::new(0.0, -e * t).exp()))
}
