//! Two-walker Hilbert space algebra.
//!
//! Product states `|a⟩|b⟩` use the flat index `a * n_b + b`. The fermionic
//! sector is spanned by `|ψ_ij⟩ = (|ij⟩ − |ji⟩)/√2` for `i < j`, enumerated
//! lexicographically by [`AntisymBasis`].
//!
//! Besides the explicit operations (`kron`, `partial_trace`, ...) the basis
//! offers "implicit" versions that act on an `M×M` matrix as if it had been
//! embedded into the `N²×N²` space first. They never form the large matrix
//! and are what the time integrator uses.

use std::fmt;

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{real, CMat, ZERO};

/// Which walker of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

impl Subsystem {
    pub fn other(self) -> Self {
        match self {
            Subsystem::A => Subsystem::B,
            Subsystem::B => Subsystem::A,
        }
    }
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subsystem::A => f.write_str("A"),
            Subsystem::B => f.write_str("B"),
        }
    }
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

fn check_composite(x: MatRef<'_, c64>, dims: (usize, usize)) -> Result<()> {
    let d = dims.0 * dims.1;
    if x.nrows() != d || x.ncols() != d {
        return Err(Error::Shape(format!(
            "expected a {d}x{d} operator on a {}⊗{} space, got {}x{}",
            dims.0,
            dims.1,
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

/// Partial trace of an operator on `H_A ⊗ H_B`, keeping `keep`.
pub fn partial_trace(x: MatRef<'_, c64>, dims: (usize, usize), keep: Subsystem) -> Result<CMat> {
    check_composite(x, dims)?;
    let (na, nb) = dims;
    Ok(match keep {
        Subsystem::A => Mat::from_fn(na, na, |a, a2| (0..nb).map(|b| x[(a * nb + b, a2 * nb + b)]).sum()),
        Subsystem::B => Mat::from_fn(nb, nb, |b, b2| (0..na).map(|a| x[(a * nb + b, a * nb + b2)]).sum()),
    })
}

/// `S |i⟩|j⟩ = |j⟩|i⟩` on `C^n ⊗ C^n`.
pub fn swap_operator(n: usize) -> CMat {
    let d = n * n;
    Mat::from_fn(d, d, |r, c| {
        let (i, j) = (c / n, c % n);
        if r == j * n + i {
            real(1.0)
        } else {
            ZERO
        }
    })
}

/// `P_a = (I − S) / 2`
pub fn antisym_projector(n: usize) -> CMat {
    let d = n * n;
    Mat::from_fn(d, d, |r, c| {
        let (i, j) = (c / n, c % n);
        let mut v = if r == c { 0.5 } else { 0.0 };
        if r == j * n + i {
            v -= 0.5;
        }
        real(v)
    })
}

/// Amplitude `⟨ab|ψ_k⟩ = ±1/√2` of a product basis state on an antisymmetric
/// basis vector, or nothing when `a == b`.
#[derive(Debug, Clone, Copy)]
struct Amplitude {
    k: usize,
    value: f64,
}

/// Ordered pairs `(i, j)`, `i < j`, indexing the antisymmetric subspace.
#[derive(Debug, Clone)]
pub struct AntisymBasis {
    n: usize,
    pairs: Vec<(usize, usize)>,
    // Indexed by the product-space flat index a * n + b.
    amplitude: Vec<Option<Amplitude>>,
}

impl AntisymBasis {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("antisymmetric subspace needs n ≥ 2, got {n}")));
        }
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i, j));
            }
        }
        let mut amplitude = vec![None; n * n];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (k, &(i, j)) in pairs.iter().enumerate() {
            amplitude[i * n + j] = Some(Amplitude { k, value: h });
            amplitude[j * n + i] = Some(Amplitude { k, value: -h });
        }
        Ok(Self { n, pairs, amplitude })
    }

    /// Single-walker dimension `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Subspace dimension `M = N(N−1)/2`.
    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        if i < j && j < self.n {
            self.amplitude[i * self.n + j].map(|a| a.k)
        } else {
            None
        }
    }

    /// `|ψ_pairs[k]⟩` as a vector of length `N²`.
    pub fn basis_vector(&self, k: usize) -> Vec<c64> {
        let (i, j) = self.pairs[k];
        let mut v = vec![ZERO; self.n * self.n];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        v[i * self.n + j] = real(h);
        v[j * self.n + i] = real(-h);
        v
    }

    /// Isometry `V` (`N² × M`) whose columns are the basis vectors.
    pub fn isometry(&self) -> CMat {
        let d = self.n * self.n;
        Mat::from_fn(d, self.dim(), |r, k| match self.amplitude[r] {
            Some(a) if a.k == k => real(a.value),
            _ => ZERO,
        })
    }

    fn check_small(&self, x: MatRef<'_, c64>) -> Result<()> {
        let m = self.dim();
        if x.nrows() != m || x.ncols() != m {
            return Err(Error::Shape(format!(
                "expected an {m}x{m} subspace operator, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(())
    }

    fn check_single(&self, x: MatRef<'_, c64>, what: &str) -> Result<()> {
        if x.nrows() != self.n || x.ncols() != self.n {
            return Err(Error::Shape(format!("{what} must be {n}x{n}, got {}x{}", x.nrows(), x.ncols(), n = self.n)));
        }
        Ok(())
    }

    /// `V X V†`: lift a subspace operator to the product space.
    pub fn embed(&self, small: MatRef<'_, c64>) -> Result<CMat> {
        self.check_small(small)?;
        let d = self.n * self.n;
        Ok(Mat::from_fn(d, d, |r, c| self.full_entry(small, r, c)))
    }

    /// `V† X V`: compress a product-space operator onto the subspace.
    pub fn restrict(&self, big: MatRef<'_, c64>) -> Result<CMat> {
        check_composite(big, (self.n, self.n))?;
        let n = self.n;
        let m = self.dim();
        Ok(Mat::from_fn(m, m, |k, l| {
            let (i, j) = self.pairs[k];
            let (p, q) = self.pairs[l];
            let (ij, ji) = (i * n + j, j * n + i);
            let (pq, qp) = (p * n + q, q * n + p);
            (big[(ij, pq)] - big[(ij, qp)] - big[(ji, pq)] + big[(ji, qp)]) * 0.5
        }))
    }

    /// Entry `(r, c)` of `embed(small)` in product-space indices.
    #[inline]
    fn full_entry(&self, small: MatRef<'_, c64>, r: usize, c: usize) -> c64 {
        match (self.amplitude[r], self.amplitude[c]) {
            (Some(x), Some(y)) => small[(x.k, y.k)] * (x.value * y.value),
            _ => ZERO,
        }
    }

    /// `Tr_J̄[embed(small)]` without forming the product-space matrix.
    pub fn reduced(&self, small: MatRef<'_, c64>, keep: Subsystem) -> Result<CMat> {
        self.check_small(small)?;
        let n = self.n;
        Ok(match keep {
            Subsystem::A => {
                Mat::from_fn(n, n, |a, a2| (0..n).map(|b| self.full_entry(small, a * n + b, a2 * n + b)).sum())
            }
            Subsystem::B => {
                Mat::from_fn(n, n, |b, b2| (0..n).map(|a| self.full_entry(small, a * n + b, a * n + b2)).sum())
            }
        })
    }

    /// Local perception `Tr_J̄[(I_J ⊗ w) embed(x)]` (for `J = A`) or
    /// `Tr_J̄[(w ⊗ I_J) embed(x)]` (for `J = B`), where `w` is the reduced
    /// state of the complementary walker.
    pub fn perceive(&self, x: MatRef<'_, c64>, weight: MatRef<'_, c64>, keep: Subsystem) -> Result<CMat> {
        self.check_small(x)?;
        self.check_single(weight, "perception weight")?;
        let n = self.n;
        let mut out = Mat::<c64>::zeros(n, n);
        match keep {
            // (X)^A[a,a'] = Σ_{b,b'} w[b,b'] X[(a,b'),(a',b)]
            Subsystem::A => {
                for a in 0..n {
                    for a2 in 0..n {
                        let mut acc = ZERO;
                        for b in 0..n {
                            let Some(y) = self.amplitude[a2 * n + b] else { continue };
                            for b2 in 0..n {
                                let Some(x_amp) = self.amplitude[a * n + b2] else { continue };
                                acc += weight[(b, b2)] * x[(x_amp.k, y.k)] * (x_amp.value * y.value);
                            }
                        }
                        out[(a, a2)] = acc;
                    }
                }
            }
            // (X)^B[b,b'] = Σ_{a,a'} w[a,a'] X[(a',b),(a,b')]
            Subsystem::B => {
                for b in 0..n {
                    for b2 in 0..n {
                        let mut acc = ZERO;
                        for a in 0..n {
                            let Some(y) = self.amplitude[a * n + b2] else { continue };
                            for a2 in 0..n {
                                let Some(x_amp) = self.amplitude[a2 * n + b] else { continue };
                                acc += weight[(a, a2)] * x[(x_amp.k, y.k)] * (x_amp.value * y.value);
                            }
                        }
                        out[(b, b2)] = acc;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `V† (Z ⊗ R) V`, i.e. `restrict(kron(z, r))` without forming the product.
    pub fn restrict_product(&self, z: MatRef<'_, c64>, r: MatRef<'_, c64>) -> Result<CMat> {
        self.check_single(z, "left factor")?;
        self.check_single(r, "right factor")?;
        let m = self.dim();
        Ok(Mat::from_fn(m, m, |k, l| {
            let (i, j) = self.pairs[k];
            let (p, q) = self.pairs[l];
            (z[(i, p)] * r[(j, q)] - z[(i, q)] * r[(j, p)] - z[(j, p)] * r[(i, q)] + z[(j, q)] * r[(i, p)]) * 0.5
        }))
    }
}
