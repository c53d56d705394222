//! Initial states: the two-walker singlet and its mixture with white noise.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{antisym_projector, AntisymBasis};
use crate::linalg::{real, CMat, ZERO};
use faer::c64;

/// Sites of the singlet and the weight `ε` it gets in the mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialStateSpec {
    pub site_i: usize,
    pub site_j: usize,
    pub epsilon: f64,
}

impl Default for InitialStateSpec {
    fn default() -> Self {
        Self { site_i: 5, site_j: 6, epsilon: 0.95 }
    }
}

impl InitialStateSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        check_sites(self.site_i, self.site_j, n)
    }
}

fn check_sites(i: usize, j: usize, n: usize) -> Result<()> {
    if i >= n || j >= n {
        return Err(Error::InvalidParameter(format!("sites ({i}, {j}) out of range for {n} vertices")));
    }
    if i == j {
        return Err(Error::InvalidParameter(format!("singlet on a single site ({i}, {i}) is the zero vector")));
    }
    Ok(())
}

/// `(|i⟩|j⟩ − |j⟩|i⟩)/√2` as a product-space vector of length `n²`.
pub fn singlet_state(i: usize, j: usize, n: usize) -> Result<Vec<c64>> {
    check_sites(i, j, n)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = vec![ZERO; n * n];
    v[i * n + j] = real(h);
    v[j * n + i] = real(-h);
    Ok(v)
}

/// `|v⟩⟨v|`
pub fn pure_density(v: &[c64]) -> CMat {
    let d = v.len();
    Mat::from_fn(d, d, |r, c| v[r] * v[c].conj())
}

/// `P_a / M`, the uniform mixture over the antisymmetric subspace.
pub fn maximally_mixed_antisym(n: usize) -> Result<CMat> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n ≥ 2, got {n}")));
    }
    let m = (n * (n - 1) / 2) as f64;
    let p = antisym_projector(n);
    Ok(Mat::from_fn(n * n, n * n, |r, c| p[(r, c)] / m))
}

/// `ε |ψ(i,j)⟩⟨ψ(i,j)| + (1 − ε) P_a / M` on the product space.
pub fn perturbed_initial_state(spec: &InitialStateSpec, n: usize) -> Result<CMat> {
    spec.validate(n)?;
    let psi = singlet_state(spec.site_i, spec.site_j, n)?;
    let pure = pure_density(&psi);
    let mixed = maximally_mixed_antisym(n)?;
    let e = spec.epsilon;
    Ok(Mat::from_fn(n * n, n * n, |r, c| pure[(r, c)] * e + mixed[(r, c)] * (1.0 - e)))
}

/// The same state expressed in the antisymmetric basis (`M × M`).
pub fn perturbed_initial_state_restricted(spec: &InitialStateSpec, basis: &AntisymBasis) -> Result<CMat> {
    spec.validate(basis.n())?;
    let (lo, hi) = (spec.site_i.min(spec.site_j), spec.site_i.max(spec.site_j));
    let k = basis.index_of(lo, hi).expect("validated sites");
    let m = basis.dim();
    let noise = (1.0 - spec.epsilon) / m as f64;
    Ok(Mat::from_fn(m, m, |r, c| {
        if r != c {
            ZERO
        } else if r == k {
            real(spec.epsilon + noise)
        } else {
            real(noise)
        }
    }))
}
