//! Steepest-entropy-ascent dissipation for one system and for a pair of
//! walkers.
//!
//! The composite machinery here works on full product-space matrices
//! (`N² × N²`). It is the reference implementation; [`crate::subspace`]
//! evaluates the same quantities directly in the antisymmetric basis.
//!
//! Sign conventions: `B ln ρ` is the logarithm on the support of ρ, the
//! entropy operator is `S = −B ln ρ` (with `k_B = 1`), and the dissipative
//! contribution of subsystem `J` is `{D_J, ρ_J} = (1/τ_J)·½{Δ_J, ρ_J}` with
//! `Δ_J = (B ln ρ)^J − β_1 (C_1)^J + β_2 (C_2)^J`. For a Gibbs state
//! `e^{−βH}/Z` the multipliers come out as `β_1 = −ln Z` and `β_2 = β`.

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{antisym_projector, kron, partial_trace, Subsystem};
use crate::linalg::{
    add_scaled, anticommutator, commutator, frobenius_norm, hermiticity_error, hermitize, identity, matmul, scale,
    trace_product, weighted_inner, CMat, HermitianEigen, I, ZERO,
};

pub const DEFAULT_CUTOFF_EIG: f64 = 1e-12;
pub const DEFAULT_CUTOFF_GRAM: f64 = 1e-12;

/// Relaxation times and numerical thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeaParams {
    pub tau_a: f64,
    pub tau_b: f64,
    /// Eigenvalues at or below this are treated as the kernel of ρ.
    pub cutoff_eig: f64,
    /// Relative threshold on `det Ω` below which a subsystem is skipped.
    pub cutoff_gram: f64,
}

impl Default for SeaParams {
    fn default() -> Self {
        Self { tau_a: 1.0, tau_b: 1.0, cutoff_eig: DEFAULT_CUTOFF_EIG, cutoff_gram: DEFAULT_CUTOFF_GRAM }
    }
}

impl SeaParams {
    /// Relaxation times may be `+∞` (no dissipation) but not zero or NaN.
    pub fn validate(&self) -> Result<()> {
        for (name, tau) in [("tau_a", self.tau_a), ("tau_b", self.tau_b)] {
            if tau.is_nan() || tau <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {tau}")));
            }
        }
        for (name, c) in [("cutoff_eig", self.cutoff_eig), ("cutoff_gram", self.cutoff_gram)] {
            if !c.is_finite() || c <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {c}")));
            }
        }
        Ok(())
    }

    pub fn tau(&self, j: Subsystem) -> f64 {
        match j {
            Subsystem::A => self.tau_a,
            Subsystem::B => self.tau_b,
        }
    }

    /// `(τ_A + τ_B) / 2`, the unit of reported time.
    pub fn mean_tau(&self) -> f64 {
        0.5 * (self.tau_a + self.tau_b)
    }
}

fn check_hermitian(rho: MatRef<'_, c64>) -> Result<()> {
    if rho.nrows() != rho.ncols() {
        return Err(Error::Shape(format!("expected a square matrix, got {}x{}", rho.nrows(), rho.ncols())));
    }
    let err = hermiticity_error(rho);
    if !err.is_finite() {
        return Err(Error::NonFinite("density matrix".into()));
    }
    if err > 1e-8 * frobenius_norm(rho).max(1.0) {
        return Err(Error::NotHermitian(err));
    }
    Ok(())
}

/// `Σ_{λ_k > cutoff} ln λ_k |k⟩⟨k|`
pub fn b_ln(rho: MatRef<'_, c64>, cutoff: f64) -> Result<CMat> {
    check_hermitian(rho)?;
    let eig = HermitianEigen::new(hermitize(rho).as_ref())?;
    Ok(b_ln_from_eigen(&eig, cutoff))
}

pub fn b_ln_from_eigen(eig: &HermitianEigen, cutoff: f64) -> CMat {
    eig.map(|l| if l > cutoff { l.ln() } else { 0.0 })
}

fn single_dim(x: MatRef<'_, c64>) -> Result<usize> {
    let d = x.nrows();
    let n = (d as f64).sqrt().round() as usize;
    if x.ncols() != d || n * n != d {
        return Err(Error::Shape(format!(
            "expected a square operator on a two-walker space, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(n)
}

/// `Tr_J̄[(I_J ⊗ w) X]` for `J = A`, `Tr_J̄[(w ⊗ I_J) X]` for `J = B`.
pub fn perceive_with(x: MatRef<'_, c64>, weight: MatRef<'_, c64>, keep: Subsystem) -> Result<CMat> {
    let n = single_dim(x)?;
    if weight.nrows() != n || weight.ncols() != n {
        return Err(Error::Shape(format!(
            "perception weight must be {n}x{n}, got {}x{}",
            weight.nrows(),
            weight.ncols()
        )));
    }
    let idx = |a: usize, b: usize| a * n + b;
    Ok(match keep {
        Subsystem::A => Mat::from_fn(n, n, |a, a2| {
            let mut acc = ZERO;
            for b in 0..n {
                for b2 in 0..n {
                    acc += weight[(b, b2)] * x[(idx(a, b2), idx(a2, b))];
                }
            }
            acc
        }),
        Subsystem::B => Mat::from_fn(n, n, |b, b2| {
            let mut acc = ZERO;
            for a in 0..n {
                for a2 in 0..n {
                    acc += weight[(a, a2)] * x[(idx(a2, b), idx(a, b2))];
                }
            }
            acc
        }),
    })
}

/// Local perception `(X)^J` of a composite operator, weighted by the reduced
/// state of the other walker.
pub fn local_perception(x: MatRef<'_, c64>, rho: MatRef<'_, c64>, keep: Subsystem) -> Result<CMat> {
    let n = single_dim(rho)?;
    if x.shape() != rho.shape() {
        return Err(Error::Shape("operator and state dimensions differ".into()));
    }
    let other = partial_trace(rho, (n, n), keep.other())?;
    perceive_with(x, other.as_ref(), keep)
}

/// `(S(ρ))^J` with `S = −B ln ρ`.
pub fn perceived_entropy_operator(rho: MatRef<'_, c64>, keep: Subsystem, cutoff: f64) -> Result<CMat> {
    let bln = b_ln(rho, cutoff)?;
    let p = local_perception(bln.as_ref(), rho, keep)?;
    Ok(scale(p.as_ref(), c64::new(-1.0, 0.0)))
}

/// Everything subsystem `J` sees: its reduced state, the perceived `B ln ρ`
/// and the perceived conserved operators.
#[derive(Debug, Clone)]
pub struct PerceivedOperators {
    pub rho_reduced: CMat,
    /// `(B ln ρ)^J`; the locally perceived entropy operator is its negative.
    pub bln: CMat,
    /// `(C_1)^J`, the perceived normalization constraint.
    pub c1: CMat,
    /// `(C_2)^J`, the perceived Hamiltonian.
    pub c2: CMat,
}

/// `Ω_kl = Tr(ρ_J ½{(C_k)^J, (C_l)^J})`
pub fn gram_matrix(ops: &PerceivedOperators) -> [[f64; 2]; 2] {
    let r = ops.rho_reduced.as_ref();
    let o11 = weighted_inner(r, ops.c1.as_ref(), ops.c1.as_ref());
    let o12 = weighted_inner(r, ops.c1.as_ref(), ops.c2.as_ref());
    let o22 = weighted_inner(r, ops.c2.as_ref(), ops.c2.as_ref());
    [[o11, o12], [o12, o22]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierSolution {
    pub beta1: f64,
    pub beta2: f64,
    pub gram: [[f64; 2]; 2],
    pub det_gram: f64,
    pub degenerate: bool,
}

fn det2(m: [[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Cofactor weights of the first-row expansion of
/// `| X_0  X_1  X_2 ; r_1 Ω_11 Ω_12 ; r_2 Ω_21 Ω_22 |`.
fn cofactors(gram: [[f64; 2]; 2], rhs: [f64; 2]) -> [f64; 3] {
    let [[o11, o12], [o21, o22]] = gram;
    let [r1, r2] = rhs;
    [det2(gram), -det2([[r1, o12], [r2, o22]]), det2([[r1, o11], [r2, o21]])]
}

/// Solve the 2×2 constraint system by Cramer's rule.
pub fn lagrange_multipliers(ops: &PerceivedOperators, cutoff_gram: f64) -> MultiplierSolution {
    let gram = gram_matrix(ops);
    let rhs = [
        weighted_inner(ops.rho_reduced.as_ref(), ops.c1.as_ref(), ops.bln.as_ref()),
        weighted_inner(ops.rho_reduced.as_ref(), ops.c2.as_ref(), ops.bln.as_ref()),
    ];
    let det = det2(gram);
    let degenerate = det.partial_cmp(&(cutoff_gram * gram[0][0] * gram[1][1])) != Some(std::cmp::Ordering::Greater)
        || !det.is_finite();
    if degenerate {
        return MultiplierSolution { beta1: 0.0, beta2: 0.0, gram, det_gram: det, degenerate };
    }
    let [_, k1, k2] = cofactors(gram, rhs);
    // Δ = bln + (k1/det) C_1 + (k2/det) C_2 = bln − β_1 C_1 + β_2 C_2
    MultiplierSolution { beta1: -k1 / det, beta2: k2 / det, gram, det_gram: det, degenerate }
}

/// One subsystem's share of the dissipation.
#[derive(Debug, Clone)]
pub struct DissipatorTerm {
    /// `{D_J, ρ_J}`
    pub anticommutator: CMat,
    pub multipliers: MultiplierSolution,
    /// `Tr[{D_J, ρ_J} (B ln ρ)^J]`, this subsystem's entropy production.
    pub entropy_production: f64,
}

impl DissipatorTerm {
    pub fn zero(n: usize, multipliers: MultiplierSolution) -> Self {
        Self { anticommutator: Mat::zeros(n, n), multipliers, entropy_production: 0.0 }
    }
}

/// `{D_J, ρ_J}` as the determinant ratio, expanded by cofactors along the
/// operator row and scaled by `1/τ_J`.
pub fn dissipator_term(ops: &PerceivedOperators, tau: f64, cutoff_gram: f64) -> DissipatorTerm {
    let n = ops.rho_reduced.nrows();
    let mult = lagrange_multipliers(ops, cutoff_gram);
    if mult.degenerate {
        return DissipatorTerm::zero(n, mult);
    }
    let r = ops.rho_reduced.as_ref();
    let rhs =
        [weighted_inner(r, ops.c1.as_ref(), ops.bln.as_ref()), weighted_inner(r, ops.c2.as_ref(), ops.bln.as_ref())];
    let [k0, k1, k2] = cofactors(mult.gram, rhs);
    let mut delta = scale(ops.bln.as_ref(), c64::new(k0, 0.0));
    add_scaled(&mut delta, k1, ops.c1.as_ref());
    add_scaled(&mut delta, k2, ops.c2.as_ref());
    let factor = 0.5 / (tau * mult.det_gram);
    let anti = scale(anticommutator(delta.as_ref(), r).as_ref(), c64::new(factor, 0.0));
    let entropy_production = trace_product(anti.as_ref(), ops.bln.as_ref()).re;
    DissipatorTerm { anticommutator: anti, multipliers: mult, entropy_production }
}

/// `−i[H, ρ]`
pub fn unitary_rhs(rho: MatRef<'_, c64>, h: MatRef<'_, c64>) -> CMat {
    scale(commutator(h, rho).as_ref(), -I)
}

/// Single-system SEA right-hand side with `C_1 = I`, `C_2 = H`.
pub fn single_component_rhs(rho: MatRef<'_, c64>, h: MatRef<'_, c64>, tau: f64, cutoff: f64) -> Result<CMat> {
    let term = single_component_dissipator(rho, h, tau, cutoff, DEFAULT_CUTOFF_GRAM)?;
    let mut out = unitary_rhs(rho, h);
    add_scaled(&mut out, -1.0, term.anticommutator.as_ref());
    Ok(out)
}

/// The dissipative term `{D, ρ}` of the single-system equation.
pub fn single_component_dissipator(
    rho: MatRef<'_, c64>,
    h: MatRef<'_, c64>,
    tau: f64,
    cutoff_eig: f64,
    cutoff_gram: f64,
) -> Result<DissipatorTerm> {
    if h.shape() != rho.shape() {
        return Err(Error::Shape("Hamiltonian and state dimensions differ".into()));
    }
    let ops = PerceivedOperators {
        rho_reduced: hermitize(rho),
        bln: b_ln(rho, cutoff_eig)?,
        c1: identity(rho.nrows()),
        c2: h.to_owned(),
    };
    Ok(dissipator_term(&ops, tau, cutoff_gram))
}

/// Which normalization constraint the composite equation conserves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintMode {
    /// `C_1 = I` on the whole product space; no projection.
    ProductSpace,
    /// `C_1 = P_a`, and the dissipator is projected back onto the
    /// antisymmetric subspace.
    Antisymmetric,
}

/// Dissipative part of the composite equation at one state.
#[derive(Debug, Clone)]
pub struct SeaEvaluation {
    /// `−Σ_J {D_J, ρ_J} ⊗ ρ_J̄` (projected in antisymmetric mode).
    pub dissipation: CMat,
    pub terms: [DissipatorTerm; 2],
    /// `ds/dt`
    pub entropy_production: f64,
    /// Subsystems skipped because of a singular Gram matrix.
    pub degenerate: usize,
}

/// Two-walker SEA equation on the full product space.
#[derive(Debug, Clone)]
pub struct CompositeSea {
    n: usize,
    h: CMat,
    projector: Option<CMat>,
    params: SeaParams,
}

impl CompositeSea {
    pub fn new(h: MatRef<'_, c64>, params: SeaParams, mode: ConstraintMode) -> Result<Self> {
        params.validate()?;
        let n = single_dim(h)?;
        check_hermitian(h)?;
        let projector = match mode {
            ConstraintMode::ProductSpace => None,
            ConstraintMode::Antisymmetric => Some(antisym_projector(n)),
        };
        Ok(Self { n, h: h.to_owned(), projector, params })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hamiltonian(&self) -> MatRef<'_, c64> {
        self.h.as_ref()
    }

    pub fn projector(&self) -> Option<MatRef<'_, c64>> {
        self.projector.as_ref().map(|p| p.as_ref())
    }

    pub fn params(&self) -> &SeaParams {
        &self.params
    }

    pub fn mode(&self) -> ConstraintMode {
        if self.projector.is_some() {
            ConstraintMode::Antisymmetric
        } else {
            ConstraintMode::ProductSpace
        }
    }

    fn check_state(&self, rho: MatRef<'_, c64>) -> Result<()> {
        let d = self.n * self.n;
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::Shape(format!("state must be {d}x{d}, got {}x{}", rho.nrows(), rho.ncols())));
        }
        check_hermitian(rho)
    }

    /// Operators perceived by subsystem `keep`, given `B ln ρ`.
    pub fn perceived(&self, rho: MatRef<'_, c64>, bln: MatRef<'_, c64>, keep: Subsystem) -> Result<PerceivedOperators> {
        let dims = (self.n, self.n);
        let rho_reduced = hermitize(partial_trace(rho, dims, keep)?.as_ref());
        let other = hermitize(partial_trace(rho, dims, keep.other())?.as_ref());
        let w = other.as_ref();
        let c1 = match &self.projector {
            Some(p) => perceive_with(p.as_ref(), w, keep)?,
            None => identity(self.n),
        };
        Ok(PerceivedOperators {
            rho_reduced,
            bln: hermitize(perceive_with(bln, w, keep)?.as_ref()),
            c1: hermitize(c1.as_ref()),
            c2: hermitize(perceive_with(self.h.as_ref(), w, keep)?.as_ref()),
        })
    }

    pub fn dissipator_term(&self, rho: MatRef<'_, c64>, keep: Subsystem) -> Result<DissipatorTerm> {
        self.check_state(rho)?;
        let bln = b_ln(rho, self.params.cutoff_eig)?;
        let ops = self.perceived(rho, bln.as_ref(), keep)?;
        Ok(dissipator_term(&ops, self.params.tau(keep), self.params.cutoff_gram))
    }

    /// Dissipative part at `rho`; `eig` may carry a precomputed
    /// eigendecomposition of `rho`.
    pub fn evaluate(&self, rho: MatRef<'_, c64>, eig: Option<&HermitianEigen>) -> Result<SeaEvaluation> {
        self.check_state(rho)?;
        let bln = match eig {
            Some(e) => b_ln_from_eigen(e, self.params.cutoff_eig),
            None => b_ln(rho, self.params.cutoff_eig)?,
        };
        let mut terms = Vec::with_capacity(2);
        let mut reduced = Vec::with_capacity(2);
        for keep in [Subsystem::A, Subsystem::B] {
            let ops = self.perceived(rho, bln.as_ref(), keep)?;
            terms.push(dissipator_term(&ops, self.params.tau(keep), self.params.cutoff_gram));
            reduced.push(ops.rho_reduced);
        }
        let mut total = kron(terms[0].anticommutator.as_ref(), reduced[1].as_ref());
        total += kron(reduced[0].as_ref(), terms[1].anticommutator.as_ref());
        if let Some(p) = &self.projector {
            total = matmul(matmul(p.as_ref(), total.as_ref()).as_ref(), p.as_ref());
        }
        let dissipation = scale(total.as_ref(), c64::new(-1.0, 0.0));
        let entropy_production = terms.iter().map(|t| t.entropy_production).sum();
        let degenerate = terms.iter().filter(|t| t.multipliers.degenerate).count();
        let [a, b]: [DissipatorTerm; 2] = terms.try_into().expect("two subsystems");
        Ok(SeaEvaluation { dissipation, terms: [a, b], entropy_production, degenerate })
    }

    /// Full right-hand side `−i[H, ρ] + dissipation`.
    pub fn rhs(&self, rho: MatRef<'_, c64>) -> Result<CMat> {
        let eval = self.evaluate(rho, None)?;
        let mut out = unitary_rhs(rho, self.h.as_ref());
        out += eval.dissipation;
        Ok(out)
    }

    pub fn entropy_production_rate(&self, rho: MatRef<'_, c64>) -> Result<f64> {
        Ok(self.evaluate(rho, None)?.entropy_production)
    }
}

fn antisymmetric_engine(h_a: MatRef<'_, c64>, p_a: MatRef<'_, c64>, params: &SeaParams) -> Result<CompositeSea> {
    let sea = CompositeSea::new(h_a, *params, ConstraintMode::Antisymmetric)?;
    let own = sea.projector().expect("antisymmetric mode");
    if p_a.shape() != own.shape() || crate::linalg::max_abs_diff(p_a, own) > 1e-12 {
        return Err(Error::InvalidParameter("supplied projector is not the antisymmetric projector".into()));
    }
    Ok(sea)
}

/// Two-walker SEA right-hand side on the antisymmetric subspace.
pub fn sea_rhs(rho: MatRef<'_, c64>, h_a: MatRef<'_, c64>, params: &SeaParams, p_a: MatRef<'_, c64>) -> Result<CMat> {
    antisymmetric_engine(h_a, p_a, params)?.rhs(rho)
}

/// `ds/dt = Σ_J Tr[{D_J, ρ_J} (B ln ρ)^J]` along the two-walker SEA flow.
pub fn entropy_production_rate(
    rho: MatRef<'_, c64>,
    params: &SeaParams,
    h_a: MatRef<'_, c64>,
    p_a: MatRef<'_, c64>,
) -> Result<f64> {
    antisymmetric_engine(h_a, p_a, params)?.entropy_production_rate(rho)
}
