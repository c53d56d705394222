//! The two-walker SEA equation evaluated in the antisymmetric basis.
//!
//! States are `M × M` matrices `r` with `ρ = V r V†`. Partial traces,
//! perceptions and the projected product `P_a (Z ⊗ R) P_a` are computed from
//! `r` directly through [`AntisymBasis`], so no `N² × N²` matrix is formed.
//! Results agree with [`CompositeSea`](crate::sea::CompositeSea) in
//! antisymmetric mode.

use faer::{c64, MatRef};

use crate::error::{Error, Result};
use crate::hilbert::{AntisymBasis, Subsystem};
use crate::linalg::{hermiticity_error, hermitize, identity, scale, CMat, HermitianEigen};
use crate::sea::{
    b_ln_from_eigen, dissipator_term, unitary_rhs, DissipatorTerm, PerceivedOperators, SeaEvaluation, SeaParams,
};

#[derive(Debug, Clone)]
pub struct AntisymSea {
    basis: AntisymBasis,
    h: CMat,
    params: SeaParams,
}

impl AntisymSea {
    /// `h` is the Hamiltonian restricted to the subspace (`M × M`).
    pub fn new(basis: AntisymBasis, h: CMat, params: SeaParams) -> Result<Self> {
        params.validate()?;
        let m = basis.dim();
        if h.nrows() != m || h.ncols() != m {
            return Err(Error::Shape(format!("Hamiltonian must be {m}x{m}, got {}x{}", h.nrows(), h.ncols())));
        }
        let err = hermiticity_error(h.as_ref());
        if err > 1e-10 * (1.0 + crate::linalg::frobenius_norm(h.as_ref())) {
            return Err(Error::NotHermitian(err));
        }
        Ok(Self { basis, h, params })
    }

    /// Build from a product-space Hamiltonian.
    pub fn from_full(basis: AntisymBasis, h_full: MatRef<'_, c64>, params: SeaParams) -> Result<Self> {
        let h = basis.restrict(h_full)?;
        Self::new(basis, h, params)
    }

    pub fn basis(&self) -> &AntisymBasis {
        &self.basis
    }

    pub fn hamiltonian(&self) -> MatRef<'_, c64> {
        self.h.as_ref()
    }

    pub fn params(&self) -> &SeaParams {
        &self.params
    }

    pub fn perceived(&self, r: MatRef<'_, c64>, bln: MatRef<'_, c64>, keep: Subsystem) -> Result<PerceivedOperators> {
        let b = &self.basis;
        let rho_reduced = hermitize(b.reduced(r, keep)?.as_ref());
        let other = hermitize(b.reduced(r, keep.other())?.as_ref());
        let w = other.as_ref();
        let id = identity(b.dim());
        Ok(PerceivedOperators {
            rho_reduced,
            bln: hermitize(b.perceive(bln, w, keep)?.as_ref()),
            c1: hermitize(b.perceive(id.as_ref(), w, keep)?.as_ref()),
            c2: hermitize(b.perceive(self.h.as_ref(), w, keep)?.as_ref()),
        })
    }

    /// Dissipative part at `r`; `eig` may carry a precomputed
    /// eigendecomposition of `r`.
    pub fn evaluate(&self, r: MatRef<'_, c64>, eig: Option<&HermitianEigen>) -> Result<SeaEvaluation> {
        let m = self.basis.dim();
        if r.nrows() != m || r.ncols() != m {
            return Err(Error::Shape(format!("state must be {m}x{m}, got {}x{}", r.nrows(), r.ncols())));
        }
        let owned;
        let eig = match eig {
            Some(e) => e,
            None => {
                owned = HermitianEigen::new(hermitize(r).as_ref())?;
                &owned
            }
        };
        let bln = b_ln_from_eigen(eig, self.params.cutoff_eig);
        let mut terms: Vec<DissipatorTerm> = Vec::with_capacity(2);
        let mut reduced = Vec::with_capacity(2);
        for keep in [Subsystem::A, Subsystem::B] {
            let ops = self.perceived(r, bln.as_ref(), keep)?;
            terms.push(dissipator_term(&ops, self.params.tau(keep), self.params.cutoff_gram));
            reduced.push(ops.rho_reduced);
        }
        let b = &self.basis;
        let mut total = b.restrict_product(terms[0].anticommutator.as_ref(), reduced[1].as_ref())?;
        total += b.restrict_product(reduced[0].as_ref(), terms[1].anticommutator.as_ref())?;
        let dissipation = scale(total.as_ref(), c64::new(-1.0, 0.0));
        let entropy_production = terms.iter().map(|t| t.entropy_production).sum();
        let degenerate = terms.iter().filter(|t| t.multipliers.degenerate).count();
        let [a, b]: [DissipatorTerm; 2] = terms.try_into().expect("two subsystems");
        Ok(SeaEvaluation { dissipation, terms: [a, b], entropy_production, degenerate })
    }

    pub fn rhs(&self, r: MatRef<'_, c64>) -> Result<CMat> {
        let eval = self.evaluate(r, None)?;
        let mut out = unitary_rhs(r, self.h.as_ref());
        out += eval.dissipation;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ring_graph;
    use crate::hamiltonian::{project_antisym, total_hamiltonian, InteractionParams};
    use crate::hilbert::antisym_projector;
    use crate::linalg::max_abs_diff;
    use crate::sea::testing::{gibbs, random_density};
    use crate::sea::{CompositeSea, ConstraintMode};
    use crate::state::{perturbed_initial_state, perturbed_initial_state_restricted, InitialStateSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn engines(n: usize, alphas: [f64; 4], params: SeaParams) -> (AntisymSea, CompositeSea) {
        let g = ring_graph(n).unwrap();
        let h = total_hamiltonian(&InteractionParams::new(n, alphas), &g).unwrap();
        let h_a = project_antisym(h.as_ref(), antisym_projector(n).as_ref()).unwrap();
        let basis = AntisymBasis::new(n).unwrap();
        let fast = AntisymSea::from_full(basis, h.as_ref(), params).unwrap();
        let full = CompositeSea::new(h_a.as_ref(), params, ConstraintMode::Antisymmetric).unwrap();
        (fast, full)
    }

    #[test]
    fn matches_full_space_engine_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let params = SeaParams { tau_a: 0.7, tau_b: 1.4, ..Default::default() };
        for (n, alphas) in [(4, [1.0, 0.5, 0.5, 1.0]), (5, [10.0; 4]), (6, [0.0; 4])] {
            let (fast, full) = engines(n, alphas, params);
            let r = random_density(&mut rng, fast.basis().dim());
            let rho = fast.basis().embed(r.as_ref()).unwrap();
            let a = fast.evaluate(r.as_ref(), None).unwrap();
            let b = full.evaluate(rho.as_ref(), None).unwrap();
            let lifted = fast.basis().embed(a.dissipation.as_ref()).unwrap();
            assert!(max_abs_diff(lifted.as_ref(), b.dissipation.as_ref()) < 1e-12);
            assert!((a.entropy_production - b.entropy_production).abs() < 1e-12);
            for (x, y) in a.terms.iter().zip(&b.terms) {
                assert!(max_abs_diff(x.anticommutator.as_ref(), y.anticommutator.as_ref()) < 1e-12);
                assert!((x.multipliers.beta1 - y.multipliers.beta1).abs() < 1e-9);
                assert!((x.multipliers.beta2 - y.multipliers.beta2).abs() < 1e-9);
            }
            let rhs_fast = fast.basis().embed(fast.rhs(r.as_ref()).unwrap().as_ref()).unwrap();
            let rhs_full = full.rhs(rho.as_ref()).unwrap();
            assert!(max_abs_diff(rhs_fast.as_ref(), rhs_full.as_ref()) < 1e-11);
        }
    }

    #[test]
    fn matches_full_space_engine_on_default_state() {
        let n = 11;
        let (fast, full) = engines(n, [10.0; 4], SeaParams::default());
        let spec = InitialStateSpec::default();
        let r = perturbed_initial_state_restricted(&spec, fast.basis()).unwrap();
        let rho = perturbed_initial_state(&spec, n).unwrap();
        let a = fast.evaluate(r.as_ref(), None).unwrap();
        let b = full.evaluate(rho.as_ref(), None).unwrap();
        let lifted = fast.basis().embed(a.dissipation.as_ref()).unwrap();
        assert!(max_abs_diff(lifted.as_ref(), b.dissipation.as_ref()) < 1e-12);
        assert!((a.entropy_production - b.entropy_production).abs() < 1e-10);
    }

    #[test]
    fn gibbs_state_is_stationary() {
        // Weak coupling keeps every Gibbs weight well above the kernel cutoff.
        let (fast, _) = engines(5, [0.2; 4], SeaParams::default());
        for beta in [0.1, 1.0, 2.0] {
            let r = gibbs(fast.hamiltonian(), beta);
            let rhs = fast.rhs(r.as_ref()).unwrap();
            let eig = HermitianEigen::new(r.as_ref()).unwrap();
            assert!(eig.min() > 1e-10);
            assert!(crate::linalg::frobenius_norm(rhs.as_ref()) <= 1e-8);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let basis = AntisymBasis::new(4).unwrap();
        assert!(AntisymSea::new(basis.clone(), identity(5), SeaParams::default()).is_err());
        let sea = AntisymSea::new(basis, identity(6), SeaParams::default()).unwrap();
        assert!(sea.evaluate(identity(5).as_ref(), None).is_err());
    }
}
