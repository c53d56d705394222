//! Walker observables: joint probabilities, MSD, Loschmidt echo, entropies.
//!
//! Functions taking `rho` expect a product-space state (`N² × N²`); the
//! `*_antisym` variants take the `M × M` state of the antisymmetric basis.

use faer::{c64, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{partial_trace, AntisymBasis, Subsystem};
use crate::linalg::{hermitize, trace_product, HermitianEigen};

/// Joint detection probabilities `P(m, n)` at one time, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JpdSnapshot {
    pub time: f64,
    pub n: usize,
    pub values: Vec<f64>,
}

impl JpdSnapshot {
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.values[m * self.n + n]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Row sums, i.e. the distribution of walker A.
    pub fn row_sums(&self) -> Vec<f64> {
        self.values.chunks(self.n).map(|row| row.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n).map(|c| (0..self.n).map(|r| self.get(r, c)).sum()).collect()
    }

    /// `(m, n, p)` triples in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values.iter().enumerate().map(move |(k, &p)| (k / self.n, k % self.n, p))
    }
}

/// One sampled row of the observable time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow {
    pub t_over_tau: f64,
    pub msd: f64,
    pub loschmidt: f64,
    pub entropy_total: f64,
    pub entropy_a: f64,
    pub entropy_b: f64,
    pub mutual_info: f64,
    pub trace_err: f64,
    pub leakage: f64,
    pub energy_drift: f64,
    pub ep_rate: f64,
}

impl ObservableRow {
    pub const COLUMNS: [&'static str; 11] = [
        "t_over_tau",
        "msd",
        "loschmidt",
        "entropy_total",
        "entropy_a",
        "entropy_b",
        "mutual_info",
        "trace_err",
        "leakage",
        "energy_drift",
        "ep_rate",
    ];

    pub fn values(&self) -> [f64; 11] {
        [
            self.t_over_tau,
            self.msd,
            self.loschmidt,
            self.entropy_total,
            self.entropy_a,
            self.entropy_b,
            self.mutual_info,
            self.trace_err,
            self.leakage,
            self.energy_drift,
            self.ep_rate,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

fn walker_count(rho: MatRef<'_, c64>) -> Result<usize> {
    let d = rho.nrows();
    let n = (d as f64).sqrt().round() as usize;
    if rho.ncols() != d || n * n != d {
        return Err(Error::Shape(format!("expected an N²×N² state, got {}x{}", rho.nrows(), rho.ncols())));
    }
    Ok(n)
}

/// `P(m, n) = ⟨mn|ρ|mn⟩`
pub fn joint_probability(rho: MatRef<'_, c64>, time: f64) -> Result<JpdSnapshot> {
    let n = walker_count(rho)?;
    let values = (0..n * n).map(|k| rho[(k, k)].re).collect();
    Ok(JpdSnapshot { time, n, values })
}

/// Joint probabilities of an `M × M` antisymmetric state.
pub fn joint_probability_antisym(r: MatRef<'_, c64>, basis: &AntisymBasis, time: f64) -> Result<JpdSnapshot> {
    check_small(r, basis)?;
    let n = basis.n();
    let mut values = vec![0.0; n * n];
    for (k, &(i, j)) in basis.pairs().iter().enumerate() {
        let p = 0.5 * r[(k, k)].re;
        values[i * n + j] = p;
        values[j * n + i] = p;
    }
    Ok(JpdSnapshot { time, n, values })
}

fn check_small(r: MatRef<'_, c64>, basis: &AntisymBasis) -> Result<()> {
    let m = basis.dim();
    if r.nrows() != m || r.ncols() != m {
        return Err(Error::Shape(format!("expected a {m}x{m} state, got {}x{}", r.nrows(), r.ncols())));
    }
    Ok(())
}

/// Site distribution of one walker: the diagonal of its reduced state.
pub fn marginal(rho: MatRef<'_, c64>, keep: Subsystem) -> Result<Vec<f64>> {
    let n = walker_count(rho)?;
    let reduced = partial_trace(rho, (n, n), keep)?;
    Ok((0..n).map(|i| reduced[(i, i)].re).collect())
}

pub fn marginal_antisym(r: MatRef<'_, c64>, basis: &AntisymBasis, keep: Subsystem) -> Result<Vec<f64>> {
    let reduced = basis.reduced(r, keep)?;
    Ok((0..basis.n()).map(|i| reduced[(i, i)].re).collect())
}

/// `(1/N) Σ_{m,n} (m − n)² P(m, n)` with plain (non-periodic) distance.
pub fn msd(jpd: &JpdSnapshot) -> f64 {
    let sum: f64 = jpd.entries().map(|(m, n, p)| ((m as f64) - (n as f64)).powi(2) * p).sum();
    sum / jpd.n as f64
}

/// `Tr(ρ₀ ρ_t)`
pub fn loschmidt_echo(rho0: MatRef<'_, c64>, rho: MatRef<'_, c64>) -> Result<f64> {
    if rho0.shape() != rho.shape() {
        return Err(Error::Shape(format!(
            "states differ in shape: {}x{} vs {}x{}",
            rho0.nrows(),
            rho0.ncols(),
            rho.nrows(),
            rho.ncols()
        )));
    }
    Ok(trace_product(rho0, rho).re)
}

pub fn purity(rho: MatRef<'_, c64>) -> f64 {
    trace_product(rho, rho).re
}

/// `−Σ λ ln λ` over eigenvalues above `cutoff`.
pub fn entropy_from_spectrum(values: &[f64], cutoff: f64) -> f64 {
    values.iter().filter(|&&l| l > cutoff).map(|&l| -l * l.ln()).sum()
}

pub fn von_neumann_entropy(rho: MatRef<'_, c64>, cutoff: f64) -> Result<f64> {
    let eig = HermitianEigen::new(hermitize(rho).as_ref())?;
    Ok(entropy_from_spectrum(&eig.values, cutoff))
}

/// Entropies of the whole state and of each walker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyBreakdown {
    pub total: f64,
    pub a: f64,
    pub b: f64,
}

impl EntropyBreakdown {
    /// `S(ρ_A) + S(ρ_B) − S(ρ)`
    pub fn mutual_information(&self) -> f64 {
        self.a + self.b - self.total
    }
}

pub fn entropies(rho: MatRef<'_, c64>, cutoff: f64) -> Result<EntropyBreakdown> {
    let n = walker_count(rho)?;
    let total = von_neumann_entropy(rho, cutoff)?;
    let a = von_neumann_entropy(partial_trace(rho, (n, n), Subsystem::A)?.as_ref(), cutoff)?;
    let b = von_neumann_entropy(partial_trace(rho, (n, n), Subsystem::B)?.as_ref(), cutoff)?;
    Ok(EntropyBreakdown { total, a, b })
}

/// Entropies from an `M × M` state; `eig` may carry its spectrum.
pub fn entropies_antisym(
    r: MatRef<'_, c64>,
    basis: &AntisymBasis,
    eig: Option<&HermitianEigen>,
    cutoff: f64,
) -> Result<EntropyBreakdown> {
    check_small(r, basis)?;
    let total = match eig {
        Some(e) => entropy_from_spectrum(&e.values, cutoff),
        None => von_neumann_entropy(r, cutoff)?,
    };
    let a = von_neumann_entropy(basis.reduced(r, Subsystem::A)?.as_ref(), cutoff)?;
    let b = von_neumann_entropy(basis.reduced(r, Subsystem::B)?.as_ref(), cutoff)?;
    Ok(EntropyBreakdown { total, a, b })
}

pub fn mutual_information(rho: MatRef<'_, c64>, cutoff: f64) -> Result<f64> {
    Ok(entropies(rho, cutoff)?.mutual_information())
}

/// Centred running mean; the window shrinks symmetrically at the edges.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidParameter("moving-average window must be ≥ 1".into()));
    }
    let len = series.len();
    if window >= len {
        let mean = series.iter().sum::<f64>() / len.max(1) as f64;
        return Ok(vec![mean; len]);
    }
    let before = (window - 1) / 2;
    let after = window - 1 - before;
    Ok((0..len)
        .map(|i| {
            let reach = before.min(after).min(i).min(len - 1 - i);
            let (lo, hi) = if reach < before.min(after) {
                (i - reach, i + reach)
            } else {
                (i.saturating_sub(before), (i + after).min(len - 1))
            };
            series[lo..=hi].iter().sum::<f64>() / (hi + 1 - lo) as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::kron;
    use crate::linalg::{adjoint, diagonal, matmul, real, trace, unitary_propagator};
    use crate::sea::testing::{random_antisym_density, random_density, random_hermitian};
    use crate::state::{
        maximally_mixed_antisym, perturbed_initial_state, perturbed_initial_state_restricted, pure_density,
        singlet_state, InitialStateSpec,
    };
    use faer::Mat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn singlet(n: usize) -> faer::Mat<c64> {
        pure_density(&singlet_state(n / 2, n / 2 + 1, n).unwrap())
    }

    #[test]
    fn singlet_jpd_has_two_peaks() {
        let jpd = joint_probability(singlet(11).as_ref(), 0.0).unwrap();
        for (m, n, p) in jpd.entries() {
            let want = if (m, n) == (5, 6) || (m, n) == (6, 5) { 0.5 } else { 0.0 };
            assert!((p - want).abs() < 1e-15);
        }
        assert!((jpd.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singlet_msd_is_one_over_n() {
        let jpd = joint_probability(singlet(11).as_ref(), 0.0).unwrap();
        assert!((msd(&jpd) - 1.0 / 11.0).abs() < 1e-16);
        let spec = InitialStateSpec { epsilon: 1.0, ..Default::default() };
        let basis = AntisymBasis::new(11).unwrap();
        let r = perturbed_initial_state_restricted(&spec, &basis).unwrap();
        assert_eq!(msd(&joint_probability_antisym(r.as_ref(), &basis, 0.0).unwrap()), 1.0 / 11.0);
    }

    #[test]
    fn uniform_off_diagonal_msd() {
        let n = 3;
        let values = (0..9).map(|k| if k / 3 == k % 3 { 0.0 } else { 1.0 / 6.0 }).collect();
        let jpd = JpdSnapshot { time: 0.0, n, values };
        assert!((msd(&jpd) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn msd_is_relabeling_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let rho = random_density(&mut rng, 16);
        let jpd = joint_probability(rho.as_ref(), 0.0).unwrap();
        let n = jpd.n;
        let swapped = JpdSnapshot { values: (0..n * n).map(|k| jpd.get(k % n, k / n)).collect(), ..jpd.clone() };
        assert!((msd(&jpd) - msd(&swapped)).abs() < 1e-15);
    }

    #[test]
    fn default_state_jpd_peaks() {
        let rho = perturbed_initial_state(&InitialStateSpec::default(), 11).unwrap();
        let jpd = joint_probability(rho.as_ref(), 0.0).unwrap();
        let want = 0.95 / 2.0 + 0.05 / 110.0;
        assert!((jpd.get(5, 6) - want).abs() < 1e-15);
        assert!((jpd.get(6, 5) - want).abs() < 1e-15);
        assert!((jpd.get(5, 6) - 0.475455).abs() < 1e-6);
        for m in 0..11 {
            assert_eq!(jpd.get(m, m), 0.0);
        }
    }

    #[test]
    fn antisym_jpd_matches_full() {
        let n = 6;
        let basis = AntisymBasis::new(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let r = random_density(&mut rng, basis.dim());
        let full = basis.embed(r.as_ref()).unwrap();
        let a = joint_probability(full.as_ref(), 1.5).unwrap();
        let b = joint_probability_antisym(r.as_ref(), &basis, 1.5).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-15);
        }
        let ma = marginal(full.as_ref(), Subsystem::A).unwrap();
        let mb = marginal_antisym(r.as_ref(), &basis, Subsystem::A).unwrap();
        for (x, y) in ma.iter().zip(&mb) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn marginals_are_jpd_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let rho = random_density(&mut rng, 25);
        let jpd = joint_probability(rho.as_ref(), 0.0).unwrap();
        let pa = marginal(rho.as_ref(), Subsystem::A).unwrap();
        let pb = marginal(rho.as_ref(), Subsystem::B).unwrap();
        for (x, y) in pa.iter().zip(jpd.row_sums()) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in pb.iter().zip(jpd.column_sums()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((pa.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let s = marginal(singlet(11).as_ref(), Subsystem::A).unwrap();
        assert!((s[5] - 0.5).abs() < 1e-15 && (s[6] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn loschmidt_echo_at_time_zero() {
        let pure = singlet(5);
        assert!((loschmidt_echo(pure.as_ref(), pure.as_ref()).unwrap() - 1.0).abs() < 1e-15);
        let mixed = maximally_mixed_antisym(5).unwrap();
        let echo = loschmidt_echo(mixed.as_ref(), mixed.as_ref()).unwrap();
        assert!((echo - 0.1).abs() < 1e-14);
        assert!((echo - purity(mixed.as_ref())).abs() < 1e-15);
        assert!(loschmidt_echo(pure.as_ref(), faer::Mat::<c64>::zeros(4, 4).as_ref()).is_err());
    }

    #[test]
    fn loschmidt_echo_is_constant_for_commuting_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let h = random_hermitian(&mut rng, 6);
        let eig = HermitianEigen::new(h.as_ref()).unwrap();
        let weights = [0.3, 0.25, 0.2, 0.15, 0.07, 0.03];
        let rho0 = eig.map_complex(|_| real(0.0));
        let rho0 = {
            let mut acc = rho0;
            for (k, w) in weights.iter().enumerate() {
                let v = eig.vectors.col(k);
                acc += Mat::from_fn(6, 6, |i, j| v[i] * v[j].conj() * *w);
            }
            acc
        };
        let e0 = loschmidt_echo(rho0.as_ref(), rho0.as_ref()).unwrap();
        for t in [0.5, 2.0, 7.0] {
            let u = unitary_propagator(h.as_ref(), t).unwrap();
            let rt = matmul(matmul(u.as_ref(), rho0.as_ref()).as_ref(), adjoint(u.as_ref()).as_ref());
            assert!((loschmidt_echo(rho0.as_ref(), rt.as_ref()).unwrap() - e0).abs() < 1e-12);
        }
        assert!(e0 < 1.0);
    }

    #[test]
    fn entropy_reference_values() {
        assert!(von_neumann_entropy(singlet(5).as_ref(), 1e-12).unwrap().abs() < 1e-12);
        let mixed = maximally_mixed_antisym(11).unwrap();
        assert!((von_neumann_entropy(mixed.as_ref(), 1e-12).unwrap() - 55f64.ln()).abs() < 1e-10);
        let basis = AntisymBasis::new(11).unwrap();
        let r0 = perturbed_initial_state_restricted(&InitialStateSpec::default(), &basis).unwrap();
        let (top, low): (f64, f64) = (0.95 + 0.05 / 55.0, 0.05 / 55.0);
        let oracle = -top * top.ln() - 54.0 * low * low.ln();
        assert!((von_neumann_entropy(r0.as_ref(), 1e-12).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 0.3917).abs() < 1e-3);
    }

    #[test]
    fn singlet_mutual_information() {
        let mi = mutual_information(singlet(11).as_ref(), 1e-12).unwrap();
        assert!((mi - 2.0 * 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn product_state_has_no_mutual_information() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let a = random_density(&mut rng, 4);
        let b = random_density(&mut rng, 4);
        let rho = kron(a.as_ref(), b.as_ref());
        assert!(mutual_information(rho.as_ref(), 1e-12).unwrap().abs() < 1e-10);
    }

    #[test]
    fn default_state_mutual_information_matches_independent_sum() {
        let n = 11;
        let rho = perturbed_initial_state(&InitialStateSpec::default(), n).unwrap();
        let basis = AntisymBasis::new(n).unwrap();
        let r = basis.restrict(rho.as_ref()).unwrap();
        let e = entropies_antisym(r.as_ref(), &basis, None, 1e-12).unwrap();
        // Both reduced states are diagonal.
        let p_a = marginal(rho.as_ref(), Subsystem::A).unwrap();
        let s_a: f64 = p_a.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
        let reduced = partial_trace(rho.as_ref(), (n, n), Subsystem::A).unwrap();
        assert!(crate::linalg::hermiticity_error(reduced.as_ref()) < 1e-15);
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| reduced[(i, j)].norm())
            .sum();
        assert!(off < 1e-15);
        assert!((e.a - s_a).abs() < 1e-12);
        assert!((e.b - s_a).abs() < 1e-12);
        let full = entropies(rho.as_ref(), 1e-12).unwrap();
        assert!((e.mutual_information() - full.mutual_information()).abs() < 1e-10);
        assert!(e.mutual_information() > 0.0);
    }

    #[test]
    fn moving_average_examples() {
        assert_eq!(moving_average(&[2.0; 7], 3).unwrap(), vec![2.0; 7]);
        let xs = [1.0, 4.0, 2.0, 8.0, 5.0];
        assert_eq!(moving_average(&xs, 1).unwrap(), xs.to_vec());
        assert_eq!(moving_average(&xs, 5).unwrap(), vec![4.0; 5]);
        assert_eq!(moving_average(&xs, 9).unwrap(), vec![4.0; 5]);
        assert_eq!(moving_average(&xs, 3).unwrap(), vec![1.0, 7.0 / 3.0, 14.0 / 3.0, 5.0, 5.0]);
        assert!(moving_average(&xs, 0).is_err());
        assert!(moving_average(&[], 3).unwrap().is_empty());
    }

    #[test]
    fn observable_row_columns_line_up() {
        let row = ObservableRow {
            t_over_tau: 0.0,
            msd: 1.0,
            loschmidt: 2.0,
            entropy_total: 3.0,
            entropy_a: 4.0,
            entropy_b: 5.0,
            mutual_info: 6.0,
            trace_err: 7.0,
            leakage: 8.0,
            energy_drift: 9.0,
            ep_rate: 10.0,
        };
        assert_eq!(row.values(), [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
        let json = serde_json::to_value(row).unwrap();
        for (k, name) in ObservableRow::COLUMNS.iter().enumerate() {
            assert_eq!(json[name].as_f64().unwrap(), k as f64);
        }
        assert!(row.is_finite());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn antisym_states_have_symmetric_jpd_and_nonnegative_mi(seed in any::<u64>(), n in 3usize..=5) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rho = random_antisym_density(&mut rng, &AntisymBasis::new(n).unwrap());
                let jpd = joint_probability(rho.as_ref(), 0.0).unwrap();
                prop_assert!((jpd.total() - 1.0).abs() < 1e-10);
                for (m, k, p) in jpd.entries() {
                    prop_assert!(p >= -1e-12);
                    prop_assert!((p - jpd.get(k, m)).abs() < 1e-12);
                }
                prop_assert!(mutual_information(rho.as_ref(), 1e-12).unwrap() >= -1e-8);
                let s = von_neumann_entropy(rho.as_ref(), 1e-12).unwrap();
                prop_assert!(s >= 0.0 && s <= ((n * (n - 1) / 2) as f64).ln() + 1e-10);
            }

            #[test]
            fn moving_average_preserves_length_and_bounds(
                xs in proptest::collection::vec(-10.0f64..10.0, 1..60),
                w in 1usize..80,
            ) {
                let ys = moving_average(&xs, w).unwrap();
                prop_assert_eq!(ys.len(), xs.len());
                let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                for y in ys {
                    prop_assert!(y >= lo - 1e-9 && y <= hi + 1e-9);
                }
            }

            #[test]
            fn diagonal_state_entropy(ws in proptest::collection::vec(0.01f64..1.0, 2..8)) {
                let total: f64 = ws.iter().sum();
                let p: Vec<f64> = ws.iter().map(|w| w / total).collect();
                let rho = diagonal(&p);
                let s = von_neumann_entropy(rho.as_ref(), 1e-12).unwrap();
                let want: f64 = p.iter().map(|x| -x * x.ln()).sum();
                prop_assert!((s - want).abs() < 1e-12);
                prop_assert!((trace(rho.as_ref()).re - 1.0).abs() < 1e-12);
            }
        }
    }
}
