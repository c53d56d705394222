//! Fixed-step time integration with physical guards.
//!
//! Two schemes are available. [`Scheme::Rk4`] is classical Runge–Kutta on the
//! full right-hand side. [`Scheme::Rk4Ip`] (the default) treats `−i[H, ρ]`
//! exactly through `exp(−iH dt/2)` and applies RK4 to the dissipative part
//! in the interaction picture; for purely unitary dynamics it is exact.
//!
//! After every step the state is hermitized, projected (if the dynamics has
//! a projector), small negative eigenvalues are clipped and the trace is
//! renormalized.

use faer::{c64, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    add_scaled, adjoint, distance, hermiticity_error, hermitize, matmul, trace, trace_product, unitary_propagator,
    CMat, HermitianEigen,
};
use crate::sea::{unitary_rhs, CompositeSea, SeaEvaluation};
use crate::subspace::AntisymSea;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rk4,
    #[default]
    Rk4ip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Largest allowed `|Tr ρ − 1|` before renormalization.
    pub trace: f64,
    /// Eigenvalues in `[−positivity, 0)` are clipped; below that the run aborts.
    pub positivity: f64,
    pub leakage: f64,
    pub hermiticity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { trace: 1e-8, positivity: 1e-8, leakage: 1e-6, hermiticity: 1e-10 }
    }
}

/// Time stepping parameters, in the same time unit as the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_max: f64,
    pub stride: usize,
    pub scheme: Scheme,
    pub tolerances: Tolerances,
    /// Compare each step with two half steps and abort if they differ by
    /// more than this.
    pub step_doubling: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_max: 30.0,
            stride: 100,
            scheme: Scheme::default(),
            tolerances: Tolerances::default(),
            step_doubling: None,
        }
    }
}

impl IntegratorConfig {
    /// Number of steps; `t_max` must be a whole number of steps.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be finite and > 0, got {}", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(Error::InvalidParameter(format!("t_max must be finite and ≥ 0, got {}", self.t_max)));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be ≥ 1".into()));
        }
        let steps = (self.t_max / self.dt).round();
        if (steps * self.dt - self.t_max).abs() > 1e-9 * self.t_max.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "t_max = {} is not a whole number of steps of dt = {}",
                self.t_max, self.dt
            )));
        }
        Ok(steps as usize)
    }

    /// Number of samples `evolve` will record.
    pub fn n_samples(&self) -> Result<usize> {
        let n = self.n_steps()?;
        Ok(n / self.stride + 1 + usize::from(n % self.stride != 0))
    }
}

/// Something that can be time-stepped: a Hamiltonian plus an optional
/// dissipative part.
pub trait Dynamics {
    fn hamiltonian(&self) -> MatRef<'_, c64>;

    /// Projector applied by the guard, if the state lives in a larger space.
    fn projector(&self) -> Option<MatRef<'_, c64>> {
        None
    }

    /// Dissipative part at `rho`, or `None` for unitary dynamics.
    fn dissipation(&self, rho: MatRef<'_, c64>, eig: Option<&HermitianEigen>) -> Result<Option<SeaEvaluation>>;
}

/// `dρ/dt = −i[H, ρ]`
#[derive(Debug, Clone)]
pub struct Unitary {
    h: CMat,
    projector: Option<CMat>,
}

impl Unitary {
    pub fn new(h: CMat) -> Self {
        Self { h, projector: None }
    }

    pub fn with_projector(h: CMat, projector: CMat) -> Self {
        Self { h, projector: Some(projector) }
    }
}

impl Dynamics for Unitary {
    fn hamiltonian(&self) -> MatRef<'_, c64> {
        self.h.as_ref()
    }

    fn projector(&self) -> Option<MatRef<'_, c64>> {
        self.projector.as_ref().map(|p| p.as_ref())
    }

    fn dissipation(&self, _: MatRef<'_, c64>, _: Option<&HermitianEigen>) -> Result<Option<SeaEvaluation>> {
        Ok(None)
    }
}

impl Dynamics for CompositeSea {
    fn hamiltonian(&self) -> MatRef<'_, c64> {
        CompositeSea::hamiltonian(self)
    }

    fn projector(&self) -> Option<MatRef<'_, c64>> {
        CompositeSea::projector(self)
    }

    fn dissipation(&self, rho: MatRef<'_, c64>, eig: Option<&HermitianEigen>) -> Result<Option<SeaEvaluation>> {
        self.evaluate(rho, eig).map(Some)
    }
}

impl Dynamics for AntisymSea {
    fn hamiltonian(&self) -> MatRef<'_, c64> {
        AntisymSea::hamiltonian(self)
    }

    fn dissipation(&self, rho: MatRef<'_, c64>, eig: Option<&HermitianEigen>) -> Result<Option<SeaEvaluation>> {
        self.evaluate(rho, eig).map(Some)
    }
}

/// Classical RK4 step for `dρ/dt = f(ρ)`.
pub fn rk4_step(mut f: impl FnMut(MatRef<'_, c64>) -> Result<CMat>, rho: MatRef<'_, c64>, dt: f64) -> Result<CMat> {
    let k1 = f(rho)?;
    let mut y = rho.to_owned();
    add_scaled(&mut y, 0.5 * dt, k1.as_ref());
    let k2 = f(y.as_ref())?;
    let mut y = rho.to_owned();
    add_scaled(&mut y, 0.5 * dt, k2.as_ref());
    let k3 = f(y.as_ref())?;
    let mut y = rho.to_owned();
    add_scaled(&mut y, dt, k3.as_ref());
    let k4 = f(y.as_ref())?;
    let mut out = rho.to_owned();
    add_scaled(&mut out, dt / 6.0, k1.as_ref());
    add_scaled(&mut out, dt / 3.0, k2.as_ref());
    add_scaled(&mut out, dt / 3.0, k3.as_ref());
    add_scaled(&mut out, dt / 6.0, k4.as_ref());
    Ok(out)
}

/// `U X U†`
fn conjugate(u: MatRef<'_, c64>, u_adj: MatRef<'_, c64>, x: MatRef<'_, c64>) -> CMat {
    matmul(matmul(u, x).as_ref(), u_adj)
}

/// Interaction-picture RK4 step. `u_half = exp(−iH dt/2)`, `n` is the
/// dissipative part and `n0` optionally its value at `rho`.
pub fn rk4ip_step(
    u_half: MatRef<'_, c64>,
    mut n: impl FnMut(MatRef<'_, c64>) -> Result<Option<CMat>>,
    n0: Option<CMat>,
    rho: MatRef<'_, c64>,
    dt: f64,
) -> Result<CMat> {
    let u_adj = adjoint(u_half);
    let half = |x: MatRef<'_, c64>| conjugate(u_half, u_adj.as_ref(), x);
    let rho_i = half(rho);
    let k1 = match n0 {
        Some(v) => v,
        None => match n(rho)? {
            Some(v) => v,
            None => return Ok(half(rho_i.as_ref())),
        },
    };
    let k1 = half(k1.as_ref());
    let stage = |k: &CMat, s: f64| {
        let mut y = rho_i.clone();
        add_scaled(&mut y, s, k.as_ref());
        y
    };
    let zero_if_none = |v: Option<CMat>| v.unwrap_or_else(|| CMat::zeros(rho.nrows(), rho.ncols()));
    let k2 = zero_if_none(n(stage(&k1, 0.5 * dt).as_ref())?);
    let k3 = zero_if_none(n(stage(&k2, 0.5 * dt).as_ref())?);
    let k4 = zero_if_none(n(half(stage(&k3, dt).as_ref()).as_ref())?);
    let mut acc = rho_i.clone();
    add_scaled(&mut acc, dt / 6.0, k1.as_ref());
    add_scaled(&mut acc, dt / 3.0, k2.as_ref());
    add_scaled(&mut acc, dt / 3.0, k3.as_ref());
    let mut out = half(acc.as_ref());
    add_scaled(&mut out, dt / 6.0, k4.as_ref());
    Ok(out)
}

/// Per-step health of the state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// `|Tr ρ − 1|` before renormalization.
    pub trace_error: f64,
    /// `‖ρ − ρ†‖_F` before hermitization.
    pub hermiticity_error: f64,
    /// `‖ρ − P ρ P‖_F` before projection.
    pub leakage: f64,
    pub min_eigenvalue: f64,
    /// `Tr(ρ H) − Tr(ρ_0 H)`
    pub energy_drift: f64,
    /// Subsystems skipped for a singular Gram matrix during this step.
    pub gram_degenerate_count: usize,
    pub clipped: bool,
}

/// A guarded state and its eigendecomposition.
#[derive(Debug, Clone)]
pub struct Guarded {
    pub rho: CMat,
    pub eig: HermitianEigen,
    pub diagnostics: StepDiagnostics,
}

fn check_finite(rho: MatRef<'_, c64>) -> Result<()> {
    for j in 0..rho.ncols() {
        for i in 0..rho.nrows() {
            let v = rho[(i, j)];
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite(format!("state entry ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Hermitize, project, clip tiny negative eigenvalues and renormalize.
pub fn guard(rho: MatRef<'_, c64>, projector: Option<MatRef<'_, c64>>, tol: &Tolerances) -> Result<Guarded> {
    check_finite(rho)?;
    let mut d = StepDiagnostics { hermiticity_error: hermiticity_error(rho), ..Default::default() };
    let mut x = hermitize(rho);
    if let Some(p) = projector {
        let projected = hermitize(matmul(matmul(p, x.as_ref()).as_ref(), p).as_ref());
        d.leakage = distance(x.as_ref(), projected.as_ref());
        x = projected;
    }
    d.trace_error = (trace(x.as_ref()) - c64::new(1.0, 0.0)).norm();
    let mut eig = HermitianEigen::new(x.as_ref())?;
    d.min_eigenvalue = eig.min();
    if d.min_eigenvalue < -tol.positivity {
        return Err(Error::PositivityViolated { min_eigenvalue: d.min_eigenvalue, tolerance: tol.positivity });
    }
    if d.min_eigenvalue < 0.0 {
        for v in &mut eig.values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        d.clipped = true;
    }
    let total: f64 = eig.values.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Numerical(format!("state has trace {total}")));
    }
    for v in &mut eig.values {
        *v /= total;
    }
    let rho = if d.clipped {
        eig.map(|l| l)
    } else {
        let tr = trace(x.as_ref()).re;
        crate::linalg::scale(x.as_ref(), c64::new(1.0 / tr, 0.0))
    };
    Ok(Guarded { rho, eig, diagnostics: d })
}

/// One time step of a [`Dynamics`], carrying the precomputed propagator.
pub struct Stepper<'a, D: Dynamics + ?Sized> {
    dynamics: &'a D,
    dt: f64,
    scheme: Scheme,
    u_half: Option<CMat>,
}

/// Output of [`Stepper::step`].
#[derive(Debug, Clone)]
pub struct StepResult {
    pub rho: CMat,
    /// Degenerate Gram events at the intermediate stages.
    pub degenerate: usize,
}

impl<'a, D: Dynamics + ?Sized> Stepper<'a, D> {
    pub fn new(dynamics: &'a D, dt: f64, scheme: Scheme) -> Result<Self> {
        let u_half = match scheme {
            Scheme::Rk4ip => Some(unitary_propagator(dynamics.hamiltonian(), 0.5 * dt)?),
            Scheme::Rk4 => None,
        };
        Ok(Self { dynamics, dt, scheme, u_half })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance `rho` by one step. `current` is the dissipation already
    /// evaluated at `rho`, if any.
    pub fn step(&self, rho: MatRef<'_, c64>, current: Option<&SeaEvaluation>) -> Result<StepResult> {
        let mut degenerate = 0;
        let h = self.dynamics.hamiltonian();
        let mut nonlinear = |x: MatRef<'_, c64>| -> Result<Option<CMat>> {
            let eval = self.dynamics.dissipation(x, None)?;
            Ok(eval.map(|e| {
                degenerate += e.degenerate;
                e.dissipation
            }))
        };
        let rho = match self.scheme {
            Scheme::Rk4ip => {
                let u = self.u_half.as_ref().expect("propagator").as_ref();
                let n0 = current.map(|e| e.dissipation.clone());
                rk4ip_step(u, &mut nonlinear, n0, rho, self.dt)?
            }
            Scheme::Rk4 => {
                let mut first = current.map(|e| e.dissipation.clone());
                let mut full = |x: MatRef<'_, c64>| -> Result<CMat> {
                    let mut out = unitary_rhs(x, h);
                    let diss = match first.take() {
                        Some(d) => Some(d),
                        None => nonlinear(x)?,
                    };
                    if let Some(d) = diss {
                        out += d;
                    }
                    Ok(out)
                };
                rk4_step(&mut full, rho, self.dt)?
            }
        };
        Ok(StepResult { rho, degenerate })
    }
}

/// What the sampler sees at a sampled step.
pub struct Sample<'a> {
    pub step: usize,
    pub time: f64,
    pub rho: MatRef<'a, c64>,
    pub eig: &'a HermitianEigen,
    pub diagnostics: &'a StepDiagnostics,
    /// `ds/dt` at this state (zero for unitary dynamics).
    pub entropy_production: f64,
}

/// Worst-case diagnostics over a whole run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub max_leakage: f64,
    pub min_eigenvalue: f64,
    pub max_energy_drift: f64,
    pub gram_degenerate_events: usize,
    pub clipped_steps: usize,
    /// Largest step-doubling discrepancy, when enabled.
    pub max_local_error: f64,
}

impl Default for DiagnosticsSummary {
    fn default() -> Self {
        Self {
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
            max_leakage: 0.0,
            min_eigenvalue: f64::INFINITY,
            max_energy_drift: 0.0,
            gram_degenerate_events: 0,
            clipped_steps: 0,
            max_local_error: 0.0,
        }
    }
}

impl DiagnosticsSummary {
    fn absorb(&mut self, d: &StepDiagnostics) {
        self.max_trace_error = self.max_trace_error.max(d.trace_error);
        self.max_hermiticity_error = self.max_hermiticity_error.max(d.hermiticity_error);
        self.max_leakage = self.max_leakage.max(d.leakage);
        self.min_eigenvalue = self.min_eigenvalue.min(d.min_eigenvalue);
        self.max_energy_drift = self.max_energy_drift.max(d.energy_drift.abs());
        self.gram_degenerate_events += d.gram_degenerate_count;
        self.clipped_steps += usize::from(d.clipped);
    }

    /// Tolerance violations, as human-readable messages.
    pub fn violations(&self, tol: &Tolerances) -> Vec<String> {
        let mut out = Vec::new();
        if self.max_trace_error > tol.trace {
            out.push(format!("trace error {:.3e} > {:.1e}", self.max_trace_error, tol.trace));
        }
        if self.max_hermiticity_error > tol.hermiticity {
            out.push(format!("hermiticity error {:.3e} > {:.1e}", self.max_hermiticity_error, tol.hermiticity));
        }
        if self.max_leakage > tol.leakage {
            out.push(format!("leakage {:.3e} > {:.1e}", self.max_leakage, tol.leakage));
        }
        out
    }
}

/// How a run ended.
#[derive(Debug)]
pub enum Outcome {
    Completed,
    Aborted { step: usize, error: Error },
}

impl Outcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, Outcome::Completed)
    }
}

/// Samples collected by [`evolve`] plus run-level diagnostics.
#[derive(Debug)]
pub struct TrajectoryRecord<T> {
    pub samples: Vec<T>,
    pub summary: DiagnosticsSummary,
    pub steps_completed: usize,
    pub final_state: CMat,
    pub outcome: Outcome,
}

/// Integrate from `rho0`, calling `sampler` every `stride` steps and at the
/// final step. Configuration errors are returned as `Err`; failures during
/// the run end it early with [`Outcome::Aborted`].
pub fn evolve<D, T>(
    rho0: MatRef<'_, c64>,
    dynamics: &D,
    cfg: &IntegratorConfig,
    mut sampler: impl FnMut(&Sample<'_>) -> Result<T>,
) -> Result<TrajectoryRecord<T>>
where
    D: Dynamics + ?Sized,
{
    let n_steps = cfg.n_steps()?;
    let h = dynamics.hamiltonian();
    if rho0.shape() != h.shape() {
        return Err(Error::Shape(format!(
            "initial state is {}x{}, Hamiltonian is {}x{}",
            rho0.nrows(),
            rho0.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    let stepper = Stepper::new(dynamics, cfg.dt, cfg.scheme)?;
    let halves = match cfg.step_doubling {
        Some(_) => Some(Stepper::new(dynamics, 0.5 * cfg.dt, cfg.scheme)?),
        None => None,
    };
    let mut current = guard(rho0, dynamics.projector(), &cfg.tolerances)?;
    let e0 = trace_product(current.rho.as_ref(), h).re;
    let mut summary = DiagnosticsSummary::default();
    summary.absorb(&current.diagnostics);
    let mut samples = Vec::with_capacity(cfg.n_samples()?);
    let mut step = 0;
    let outcome = loop {
        let attempt = (|| -> Result<Option<Guarded>> {
            let eval = dynamics.dissipation(current.rho.as_ref(), Some(&current.eig))?;
            if let Some(e) = &eval {
                current.diagnostics.gram_degenerate_count += e.degenerate;
                summary.gram_degenerate_events += e.degenerate;
            }
            if step % cfg.stride == 0 || step == n_steps {
                let sample = Sample {
                    step,
                    time: step as f64 * cfg.dt,
                    rho: current.rho.as_ref(),
                    eig: &current.eig,
                    diagnostics: &current.diagnostics,
                    entropy_production: eval.as_ref().map_or(0.0, |e| e.entropy_production),
                };
                samples.push(sampler(&sample)?);
            }
            if step == n_steps {
                return Ok(None);
            }
            let result = stepper.step(current.rho.as_ref(), eval.as_ref())?;
            let mut next = result.rho;
            if let (Some(threshold), Some(halves)) = (cfg.step_doubling, &halves) {
                let mid = halves.step(current.rho.as_ref(), eval.as_ref())?;
                let fine = halves.step(mid.rho.as_ref(), None)?;
                let err = distance(next.as_ref(), fine.rho.as_ref());
                summary.max_local_error = summary.max_local_error.max(err);
                if err > threshold {
                    return Err(Error::Numerical(format!(
                        "step-doubling error estimate {err:.3e} exceeds {threshold:.1e}"
                    )));
                }
                next = fine.rho;
            }
            let mut guarded = guard(next.as_ref(), dynamics.projector(), &cfg.tolerances)?;
            guarded.diagnostics.energy_drift = trace_product(guarded.rho.as_ref(), h).re - e0;
            guarded.diagnostics.gram_degenerate_count = result.degenerate;
            summary.absorb(&guarded.diagnostics);
            Ok(Some(guarded))
        })();
        match attempt {
            Ok(Some(next)) => {
                current = next;
                step += 1;
            }
            Ok(None) => break Outcome::Completed,
            Err(error) => break Outcome::Aborted { step, error },
        }
    };
    Ok(TrajectoryRecord { samples, summary, steps_completed: step, final_state: current.rho, outcome })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ring_graph;
    use crate::hamiltonian::{total_hamiltonian, InteractionParams};
    use crate::hilbert::{antisym_projector, AntisymBasis};
    use crate::linalg::{diagonal, frobenius_norm, identity, max_abs_diff, real};
    use crate::sea::testing::{random_density, random_hermitian};
    use crate::sea::SeaParams;
    use crate::state::{perturbed_initial_state_restricted, InitialStateSpec};
    use faer::Mat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exact_unitary(h: MatRef<'_, c64>, rho: MatRef<'_, c64>, t: f64) -> CMat {
        let u = unitary_propagator(h, t).unwrap();
        conjugate(u.as_ref(), adjoint(u.as_ref()).as_ref(), rho)
    }

    #[test]
    fn rk4_zero_step_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let h = random_hermitian(&mut rng, 4);
        let rho = random_density(&mut rng, 4);
        let out = rk4_step(|x| Ok(unitary_rhs(x, h.as_ref())), rho.as_ref(), 0.0).unwrap();
        assert_eq!(max_abs_diff(out.as_ref(), rho.as_ref()), 0.0);
    }

    #[test]
    fn rk4_local_error_is_fifth_order() {
        let h = diagonal(&[0.0, 1.0, 2.5, -0.7]);
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let rho = random_density(&mut rng, 4);
        let err = |dt: f64| {
            let step = rk4_step(|x| Ok(unitary_rhs(x, h.as_ref())), rho.as_ref(), dt).unwrap();
            distance(step.as_ref(), exact_unitary(h.as_ref(), rho.as_ref(), dt).as_ref())
        };
        let (e1, e2) = (err(0.02), err(0.01));
        let order = (e1 / e2).log2();
        assert!((order - 5.0).abs() < 0.3, "observed order {order}");
        assert!(err(1e-3) < 1e-12);
    }

    #[test]
    fn rk4_preserves_trace_for_traceless_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let h = random_hermitian(&mut rng, 5);
        let rho = random_density(&mut rng, 5);
        let out = rk4_step(|x| Ok(unitary_rhs(x, h.as_ref())), rho.as_ref(), 1e-3).unwrap();
        assert!((trace(out.as_ref()) - trace(rho.as_ref())).norm() <= 1e-13);
    }

    #[test]
    fn rk4ip_is_exact_without_dissipation() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let h = random_hermitian(&mut rng, 5);
        let rho = random_density(&mut rng, 5);
        let u = unitary_propagator(h.as_ref(), 0.05).unwrap();
        let out = rk4ip_step(u.as_ref(), |_| Ok(None), None, rho.as_ref(), 0.1).unwrap();
        let want = exact_unitary(h.as_ref(), rho.as_ref(), 0.1);
        assert!(max_abs_diff(out.as_ref(), want.as_ref()) < 1e-14);
    }

    #[test]
    fn rk4ip_converges_at_fourth_order_with_dissipation() {
        // Linear damping towards I/d keeps the reference solution closed form.
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        let d = 4;
        let h = random_hermitian(&mut rng, d);
        let rho0 = random_density(&mut rng, d);
        let mixed = Mat::from_fn(d, d, |i, j| identity(d)[(i, j)] / d as f64);
        let gamma = 0.8;
        let n = |x: MatRef<'_, c64>| -> Result<Option<CMat>> {
            Ok(Some(Mat::from_fn(d, d, |i, j| (mixed[(i, j)] - x[(i, j)]) * gamma)))
        };
        let t = 1.0;
        let exact = {
            let rotated = exact_unitary(h.as_ref(), rho0.as_ref(), t);
            let w = (-gamma * t).exp();
            Mat::from_fn(d, d, |i, j| rotated[(i, j)] * w + mixed[(i, j)] * (1.0 - w))
        };
        let run = |steps: usize| {
            let dt = t / steps as f64;
            let u = unitary_propagator(h.as_ref(), 0.5 * dt).unwrap();
            let mut rho = rho0.clone();
            for _ in 0..steps {
                rho = rk4ip_step(u.as_ref(), n, None, rho.as_ref(), dt).unwrap();
            }
            distance(rho.as_ref(), exact.as_ref())
        };
        let (e1, e2) = (run(10), run(20));
        let order = (e1 / e2).log2();
        assert!(order > 3.7, "observed order {order}");
    }

    #[test]
    fn guard_leaves_physical_state_alone() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let rho = random_density(&mut rng, 6);
        let g = guard(rho.as_ref(), None, &Tolerances::default()).unwrap();
        assert!(max_abs_diff(g.rho.as_ref(), rho.as_ref()) < 1e-14);
        assert!(g.diagnostics.trace_error < 1e-14);
        assert!(g.diagnostics.hermiticity_error < 1e-14);
        assert_eq!(g.diagnostics.leakage, 0.0);
        assert!(!g.diagnostics.clipped);
    }

    #[test]
    fn guard_clips_tiny_negative_eigenvalues() {
        let rho = diagonal(&[0.6, 0.4 + 1e-10, -1e-10]);
        let g = guard(rho.as_ref(), None, &Tolerances::default()).unwrap();
        assert!(g.diagnostics.clipped);
        assert!((g.diagnostics.min_eigenvalue + 1e-10).abs() < 1e-15);
        assert!(g.eig.min() >= 0.0);
        assert!((trace(g.rho.as_ref()).re - 1.0).abs() < 1e-15);
        assert!(g.diagnostics.trace_error < 1e-15);
        let bad = diagonal(&[0.6, 0.4 + 1e-6, -1e-6]);
        assert!(matches!(guard(bad.as_ref(), None, &Tolerances::default()), Err(Error::PositivityViolated { .. })));
        let nan = diagonal(&[f64::NAN, 1.0]);
        assert!(matches!(guard(nan.as_ref(), None, &Tolerances::default()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn guard_removes_symmetric_component() {
        let n = 3;
        let basis = AntisymBasis::new(n).unwrap();
        let p = antisym_projector(n);
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let rho = basis.embed(random_density(&mut rng, 3).as_ref()).unwrap();
        let mut leaked = rho.clone();
        // |00⟩⟨00| lies in the symmetric sector.
        leaked[(0, 0)] += real(1e-3);
        let g = guard(leaked.as_ref(), Some(p.as_ref()), &Tolerances::default()).unwrap();
        assert!((g.diagnostics.leakage - 1e-3).abs() < 1e-15);
        assert!(max_abs_diff(g.rho.as_ref(), rho.as_ref()) < 1e-14);
        assert!(g.diagnostics.trace_error < 1e-14);
    }

    #[test]
    fn zero_horizon_gives_one_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let h = random_hermitian(&mut rng, 4);
        let rho = random_density(&mut rng, 4);
        let cfg = IntegratorConfig { t_max: 0.0, ..Default::default() };
        let rec = evolve(rho.as_ref(), &Unitary::new(h), &cfg, |s| Ok(s.rho.to_owned())).unwrap();
        assert_eq!(rec.samples.len(), 1);
        assert!(max_abs_diff(rec.samples[0].as_ref(), rho.as_ref()) < 1e-14);
        assert!(rec.outcome.is_completed());
    }

    #[test]
    fn sample_count_and_times() {
        let mut rng = ChaCha8Rng::seed_from_u64(58);
        let h = random_hermitian(&mut rng, 3);
        let rho = random_density(&mut rng, 3);
        let cfg = IntegratorConfig { dt: 0.01, t_max: 1.05, stride: 10, ..Default::default() };
        assert_eq!(cfg.n_steps().unwrap(), 105);
        assert_eq!(cfg.n_samples().unwrap(), 12);
        let rec = evolve(rho.as_ref(), &Unitary::new(h), &cfg, |s| Ok((s.step, s.time))).unwrap();
        assert_eq!(rec.samples.len(), 12);
        assert_eq!(rec.samples[1], (10, 0.1));
        assert_eq!(rec.samples.last().unwrap().0, 105);
        assert_eq!(IntegratorConfig::default().n_samples().unwrap(), 301);
        let bad = IntegratorConfig { dt: 0.3, t_max: 1.0, ..Default::default() };
        assert!(bad.n_steps().is_err());
        let bad = IntegratorConfig { stride: 0, ..Default::default() };
        assert!(bad.n_steps().is_err());
    }

    #[test]
    fn unitary_evolution_preserves_purity_and_matches_propagator() {
        let n = 5;
        let g = ring_graph(n).unwrap();
        let basis = AntisymBasis::new(n).unwrap();
        let h = basis.restrict(total_hamiltonian(&InteractionParams::new(n, [1.0; 4]), &g).unwrap().as_ref()).unwrap();
        let spec = InitialStateSpec { site_i: 1, site_j: 2, epsilon: 1.0 };
        let r0 = perturbed_initial_state_restricted(&spec, &basis).unwrap();
        let cfg = IntegratorConfig { dt: 1e-2, t_max: 2.0, stride: 50, ..Default::default() };
        let dynamics = Unitary::new(h.clone());
        let rec = evolve(r0.as_ref(), &dynamics, &cfg, |s| Ok(trace_product(s.rho, s.rho).re)).unwrap();
        for p in &rec.samples {
            assert!((p - 1.0).abs() < 1e-8);
        }
        let want = exact_unitary(h.as_ref(), r0.as_ref(), 2.0);
        assert!(max_abs_diff(rec.final_state.as_ref(), want.as_ref()) < 1e-10);
        assert!(rec.summary.max_energy_drift < 1e-10);
    }

    #[test]
    fn sea_evolution_raises_entropy_and_conserves_energy() {
        let n = 5;
        let g = ring_graph(n).unwrap();
        let basis = AntisymBasis::new(n).unwrap();
        let h = total_hamiltonian(&InteractionParams::new(n, [1.0; 4]), &g).unwrap();
        let sea = AntisymSea::from_full(basis.clone(), h.as_ref(), SeaParams::default()).unwrap();
        let r0 = perturbed_initial_state_restricted(&InitialStateSpec { site_i: 1, site_j: 2, epsilon: 0.9 }, &basis)
            .unwrap();
        let cfg = IntegratorConfig { dt: 1e-2, t_max: 2.0, stride: 20, ..Default::default() };
        let rec = evolve(r0.as_ref(), &sea, &cfg, |s| {
            let ent: f64 = s.eig.values.iter().filter(|&&l| l > 1e-12).map(|&l| -l * l.ln()).sum();
            Ok((ent, s.entropy_production))
        })
        .unwrap();
        assert!(rec.outcome.is_completed());
        for w in rec.samples.windows(2) {
            assert!(w[1].0 >= w[0].0 - 1e-9);
            assert!(w[0].1 >= 0.0);
        }
        assert!(rec.samples.last().unwrap().0 > rec.samples[0].0 + 0.1);
        assert!(rec.summary.max_energy_drift < 1e-10);
        assert!(rec.summary.max_trace_error < 1e-12);
    }

    #[test]
    fn schemes_agree_on_small_steps() {
        let n = 4;
        let g = ring_graph(n).unwrap();
        let basis = AntisymBasis::new(n).unwrap();
        let h = total_hamiltonian(&InteractionParams::new(n, [0.5; 4]), &g).unwrap();
        let sea = AntisymSea::from_full(basis.clone(), h.as_ref(), SeaParams::default()).unwrap();
        let r0 = perturbed_initial_state_restricted(&InitialStateSpec { site_i: 0, site_j: 1, epsilon: 0.8 }, &basis)
            .unwrap();
        let run = |scheme| {
            let cfg = IntegratorConfig { dt: 1e-3, t_max: 0.5, stride: 500, scheme, ..Default::default() };
            evolve(r0.as_ref(), &sea, &cfg, |_| Ok(())).unwrap().final_state
        };
        assert!(max_abs_diff(run(Scheme::Rk4).as_ref(), run(Scheme::Rk4ip).as_ref()) < 1e-10);
    }

    #[test]
    fn full_space_run_matches_subspace_run() {
        let n = 4;
        let g = ring_graph(n).unwrap();
        let basis = AntisymBasis::new(n).unwrap();
        let p_a = antisym_projector(n);
        let h = total_hamiltonian(&InteractionParams::new(n, [1.0, 0.1, 0.1, 1.0]), &g).unwrap();
        let h_a = crate::hamiltonian::project_antisym(h.as_ref(), p_a.as_ref()).unwrap();
        let fast = AntisymSea::from_full(basis.clone(), h.as_ref(), SeaParams::default()).unwrap();
        let full =
            CompositeSea::new(h_a.as_ref(), SeaParams::default(), crate::sea::ConstraintMode::Antisymmetric).unwrap();
        let spec = InitialStateSpec { site_i: 1, site_j: 3, epsilon: 0.9 };
        let r0 = perturbed_initial_state_restricted(&spec, &basis).unwrap();
        let rho0 = basis.embed(r0.as_ref()).unwrap();
        let cfg = IntegratorConfig { dt: 1e-2, t_max: 0.5, stride: 10, ..Default::default() };
        let a = evolve(r0.as_ref(), &fast, &cfg, |_| Ok(())).unwrap();
        let b = evolve(rho0.as_ref(), &full, &cfg, |_| Ok(())).unwrap();
        let lifted = basis.embed(a.final_state.as_ref()).unwrap();
        assert!(max_abs_diff(lifted.as_ref(), b.final_state.as_ref()) < 1e-12);
        assert!(b.summary.max_leakage < 1e-12);
    }

    #[test]
    fn step_doubling_reports_local_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let h = random_hermitian(&mut rng, 3);
        let rho = random_density(&mut rng, 3);
        let cfg = IntegratorConfig {
            dt: 0.01,
            t_max: 0.1,
            stride: 5,
            scheme: Scheme::Rk4,
            step_doubling: Some(1e-8),
            ..Default::default()
        };
        let rec = evolve(rho.as_ref(), &Unitary::new(h.clone()), &cfg, |_| Ok(())).unwrap();
        assert!(rec.outcome.is_completed());
        assert!(rec.summary.max_local_error > 0.0 && rec.summary.max_local_error < 1e-8);
        let strict = IntegratorConfig { step_doubling: Some(1e-20), ..cfg };
        let rec = evolve(rho.as_ref(), &Unitary::new(h), &strict, |_| Ok(())).unwrap();
        assert!(matches!(rec.outcome, Outcome::Aborted { step: 0, .. }));
    }

    #[test]
    fn evolution_is_deterministic() {
        let n = 4;
        let g = ring_graph(n).unwrap();
        let basis = AntisymBasis::new(n).unwrap();
        let h = total_hamiltonian(&InteractionParams::new(n, [10.0; 4]), &g).unwrap();
        let sea = AntisymSea::from_full(basis.clone(), h.as_ref(), SeaParams::default()).unwrap();
        let r0 = perturbed_initial_state_restricted(&InitialStateSpec { site_i: 0, site_j: 2, epsilon: 0.95 }, &basis)
            .unwrap();
        let cfg = IntegratorConfig { dt: 1e-3, t_max: 0.2, stride: 50, ..Default::default() };
        let a = evolve(r0.as_ref(), &sea, &cfg, |s| Ok(s.rho.to_owned())).unwrap();
        let b = evolve(r0.as_ref(), &sea, &cfg, |s| Ok(s.rho.to_owned())).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(max_abs_diff(x.as_ref(), y.as_ref()), 0.0);
        }
        assert!(frobenius_norm(a.final_state.as_ref()) > 0.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let h = identity(3);
        let rho = identity(4);
        let cfg = IntegratorConfig { t_max: 0.01, dt: 0.01, ..Default::default() };
        assert!(matches!(evolve(rho.as_ref(), &Unitary::new(h), &cfg, |_| Ok(())), Err(Error::Shape(_))));
    }
}
