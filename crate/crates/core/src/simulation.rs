//! End-to-end runs: configuration, trajectory, observable rows.

use std::fmt;
use std::str::FromStr;

use faer::{c64, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ring_graph;
use crate::hamiltonian::{
    project_antisym, regime_alphas, total_hamiltonian, InteractionParams, Regime, RegimeKind, DEFAULT_FIXED_HOPPING,
};
use crate::hilbert::{antisym_projector, partial_trace, AntisymBasis, Subsystem};
use crate::integrator::{
    evolve, DiagnosticsSummary, Dynamics, IntegratorConfig, Outcome, Sample, Scheme, Stepper, Tolerances, Unitary,
};
use crate::linalg::{distance, matmul, trace_product, CMat};
use crate::observables::{
    entropy_from_spectrum, joint_probability, joint_probability_antisym, moving_average, msd, von_neumann_entropy,
    EntropyBreakdown, JpdSnapshot, ObservableRow,
};
use crate::sea::{CompositeSea, ConstraintMode, SeaParams, DEFAULT_CUTOFF_EIG, DEFAULT_CUTOFF_GRAM};
use crate::state::{perturbed_initial_state, perturbed_initial_state_restricted, InitialStateSpec};
use crate::subspace::AntisymSea;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evolution {
    #[default]
    Sea,
    Unitary,
}

impl Evolution {
    pub fn name(self) -> &'static str {
        match self {
            Evolution::Sea => "sea",
            Evolution::Unitary => "unitary",
        }
    }
}

impl fmt::Display for Evolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Evolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sea" => Ok(Evolution::Sea),
            "unitary" => Ok(Evolution::Unitary),
            other => Err(Error::InvalidParameter(format!("unknown evolution '{other}' (expected sea or unitary)"))),
        }
    }
}

/// Where the state is stored during integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// `M × M` matrices in the antisymmetric basis.
    #[default]
    Subspace,
    /// `N² × N²` product-space matrices with projection after every step.
    Full,
}

/// Everything needed to reproduce one trajectory. Times are in units of
/// the mean relaxation time `(τ_A + τ_B)/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub n_sites: usize,
    pub epsilon: f64,
    pub init_sites: [usize; 2],
    pub regime: RegimeKind,
    pub strength: f64,
    pub fixed_hopping: f64,
    pub evolution: Evolution,
    pub tau_a: f64,
    pub tau_b: f64,
    pub dt: f64,
    pub t_max: f64,
    pub stride: usize,
    pub scheme: Scheme,
    pub engine: Engine,
    pub moving_average_window: usize,
    /// Measure leakage out of the antisymmetric subspace with a full-space
    /// step at every sample (subspace engine only).
    pub leakage_probe: bool,
    pub cutoff_eig: f64,
    pub cutoff_gram: f64,
    pub tolerances: Tolerances,
    pub step_doubling: Option<f64>,
    /// Extra JPD snapshot times; each must be a sample time.
    pub jpd_times: Vec<f64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_sites: 11,
            epsilon: 0.95,
            init_sites: [5, 6],
            regime: RegimeKind::None,
            strength: 0.0,
            fixed_hopping: DEFAULT_FIXED_HOPPING,
            evolution: Evolution::Sea,
            tau_a: 1.0,
            tau_b: 1.0,
            dt: 1e-3,
            t_max: 30.0,
            stride: 100,
            scheme: Scheme::default(),
            engine: Engine::default(),
            moving_average_window: 50,
            leakage_probe: true,
            cutoff_eig: DEFAULT_CUTOFF_EIG,
            cutoff_gram: DEFAULT_CUTOFF_GRAM,
            tolerances: Tolerances::default(),
            step_doubling: None,
            jpd_times: Vec::new(),
        }
    }
}

fn invalid(key: &str, msg: impl fmt::Display) -> Error {
    Error::InvalidParameter(format!("{key}: {msg}"))
}

fn positive(key: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format_args!("must be finite and > 0, got {x}")))
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 3 {
            return Err(invalid("n_sites", format_args!("a ring needs at least 3 sites, got {}", self.n_sites)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(invalid("epsilon", format_args!("must lie in [0, 1], got {}", self.epsilon)));
        }
        let [i, j] = self.init_sites;
        if i >= self.n_sites || j >= self.n_sites || i == j {
            return Err(invalid(
                "init_sites",
                format_args!("need two distinct sites below {}, got [{i}, {j}]", self.n_sites),
            ));
        }
        if !(self.strength.is_finite() && self.strength >= 0.0) {
            return Err(invalid("strength", format_args!("must be finite and ≥ 0, got {}", self.strength)));
        }
        if !self.fixed_hopping.is_finite() {
            return Err(invalid("fixed_hopping", "must be finite"));
        }
        positive("tau_a", self.tau_a)?;
        positive("tau_b", self.tau_b)?;
        positive("dt", self.dt)?;
        positive("cutoff_eig", self.cutoff_eig)?;
        positive("cutoff_gram", self.cutoff_gram)?;
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(invalid("t_max", format_args!("must be finite and ≥ 0, got {}", self.t_max)));
        }
        if self.stride == 0 {
            return Err(invalid("stride", "must be ≥ 1"));
        }
        if self.moving_average_window == 0 {
            return Err(invalid("moving_average_window", "must be ≥ 1"));
        }
        let t = &self.tolerances;
        for (key, v) in [
            ("tolerances.trace", t.trace),
            ("tolerances.positivity", t.positivity),
            ("tolerances.leakage", t.leakage),
            ("tolerances.hermiticity", t.hermiticity),
        ] {
            positive(key, v)?;
        }
        if let Some(s) = self.step_doubling {
            positive("step_doubling", s)?;
        }
        let steps = (self.t_max / self.dt).round();
        if (steps * self.dt - self.t_max).abs() > 1e-9 * self.t_max.max(1.0) {
            return Err(invalid(
                "t_max",
                format_args!("{} is not a whole number of steps of dt = {}", self.t_max, self.dt),
            ));
        }
        for &t in &self.jpd_times {
            if self.snapshot_step(t).is_none() {
                return Err(invalid(
                    "jpd_times",
                    format_args!("{t} is not a sample time (multiples of dt·stride up to t_max)"),
                ));
            }
        }
        Ok(())
    }

    pub fn regime(&self) -> Result<Regime> {
        Regime::with_fixed_hopping(self.regime, self.strength, self.fixed_hopping)
    }

    pub fn alphas(&self) -> Result<[f64; 4]> {
        Ok(regime_alphas(&self.regime()?))
    }

    pub fn sea_params(&self) -> SeaParams {
        SeaParams { tau_a: self.tau_a, tau_b: self.tau_b, cutoff_eig: self.cutoff_eig, cutoff_gram: self.cutoff_gram }
    }

    pub fn initial_state_spec(&self) -> InitialStateSpec {
        InitialStateSpec { site_i: self.init_sites[0], site_j: self.init_sites[1], epsilon: self.epsilon }
    }

    pub fn time_unit(&self) -> f64 {
        0.5 * (self.tau_a + self.tau_b)
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    /// Integrator settings in physical time.
    pub fn integrator(&self) -> IntegratorConfig {
        let unit = self.time_unit();
        IntegratorConfig {
            dt: self.dt * unit,
            t_max: self.n_steps() as f64 * self.dt * unit,
            stride: self.stride,
            scheme: self.scheme,
            tolerances: self.tolerances,
            step_doubling: self.step_doubling,
        }
    }

    pub fn n_samples(&self) -> usize {
        let n = self.n_steps();
        n / self.stride + 1 + usize::from(!n.is_multiple_of(self.stride))
    }

    fn snapshot_step(&self, t: f64) -> Option<usize> {
        if !(t.is_finite() && t >= 0.0) {
            return None;
        }
        let step = (t / self.dt).round();
        let n = self.n_steps();
        let on_grid = (step * self.dt - t).abs() <= 1e-9 * t.max(1.0);
        let step = step as usize;
        (on_grid && step <= n && (step.is_multiple_of(self.stride) || step == n)).then_some(step)
    }
}

/// Product-space operators shared by the full engine and the leakage probe.
struct FullSpace {
    h_a: CMat,
    p_a: CMat,
}

enum Model {
    Subspace { basis: AntisymBasis, dynamics: Box<dyn Dynamics + Send + Sync>, r0: CMat },
    Full { n: usize, dynamics: Box<dyn Dynamics + Send + Sync>, rho0: CMat },
}

struct Probe {
    basis: AntisymBasis,
    dynamics: Box<dyn Dynamics + Send + Sync>,
    dt: f64,
    scheme: Scheme,
}

impl Probe {
    /// `‖ρ' − P ρ' P‖_F` after one product-space step from the embedded state.
    fn leakage(&self, r: MatRef<'_, c64>) -> Result<f64> {
        let rho = self.basis.embed(r)?;
        let stepper = Stepper::new(self.dynamics.as_ref(), self.dt, self.scheme)?;
        let next = stepper.step(rho.as_ref(), None)?.rho;
        let p = self.dynamics.projector().expect("full-space dynamics has a projector");
        let projected = matmul(matmul(p, next.as_ref()).as_ref(), p);
        Ok(distance(next.as_ref(), projected.as_ref()))
    }
}

fn full_dynamics(full: &FullSpace, cfg: &SimulationConfig) -> Result<Box<dyn Dynamics + Send + Sync>> {
    Ok(match cfg.evolution {
        Evolution::Sea => {
            Box::new(CompositeSea::new(full.h_a.as_ref(), cfg.sea_params(), ConstraintMode::Antisymmetric)?)
        }
        Evolution::Unitary => Box::new(Unitary::with_projector(full.h_a.clone(), full.p_a.clone())),
    })
}

/// Result of [`run`].
#[derive(Debug)]
pub struct SimulationOutput {
    pub alphas: [f64; 4],
    pub rows: Vec<ObservableRow>,
    /// Snapshots at `t = 0`, any requested times, and the final time.
    pub jpd: Vec<JpdSnapshot>,
    pub summary: DiagnosticsSummary,
    /// Largest leakage seen by the probe or the guard.
    pub max_leakage: f64,
    pub steps_completed: usize,
    pub outcome: Outcome,
    /// Final state in the engine's representation.
    pub final_state: CMat,
}

impl SimulationOutput {
    pub fn is_completed(&self) -> bool {
        self.outcome.is_completed()
    }

    pub fn jpd_initial(&self) -> Option<&JpdSnapshot> {
        self.jpd.first().filter(|s| s.time == 0.0)
    }

    /// Snapshot at the final time, if the run reached it.
    pub fn jpd_final(&self) -> Option<&JpdSnapshot> {
        if self.is_completed() {
            self.jpd.last()
        } else {
            None
        }
    }

    pub fn column(&self, f: impl Fn(&ObservableRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn late_time(&self, window: usize) -> Result<LateTime> {
        LateTime::from_rows(&self.rows, window)
    }
}

/// Moving-averaged observables at the last sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LateTime {
    pub msd: f64,
    pub loschmidt: f64,
    pub entropy: f64,
    pub mutual_info: f64,
}

impl LateTime {
    pub fn from_rows(rows: &[ObservableRow], window: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter("no samples to average".into()));
        }
        let last = |f: fn(&ObservableRow) -> f64| -> Result<f64> {
            let series: Vec<f64> = rows.iter().map(f).collect();
            Ok(*moving_average(&series, window)?.last().expect("non-empty"))
        };
        Ok(Self {
            msd: last(|r| r.msd)?,
            loschmidt: last(|r| r.loschmidt)?,
            entropy: last(|r| r.entropy_total)?,
            mutual_info: last(|r| r.mutual_info)?,
        })
    }
}

fn observe(
    model: &Model,
    probe: Option<&Probe>,
    sample: &Sample<'_>,
    unit: f64,
    cutoff: f64,
) -> Result<(ObservableRow, JpdSnapshot)> {
    let time = sample.time / unit;
    let (jpd, ent, loschmidt, probe_leakage) = match model {
        Model::Subspace { basis, r0, .. } => {
            let r = sample.rho;
            let jpd = joint_probability_antisym(r, basis, time)?;
            let ent = EntropyBreakdown {
                total: entropy_from_spectrum(&sample.eig.values, cutoff),
                a: von_neumann_entropy(basis.reduced(r, Subsystem::A)?.as_ref(), cutoff)?,
                b: von_neumann_entropy(basis.reduced(r, Subsystem::B)?.as_ref(), cutoff)?,
            };
            let leak = match probe {
                Some(p) => p.leakage(r)?,
                None => 0.0,
            };
            (jpd, ent, trace_product(r0.as_ref(), r).re, leak)
        }
        Model::Full { n, rho0, .. } => {
            let rho = sample.rho;
            let jpd = joint_probability(rho, time)?;
            let dims = (*n, *n);
            let ent = EntropyBreakdown {
                total: entropy_from_spectrum(&sample.eig.values, cutoff),
                a: von_neumann_entropy(partial_trace(rho, dims, Subsystem::A)?.as_ref(), cutoff)?,
                b: von_neumann_entropy(partial_trace(rho, dims, Subsystem::B)?.as_ref(), cutoff)?,
            };
            (jpd, ent, trace_product(rho0.as_ref(), rho).re, 0.0)
        }
    };
    let d = sample.diagnostics;
    let row = ObservableRow {
        t_over_tau: time,
        msd: msd(&jpd),
        loschmidt,
        entropy_total: ent.total,
        entropy_a: ent.a,
        entropy_b: ent.b,
        mutual_info: ent.mutual_information(),
        trace_err: d.trace_error,
        leakage: d.leakage.max(probe_leakage),
        energy_drift: d.energy_drift,
        ep_rate: sample.entropy_production * unit,
    };
    if !row.is_finite() {
        return Err(Error::NonFinite(format!("observables at t/τ = {time}")));
    }
    Ok((row, jpd))
}

/// Integrate one configuration and collect its observables.
pub fn run(cfg: &SimulationConfig) -> Result<SimulationOutput> {
    cfg.validate()?;
    let n = cfg.n_sites;
    let graph = ring_graph(n)?;
    let alphas = cfg.alphas()?;
    let h = total_hamiltonian(&InteractionParams::new(n, alphas), &graph)?;
    let spec = cfg.initial_state_spec();
    let needs_full = cfg.engine == Engine::Full || cfg.leakage_probe;
    let full = if needs_full {
        let p_a = antisym_projector(n);
        let h_a = project_antisym(h.as_ref(), p_a.as_ref())?;
        Some(FullSpace { h_a, p_a })
    } else {
        None
    };
    let (model, probe) = match cfg.engine {
        Engine::Subspace => {
            let basis = AntisymBasis::new(n)?;
            let h_small = basis.restrict(h.as_ref())?;
            let dynamics: Box<dyn Dynamics + Send + Sync> = match cfg.evolution {
                Evolution::Sea => Box::new(AntisymSea::new(basis.clone(), h_small, cfg.sea_params())?),
                Evolution::Unitary => Box::new(Unitary::new(h_small)),
            };
            let r0 = perturbed_initial_state_restricted(&spec, &basis)?;
            let probe = match (&full, cfg.leakage_probe) {
                (Some(f), true) => Some(Probe {
                    basis: basis.clone(),
                    dynamics: full_dynamics(f, cfg)?,
                    dt: cfg.dt * cfg.time_unit(),
                    scheme: cfg.scheme,
                }),
                _ => None,
            };
            (Model::Subspace { basis, dynamics, r0 }, probe)
        }
        Engine::Full => {
            let f = full.as_ref().expect("built for the full engine");
            let rho0 = perturbed_initial_state(&spec, n)?;
            (Model::Full { n, dynamics: full_dynamics(f, cfg)?, rho0 }, None)
        }
    };
    let (dynamics, start) = match &model {
        Model::Subspace { dynamics, r0, .. } => (dynamics.as_ref(), r0),
        Model::Full { dynamics, rho0, .. } => (dynamics.as_ref(), rho0),
    };
    let unit = cfg.time_unit();
    let n_steps = cfg.n_steps();
    let snapshot_steps: Vec<usize> = cfg.jpd_times.iter().filter_map(|&t| cfg.snapshot_step(t)).collect();
    let mut jpd = Vec::new();
    let mut max_probe = 0.0f64;
    let record = evolve(start.as_ref(), dynamics, &cfg.integrator(), |s| {
        let (row, snapshot) = observe(&model, probe.as_ref(), s, unit, cfg.cutoff_eig)?;
        max_probe = max_probe.max(row.leakage);
        let wanted = s.step == 0 || s.step == n_steps || snapshot_steps.contains(&s.step);
        if wanted && jpd.last().is_none_or(|prev: &JpdSnapshot| prev.time != snapshot.time) {
            jpd.push(snapshot);
        }
        Ok(row)
    })?;
    Ok(SimulationOutput {
        alphas,
        rows: record.samples,
        jpd,
        max_leakage: record.summary.max_leakage.max(max_probe),
        summary: record.summary,
        steps_completed: record.steps_completed,
        outcome: record.outcome,
        final_state: record.final_state,
    })
}
