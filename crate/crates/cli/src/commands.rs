//! The `run`, `sweep` and `regimes` commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use sea_walk_core::hamiltonian::{regime_alphas, Regime, RegimeKind, MEDIUM, STRONG, WEAK};
use sea_walk_core::integrator::{DiagnosticsSummary, Outcome};
use sea_walk_core::simulation::{run, Evolution, LateTime, SimulationConfig, SimulationOutput};

use crate::error::{CliError, Result};
use crate::output::{
    csv_err, csv_writer, finish, format_float, write_jpd, write_json, write_observables, JPD_EXTRA_FILE, JPD_T0_FILE,
    JPD_TFINAL_FILE, MANIFEST_FILE, OBSERVABLES_FILE, SUMMARY_FILE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Aborted,
}

/// Metadata written next to the outputs of every run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub program: &'static str,
    pub version: &'static str,
    pub status: RunStatus,
    pub error: Option<String>,
    pub config: SimulationConfig,
    pub alphas: [f64; 4],
    pub time_unit: f64,
    pub steps_requested: usize,
    pub steps_completed: usize,
    pub rows: usize,
    pub wall_time_seconds: f64,
    pub diagnostics: DiagnosticsSummary,
    pub max_leakage: f64,
    pub tolerance_violations: Vec<String>,
    pub late_time: Option<LateTime>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn is_completed(&self) -> bool {
        self.status == RunStatus::Completed
    }
}

/// A finished run: its manifest plus the in-memory results.
pub struct RunReport {
    pub manifest: RunManifest,
    pub output: SimulationOutput,
}

impl RunReport {
    /// `Err` if the integration aborted, after outputs were written.
    pub fn into_result(self) -> Result<RunReport> {
        match &self.output.outcome {
            Outcome::Completed => Ok(self),
            Outcome::Aborted { step, error } => Err(CliError::Aborted { step: *step, source: error.clone() }),
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Integrate `cfg` and write observables, JPD snapshots and the manifest
/// into `out`. An aborted integration still writes everything it has and
/// is reported through the manifest status.
pub fn run_to_dir(cfg: &SimulationConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    create_dir(out)?;
    let start = Instant::now();
    let output = run(cfg)?;
    let wall = start.elapsed().as_secs_f64();

    let mut outputs = Vec::new();
    write_observables(&out.join(OBSERVABLES_FILE), &output.rows)?;
    outputs.push(OBSERVABLES_FILE.to_string());
    if let Some(first) = output.jpd_initial() {
        write_jpd(&out.join(JPD_T0_FILE), [first])?;
        outputs.push(JPD_T0_FILE.to_string());
    }
    if let Some(last) = output.jpd_final() {
        write_jpd(&out.join(JPD_TFINAL_FILE), [last])?;
        outputs.push(JPD_TFINAL_FILE.to_string());
    }
    if !cfg.jpd_times.is_empty() {
        let extra: Vec<_> = output
            .jpd
            .iter()
            .filter(|s| cfg.jpd_times.iter().any(|&t| (t - s.time).abs() <= 1e-9 * t.max(1.0)))
            .collect();
        write_jpd(&out.join(JPD_EXTRA_FILE), extra)?;
        outputs.push(JPD_EXTRA_FILE.to_string());
    }
    outputs.push(MANIFEST_FILE.to_string());

    let (status, error) = match &output.outcome {
        Outcome::Completed => (RunStatus::Completed, None),
        Outcome::Aborted { step, error } => (RunStatus::Aborted, Some(format!("step {step}: {error}"))),
    };
    let mut violations = output.summary.violations(&cfg.tolerances);
    if output.max_leakage > cfg.tolerances.leakage && output.summary.max_leakage <= cfg.tolerances.leakage {
        violations.push(format!("probe leakage {:.3e} > {:.1e}", output.max_leakage, cfg.tolerances.leakage));
    }
    let manifest = RunManifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        status,
        error,
        config: cfg.clone(),
        alphas: output.alphas,
        time_unit: cfg.time_unit(),
        steps_requested: cfg.n_steps(),
        steps_completed: output.steps_completed,
        rows: output.rows.len(),
        wall_time_seconds: wall,
        diagnostics: output.summary,
        max_leakage: output.max_leakage,
        tolerance_violations: violations,
        late_time: output.late_time(cfg.moving_average_window).ok(),
        outputs,
    };
    write_json(&out.join(MANIFEST_FILE), "manifest", &manifest)?;
    Ok(RunReport { manifest, output })
}

/// Grid of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub regimes: Vec<RegimeKind>,
    pub strengths: Vec<f64>,
    pub evolutions: Vec<Evolution>,
}

/// One sweep cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub regime: RegimeKind,
    pub strength: f64,
    pub evolution: Evolution,
}

impl Cell {
    /// `<regime>_<strength>_<evolution>`
    pub fn dir_name(&self) -> String {
        format!("{}_{}_{}", self.regime, self.strength, self.evolution)
    }

    pub fn config(&self, base: &SimulationConfig) -> SimulationConfig {
        SimulationConfig { regime: self.regime, strength: self.strength, evolution: self.evolution, ..base.clone() }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.regimes.is_empty() || self.strengths.is_empty() || self.evolutions.is_empty() {
            return Err(CliError::Argument("regimes, strengths and evolutions must all be non-empty".into()));
        }
        if let Some(s) = self.strengths.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(CliError::Argument(format!("strength must be finite and ≥ 0, got {s}")));
        }
        Ok(())
    }

    /// Cells in regime-major, then strength, then evolution order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &regime in &self.regimes {
            for &strength in &self.strengths {
                for &evolution in &self.evolutions {
                    cells.push(Cell { regime, strength, evolution });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub dir: PathBuf,
    pub status: String,
    pub message: Option<String>,
    pub t_final: Option<f64>,
    pub late_time: Option<LateTime>,
}

impl CellResult {
    pub fn is_completed(&self) -> bool {
        self.status == "completed"
    }
}

fn run_cell(base: &SimulationConfig, cell: Cell, out: &Path) -> CellResult {
    let dir = out.join(cell.dir_name());
    let cfg = cell.config(base);
    match run_to_dir(&cfg, &dir) {
        Ok(report) => {
            let m = &report.manifest;
            CellResult {
                cell,
                dir,
                status: if m.is_completed() { "completed" } else { "aborted" }.to_string(),
                message: m.error.clone(),
                t_final: report.output.rows.last().map(|r| r.t_over_tau),
                late_time: m.late_time,
            }
        }
        Err(e) => CellResult {
            cell,
            dir,
            status: "error".to_string(),
            message: Some(e.to_string()),
            t_final: None,
            late_time: None,
        },
    }
}

/// Run every cell of `spec` into its own directory under `out` and write
/// `summary.csv`. `jobs = Some(1)` runs sequentially; `None` uses all cores.
pub fn sweep(base: &SimulationConfig, spec: &SweepSpec, out: &Path, jobs: Option<usize>) -> Result<Vec<CellResult>> {
    spec.validate()?;
    base.validate()?;
    create_dir(out)?;
    let cells = spec.cells();
    let results: Vec<CellResult> = match jobs {
        Some(1) => cells.iter().map(|&c| run_cell(base, c, out)).collect(),
        _ => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(n) = jobs {
                builder = builder.num_threads(n);
            }
            let pool = builder.build().map_err(|e| CliError::Argument(format!("thread pool: {e}")))?;
            pool.install(|| cells.par_iter().map(|&c| run_cell(base, c, out)).collect())
        }
    };
    write_summary(&out.join(SUMMARY_FILE), &results)?;
    Ok(results)
}

pub const SUMMARY_COLUMNS: [&str; 10] =
    ["regime", "strength", "evolution", "status", "t_final", "msd", "loschmidt", "entropy", "mutual_info", "message"];

fn write_summary(path: &Path, results: &[CellResult]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SUMMARY_COLUMNS).map_err(csv_err(path))?;
    let opt = |x: Option<f64>| x.map(format_float).unwrap_or_default();
    for r in results {
        let lt = r.late_time;
        w.write_record([
            r.cell.regime.to_string(),
            r.cell.strength.to_string(),
            r.cell.evolution.to_string(),
            r.status.clone(),
            opt(r.t_final),
            opt(lt.map(|l| l.msd)),
            opt(lt.map(|l| l.loschmidt)),
            opt(lt.map(|l| l.entropy)),
            opt(lt.map(|l| l.mutual_info)),
            r.message.clone().unwrap_or_default(),
        ])
        .map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// Table of the interaction regimes and strength presets.
pub fn regimes_table() -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<6} {:>6} {:>6} {:>6} {:>6}  description", "regime", "a1", "a2", "a3", "a4");
    for kind in RegimeKind::ALL {
        let symbolic = |v: f64| match v {
            0.0 => "0".to_string(),
            1.0 => "g".to_string(),
            _ => "h".to_string(),
        };
        let probe = Regime { kind, strength: 1.0, fixed_hopping: 0.5 };
        let a = regime_alphas(&probe).map(symbolic);
        let _ = writeln!(s, "{:<6} {:>6} {:>6} {:>6} {:>6}  {}", kind, a[0], a[1], a[2], a[3], kind.description());
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "g = strength; presets weak = {WEAK}, medium = {MEDIUM}, strong = {STRONG}");
    let _ = writeln!(s, "h = fixed_hopping (FIFH only, default {})", sea_walk_core::hamiltonian::DEFAULT_FIXED_HOPPING);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_names_and_order() {
        let spec = SweepSpec {
            regimes: vec![RegimeKind::Fi, RegimeKind::Hi],
            strengths: vec![0.1, 1.0, 10.0],
            evolutions: vec![Evolution::Sea, Evolution::Unitary],
        };
        let cells = spec.cells();
        assert_eq!(cells.len(), 12);
        assert_eq!(cells[0].dir_name(), "FI_0.1_sea");
        assert_eq!(cells[1].dir_name(), "FI_0.1_unitary");
        assert_eq!(cells[5].dir_name(), "FI_10_unitary");
        assert_eq!(cells[11].dir_name(), "HI_10_unitary");
    }

    #[test]
    fn empty_lists_are_rejected() {
        let spec = SweepSpec { regimes: vec![], strengths: vec![1.0], evolutions: vec![Evolution::Sea] };
        assert!(spec.validate().is_err());
        let spec = SweepSpec { regimes: vec![RegimeKind::Fi], strengths: vec![-1.0], evolutions: vec![Evolution::Sea] };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn regimes_table_lists_presets() {
        let t = regimes_table();
        assert!(t.contains("FIFH") && t.contains("NONE"));
        let fi = t.lines().find(|l| l.starts_with("FI ")).unwrap();
        assert_eq!(fi.split_whitespace().take(5).collect::<Vec<_>>(), ["FI", "g", "g", "g", "g"]);
        let fifh = t.lines().find(|l| l.starts_with("FIFH")).unwrap();
        assert_eq!(fifh.split_whitespace().take(5).collect::<Vec<_>>(), ["FIFH", "g", "h", "h", "g"]);
        let hi = t.lines().find(|l| l.starts_with("HI")).unwrap();
        assert_eq!(hi.split_whitespace().take(5).collect::<Vec<_>>(), ["HI", "g", "0", "0", "0"]);
        assert!(t.contains("weak = 0.1"));
    }
}
