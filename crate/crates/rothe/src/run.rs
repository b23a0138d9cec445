//! Experiment runs and convergence sweeps with their file outputs.
//!
//! A run directory holds
//!
//! ```text
//! config.txt                  the configuration that produced it
//! mesh.txt                    the refined mesh
//! energy.csv                  per-step energy ledger
//! stability.csv               cumulative energy balance
//! checkpoints/level_KKKK.txt  every computed level
//! fields/state_KKKK.vtk       snapshots
//! report.csv                  errors, for experiments with an exact solution
//! ```
//!
//! When a step fails the levels computed so far are still written.

use std::fs;
use std::path::{Path, PathBuf};

use rothe_core::analysis::{ConvergenceReport, ReportMeta};
use rothe_core::elements::MixedSpace;
use rothe_core::experiments::{solve, ExperimentConfig, Outcome, SolveError};
use rothe_core::timestepping::{stability_report, StabilityEntry, Trajectory};

use crate::config::{self, RunConfig};
use crate::error::{HarnessError, Result};
use crate::{checkpoint, ledger, mesh_io, vtk};

/// Slack allowed in the cumulative energy balance: `K` Newton tolerances
/// relative to the initial energy.
pub fn stability_tolerance(cfg: &ExperimentConfig, traj: &Trajectory) -> f64 {
    let e0 = traj.energy.first().map_or(0.0, |e| e.kinetic);
    cfg.steps as f64 * cfg.newton.abs_tol * e0.max(1.0)
}

pub fn stability(cfg: &ExperimentConfig, traj: &Trajectory) -> Vec<StabilityEntry> {
    stability_report(traj, stability_tolerance(cfg, traj))
}

/// Levels written as VTK snapshots: the first, the last and `count`
/// roughly evenly spaced ones in between.
pub fn snapshot_levels(steps: usize, count: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..=count + 1).map(|i| (i * steps + count.div_ceil(2)) / (count + 1)).collect();
    out.dedup();
    out
}

pub fn report_meta(cfg: &ExperimentConfig) -> ReportMeta {
    ReportMeta { family: cfg.family, p: cfg.p, delta: cfg.delta, tau: cfg.tau(), steps: cfg.steps, variant: cfg.error_variant }
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| HarnessError::io(path, e))
}

fn write_trajectory(cfg: &RunConfig, space: &MixedSpace, traj: &Trajectory, out: &Path) -> Result<()> {
    let e = &cfg.experiment;
    ledger::write_text(&out.join("energy.csv"), &ledger::energy_csv(traj))?;
    ledger::write_text(&out.join("stability.csv"), &ledger::stability_csv(&stability(e, traj)))?;
    let cps = out.join("checkpoints");
    mkdir(&cps)?;
    for (k, state) in traj.states.iter().enumerate() {
        checkpoint::write(&cps.join(format!("level_{k:04}.txt")), k, state)?;
    }
    let fields = out.join("fields");
    mkdir(&fields)?;
    let last = traj.states.len() - 1;
    for k in snapshot_levels(e.steps, cfg.snapshots).into_iter().filter(|&k| k <= last).chain((last < e.steps).then_some(last)) {
        let title = format!("{} {} level {k} t={:?}", e.experiment.as_str(), e.family.as_str(), traj.states[k].t);
        vtk::write(&fields.join(format!("state_{k:04}.vtk")), space, &traj.states[k], &title)?;
    }
    Ok(())
}

/// Result of [`run_experiment`].
pub struct RunSummary {
    pub dir: PathBuf,
    pub outcome: Outcome,
    /// One-row report for experiments with an exact solution.
    pub report: Option<ConvergenceReport>,
}

/// Solves `cfg` and writes the run directory `out`.
pub fn run_experiment(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    let e = &cfg.experiment;
    e.validate().map_err(HarnessError::Invalid)?;
    mkdir(out)?;
    ledger::write_text(&out.join("config.txt"), &config::to_string(cfg))?;
    let mesh = e.mesh().map_err(HarnessError::Invalid)?;
    ledger::write_text(&out.join("mesh.txt"), &mesh_io::to_string(&mesh))?;

    let outcome = match solve(e) {
        Ok(o) => o,
        Err(SolveError::Run { space, failure }) => {
            write_trajectory(cfg, &space, &failure.partial, out)?;
            return Err(HarnessError::Solver(failure.to_string()));
        }
        Err(err) => return Err(err.into()),
    };
    write_trajectory(cfg, &outcome.space, &outcome.trajectory, out)?;
    let report = outcome.errors.as_ref().map(|errs| {
        let mut r = ConvergenceReport::new(report_meta(e));
        r.push(e.level, outcome.space.mesh().h_max(), errs.l2_time_max(), errs.f_error(e.error_variant));
        r
    });
    if let Some(r) = &report {
        ledger::write_text(&out.join("report.csv"), &r.to_csv())?;
    }
    Ok(RunSummary { dir: out.to_path_buf(), outcome, report })
}

/// A sweep that stopped early, with the rows computed before the failure.
#[derive(Debug)]
pub struct SweepFailure {
    pub partial: ConvergenceReport,
    pub level: usize,
    pub error: HarnessError,
}

impl std::fmt::Display for SweepFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "level {} failed after {} completed levels: {}", self.level, self.partial.rows.len(), self.error)
    }
}

impl std::error::Error for SweepFailure {}

/// Runs levels `n_min..=n_max` of an experiment with an exact solution.
/// `out/convergence.csv` is rewritten after every level, and each level's
/// energy ledger goes to `out/level_N/energy.csv`. `progress` sees every
/// finished level.
pub fn convergence_sweep(
    cfg: &RunConfig,
    n_min: usize,
    n_max: usize,
    out: &Path,
    progress: &mut dyn FnMut(&ConvergenceReport),
) -> std::result::Result<ConvergenceReport, SweepFailure> {
    let e = &cfg.experiment;
    let mut report = ConvergenceReport::new(report_meta(e));
    let fail = |report: &ConvergenceReport, level, error| SweepFailure { partial: report.clone(), level, error };
    if n_min == 0 || n_max < n_min {
        let msg = format!("need 1 <= from <= to, got {n_min}..{n_max}");
        return Err(fail(&report, n_min, HarnessError::Invalid(rothe_core::Error::InvalidParameter(msg))));
    }
    if e.exact().is_none() {
        let msg = format!("experiment `{}` has no exact solution", e.experiment.as_str());
        return Err(fail(&report, n_min, HarnessError::Invalid(rothe_core::Error::InvalidParameter(msg))));
    }
    mkdir(out).map_err(|err| fail(&report, n_min, err))?;
    for n in n_min..=n_max {
        let level_cfg = ExperimentConfig { level: n, ..e.clone() };
        let outcome = solve(&level_cfg).map_err(|err| fail(&report, n, err.into()))?;
        let dir = out.join(format!("level_{n}"));
        mkdir(&dir).map_err(|err| fail(&report, n, err))?;
        ledger::write_text(&dir.join("energy.csv"), &ledger::energy_csv(&outcome.trajectory)).map_err(|err| fail(&report, n, err))?;
        let errs = outcome.errors.expect("experiment has an exact solution");
        report.push(n, outcome.space.mesh().h_max(), errs.l2_time_max(), errs.f_error(e.error_variant));
        ledger::write_text(&out.join("convergence.csv"), &report.to_csv()).map_err(|err| fail(&report, n, err))?;
        progress(&report);
    }
    Ok(report)
}
