//! The Rothe loop: one Newton solve per interval `I_k = ((k-1)τ, kτ]`,
//! plus the discrete energy bookkeeping that goes with the implicit scheme.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::constitutive::StressModel;
use crate::elements::MixedSpace;
use crate::forms::{apply_dirichlet, clement_nodes, Assembler, DiscreteState, Forcing, StepSettings, TimeSample, Trace};
use crate::mesh::Point2;
use crate::nonlinear::{newton_solve_with, CsrMatrix, LuSolver, NewtonConfig, SolveStats};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end > 0.0) || !t_end.is_finite() || steps == 0 {
            return Err(Error::InvalidParameter(alloc::format!("need T > 0 and K >= 1, got T = {t_end}, K = {steps}")));
        }
        Ok(TimeGrid { t_end, steps })
    }

    pub fn tau(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.tau()
    }

    /// Index `k` with `t ∈ I_k`, for `0 < t ≤ T`.
    pub fn interval_of(&self, t: f64) -> Result<usize> {
        if !(t > 0.0 && t <= self.t_end * (1.0 + 1e-14)) {
            return Err(Error::InvalidParameter(alloc::format!("time {t} outside (0, {}]", self.t_end)));
        }
        let k = libm::ceil(t / self.tau() - 1e-12) as usize;
        Ok(k.clamp(1, self.steps))
    }
}

/// `(x^k - x^{k-1}) / τ`.
pub fn backward_difference(xk: &[f64], xkm1: &[f64], tau: f64) -> Result<Vec<f64>> {
    if xk.len() != xkm1.len() {
        return Err(Error::DimensionMismatch { expected: xk.len(), found: xkm1.len() });
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("time step must be positive, got {tau}")));
    }
    Ok(xk.iter().zip(xkm1).map(|(a, b)| (a - b) / tau).collect())
}

/// Per-step energy bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyEntry {
    pub k: usize,
    /// `½ ‖u^k‖²`.
    pub kinetic: f64,
    /// `τ <[S]_k u^k, u^k>`.
    pub stress_work: f64,
    /// `τ <[f]_k, u^k>`.
    pub load_work: f64,
    /// Relative residual of `(d_τ u, u) = ½ d_τ‖u‖² + τ/2 ‖d_τ u‖²`.
    pub identity_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<DiscreteState>,
    /// Newton statistics of steps `1..=K`.
    pub stats: Vec<SolveStats>,
    /// Entry 0 describes the initial state.
    pub energy: Vec<EnergyEntry>,
}

impl Trajectory {
    pub fn velocities(&self) -> impl Iterator<Item = &[f64]> {
        self.states.iter().map(|s| s.u.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpolantKind {
    /// `x̄(t) = x^k` on `I_k`.
    Constant,
    /// Linear between `x^{k-1}` at `(k-1)τ` and `x^k` at `kτ`.
    Affine,
}

/// Velocity coefficients of the Rothe interpolant at time `t ∈ (0, T]`.
pub fn interpolant_eval(traj: &Trajectory, t: f64, kind: InterpolantKind) -> Result<Vec<f64>> {
    let k = traj.grid.interval_of(t)?;
    if k >= traj.states.len() {
        return Err(Error::InvalidParameter(alloc::format!("trajectory has no level {k}")));
    }
    let uk = &traj.states[k].u;
    match kind {
        InterpolantKind::Constant => Ok(uk.clone()),
        InterpolantKind::Affine => {
            let s = t / traj.grid.tau() - (k as f64 - 1.0);
            let ukm1 = &traj.states[k - 1].u;
            Ok(uk.iter().zip(ukm1).map(|(a, b)| s * a + (1.0 - s) * b).collect())
        }
    }
}

fn quad(m: &CsrMatrix, x: &[f64], y: &[f64]) -> f64 {
    m.mul_vec(y).expect("mass size").iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Absolute and relative residual of the discrete integration-by-parts
/// identity in the inner product given by `mass`. The scale is
/// `1 + ‖u^k‖²/τ`.
pub fn energy_identity_residual(mass: &CsrMatrix, uk: &[f64], ukm1: &[f64], tau: f64) -> Result<(f64, f64)> {
    let d = backward_difference(uk, ukm1, tau)?;
    let nk = quad(mass, uk, uk);
    let nkm1 = quad(mass, ukm1, ukm1);
    let lhs = quad(mass, &d, uk);
    let rhs = 0.5 * (nk - nkm1) / tau + 0.5 * tau * quad(mass, &d, &d);
    let abs = (lhs - rhs).abs();
    Ok((abs, abs / (1.0 + nk / tau)))
}

/// Energy identity residual of level `k ≥ 1` of a trajectory.
pub fn energy_identity_check(traj: &Trajectory, mass: &CsrMatrix, k: usize) -> Result<f64> {
    if k == 0 || k >= traj.states.len() {
        return Err(Error::InvalidParameter(alloc::format!("level {k} has no predecessor in the trajectory")));
    }
    Ok(energy_identity_residual(mass, &traj.states[k].u, &traj.states[k - 1].u, traj.grid.tau())?.1)
}

/// How the discrete initial velocity is obtained from `u₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialData {
    /// L² projection onto the discretely divergence-free velocities with the
    /// boundary trace prescribed.
    #[default]
    Projection,
    /// Nodal interpolation, bubbles zero.
    Interpolation,
}

/// Discrete initial state at `t = 0`.
pub fn initial_state(
    asm: &Assembler<'_>,
    field: &dyn Fn(Point2) -> [f64; 2],
    trace: Trace<'_>,
    kind: InitialData,
    lu: &mut LuSolver,
) -> Result<DiscreteState> {
    let space = asm.space();
    let u = match kind {
        InitialData::Interpolation => {
            let mut u = space.interpolate_velocity(field);
            let points = space.node_points();
            for &d in space.dirichlet_dofs() {
                u[d] = trace(0.0, points[d / 2])[d % 2];
            }
            u
        }
        InitialData::Projection => {
            let sys = apply_dirichlet(asm.projection_system(field), space, trace, 0.0);
            let mut x = lu.solve(&sys.matrix, &sys.rhs)?;
            x.truncate(space.n_u());
            x
        }
    };
    Ok(DiscreteState { u, pr: vec![0.0; space.n_p()], t: 0.0, multiplier: 0.0 })
}

/// Everything one step needs besides the previous state.
pub struct RotheProblem<'a> {
    pub space: &'a MixedSpace,
    pub model: &'a StressModel,
    pub forcing: &'a dyn Forcing,
    pub trace: Trace<'a>,
    pub convection: bool,
    pub time_quad: usize,
    pub newton: NewtonConfig,
}

/// Stateful stepper: keeps the assembler, the velocity mass matrix and the
/// factorisation ordering across steps.
pub struct Stepper<'a> {
    problem: RotheProblem<'a>,
    asm: Assembler<'a>,
    mass: CsrMatrix,
    lu: LuSolver,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: RotheProblem<'a>) -> Self {
        let asm = Assembler::new(problem.space);
        let mass = asm.mass_matrix();
        Stepper { problem, asm, mass, lu: LuSolver::new() }
    }

    pub fn assembler(&self) -> &Assembler<'a> {
        &self.asm
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn settings(&self, tau: f64, k: usize) -> StepSettings {
        StepSettings { tau, k, convection: self.problem.convection, time_quad: self.problem.time_quad }
    }

    pub fn initial_state(&mut self, field: &dyn Fn(Point2) -> [f64; 2], kind: InitialData) -> Result<DiscreteState> {
        initial_state(&self.asm, field, self.problem.trace, kind, &mut self.lu)
    }

    /// Solves interval `k`; the Newton guess is `prev` with the new trace.
    pub fn step(&mut self, prev: &DiscreteState, tau: f64, k: usize) -> Result<(DiscreteState, SolveStats)> {
        let p = &self.problem;
        let settings = self.settings(tau, k);
        let wrap = |e: Error| Error::StepFailure { step: k, source: Box::new(e) };
        let data = self.asm.step_data(p.model, p.forcing, p.trace, settings).map_err(wrap)?;
        let mut x0 = prev.pack();
        for (&d, &g) in p.space.dirichlet_dofs().iter().zip(data.dirichlet_values()) {
            x0[d] = g;
        }
        let asm = &self.asm;
        let (x, stats) = newton_solve_with(
            &mut self.lu,
            |x| asm.residual(p.model, &data, x, &prev.u),
            |x| asm.jacobian(p.model, &data, x, &prev.u),
            x0,
            &p.newton,
        )
        .map_err(wrap)?;
        Ok((DiscreteState::unpack(p.space, &x, settings.t())?, stats))
    }

    fn energy(&self, traj: &Trajectory, k: usize) -> Result<EnergyEntry> {
        let uk = &traj.states[k].u;
        let kinetic = 0.5 * quad(&self.mass, uk, uk);
        if k == 0 {
            return Ok(EnergyEntry { k, kinetic, ..EnergyEntry::default() });
        }
        let tau = traj.grid.tau();
        let p = &self.problem;
        let sample = TimeSample::Mean { k, tau, time_quad: p.time_quad };
        Ok(EnergyEntry {
            k,
            kinetic,
            stress_work: tau * self.asm.stress_functional(p.model, uk, uk, sample)?,
            load_work: tau * self.asm.load_functional(p.forcing, k, tau, p.time_quad, uk),
            identity_residual: energy_identity_check(traj, &self.mass, k)?,
        })
    }

    /// Runs all `K` steps from `u0`. On failure the partial trajectory is
    /// returned with the error.
    pub fn run(&mut self, u0: DiscreteState, grid: TimeGrid) -> core::result::Result<Trajectory, RunFailure> {
        let mut traj = Trajectory { grid, states: vec![u0], stats: Vec::new(), energy: Vec::new() };
        let e0 = self.energy(&traj, 0);
        match e0 {
            Ok(e) => traj.energy.push(e),
            Err(error) => return Err(RunFailure { partial: Box::new(traj), error }),
        }
        for k in 1..=grid.steps {
            let result = self.step(&traj.states[k - 1], grid.tau(), k);
            match result {
                Ok((state, stats)) => {
                    traj.states.push(state);
                    traj.stats.push(stats);
                    match self.energy(&traj, k) {
                        Ok(e) => traj.energy.push(e),
                        Err(error) => return Err(RunFailure { partial: Box::new(traj), error }),
                    }
                }
                Err(error) => return Err(RunFailure { partial: Box::new(traj), error }),
            }
        }
        Ok(traj)
    }
}

/// Convenience wrapper around [`Stepper::run`].
pub fn run(problem: RotheProblem<'_>, u0: DiscreteState, grid: TimeGrid) -> core::result::Result<Trajectory, RunFailure> {
    Stepper::new(problem).run(u0, grid)
}

/// A failed run together with the levels computed before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub partial: Box<Trajectory>,
    pub error: Error,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} completed steps)", self.error, self.partial.states.len() - 1)
    }
}

impl core::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// One row of the discrete energy balance for the first `l` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityEntry {
    pub l: usize,
    /// `½‖u^l‖² + Σ_{k≤l} τ<[S]_k u^k, u^k>`.
    pub lhs: f64,
    /// `½‖u⁰‖² + Σ_{k≤l} τ<[f]_k, u^k>`.
    pub rhs: f64,
    pub holds: bool,
}

/// Energy balance ledger from a completed trajectory's energy entries;
/// `tol` is the slack allowed in `lhs ≤ rhs + tol`.
pub fn stability_report(traj: &Trajectory, tol: f64) -> Vec<StabilityEntry> {
    let Some(first) = traj.energy.first() else { return Vec::new() };
    let (mut work, mut load) = (0.0, 0.0);
    traj.energy
        .iter()
        .map(|e| {
            work += e.stress_work;
            load += e.load_work;
            let lhs = e.kinetic + work;
            let rhs = first.kinetic + load;
            StabilityEntry { l: e.k, lhs, rhs, holds: lhs <= rhs + tol }
        })
        .collect()
}

/// Both sides of the interval-mean commutation identity
/// `Σ_k τ <[S]_k u^k, ⨍ y> = Σ_k τ ⨍ <S(t) u^k, [y]_k>` for a piecewise
/// constant velocity history `us[k-1] = u^k` and test functions `y(t)`.
/// The left side samples `y` at the Gauss nodes, the right side samples
/// the operator.
pub fn commutation_sides(
    asm: &Assembler<'_>,
    model: &StressModel,
    us: &[Vec<f64>],
    y: &dyn Fn(f64) -> Vec<f64>,
    tau: f64,
    time_quad: usize,
) -> Result<(f64, f64)> {
    let (mut left, mut right) = (0.0, 0.0);
    for (i, u) in us.iter().enumerate() {
        let k = i + 1;
        let (times, w) = clement_nodes(k, tau, time_quad);
        let samples: Vec<Vec<f64>> = times.iter().map(|&t| y(t)).collect();
        let mut mean = vec![0.0; u.len()];
        for (s, &wq) in samples.iter().zip(&w) {
            left += tau * wq * asm.stress_functional(model, u, s, TimeSample::Mean { k, tau, time_quad })?;
            for (m, v) in mean.iter_mut().zip(s) {
                *m += wq * v;
            }
        }
        for (&t, &wq) in times.iter().zip(&w) {
            right += tau * wq * asm.stress_functional(model, u, &mean, TimeSample::Instant(t))?;
        }
    }
    Ok((left, right))
}

/// Discrete `ℓ^p` norm of the interval means against the `L^p` norm of `g`
/// on `(0, T]`, the latter by a fine Gauss rule on every interval.
pub fn clement_contraction(g: &dyn Fn(f64) -> f64, grid: TimeGrid, p: f64, time_quad: usize) -> (f64, f64) {
    let tau = grid.tau();
    let (mut means, mut full) = (0.0, 0.0);
    for k in 1..=grid.steps {
        let m = crate::forms::clement_mean(g, k, tau, time_quad);
        means += tau * libm::pow(m.abs(), p);
        let (t, w) = clement_nodes(k, tau, 12);
        full += tau * t.iter().zip(&w).map(|(&s, &wi)| wi * libm::pow(g(s).abs(), p)).sum::<f64>();
    }
    (libm::pow(means, 1.0 / p), libm::pow(full, 1.0 / p))
}
