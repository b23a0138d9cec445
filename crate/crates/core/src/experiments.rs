//! The numerical experiments: two vortices in a channel, a solution with a
//! point singularity, and a smooth steady Stokes flow.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::analysis::{level_errors, ErrorQuadrature, ErrorVariant, ExactForcing, ExactSolution, LevelErrors, PlanSettings};
use crate::constitutive::{StressModel, Viscosity};
use crate::elements::{ElementFamily, MixedSpace};
use crate::forms::{Forcing, ZeroForcing};
use crate::mesh::{build_rectangle_mesh, refine_times, Mesh, Point2};
use crate::nonlinear::NewtonConfig;
use crate::timestepping::{InitialData, RotheProblem, RunFailure, Stepper, TimeGrid, Trajectory};
use crate::{Error, Result};

/// `u = (t², t²) + |x|^{α-1} (x₂, -x₁)`, `p = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularSolution {
    pub alpha: f64,
}

impl SingularSolution {
    /// `α = 6/5 - 2/p`.
    pub fn for_p(p: f64) -> Self {
        SingularSolution { alpha: 1.2 - 2.0 / p }
    }
}

impl ExactSolution for SingularSolution {
    fn velocity(&self, t: f64, x: Point2) -> [f64; 2] {
        let r = x.norm();
        let s = if r == 0.0 { 0.0 } else { libm::pow(r, self.alpha - 1.0) };
        [t * t + s * x.y, t * t - s * x.x]
    }

    fn pressure(&self, _: f64, _: Point2) -> f64 {
        0.0
    }

    fn gradient(&self, _: f64, x: Point2) -> [[f64; 2]; 2] {
        let r = x.norm();
        if r == 0.0 {
            return [[0.0; 2]; 2];
        }
        let s = libm::pow(r, self.alpha - 1.0);
        let ds = (self.alpha - 1.0) * s / (r * r);
        [[ds * x.x * x.y, ds * x.y * x.y + s], [-ds * x.x * x.x - s, -ds * x.x * x.y]]
    }

    fn time_derivative(&self, t: f64, _: Point2) -> [f64; 2] {
        [2.0 * t, 2.0 * t]
    }

    fn singular_point(&self) -> Option<Point2> {
        Some(Point2::default())
    }
}

/// Steady Stokes flow with stream function `ψ = |x|⁴/4`, i.e.
/// `u = |x|² (x₂, -x₁)`, and pressure `x₁² - x₂²`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StokesManufactured;

impl ExactSolution for StokesManufactured {
    fn velocity(&self, _: f64, x: Point2) -> [f64; 2] {
        let r2 = x.x * x.x + x.y * x.y;
        [r2 * x.y, -r2 * x.x]
    }

    fn pressure(&self, _: f64, x: Point2) -> f64 {
        x.x * x.x - x.y * x.y
    }

    fn gradient(&self, _: f64, x: Point2) -> [[f64; 2]; 2] {
        let xy = 2.0 * x.x * x.y;
        [[xy, x.x * x.x + 3.0 * x.y * x.y], [-3.0 * x.x * x.x - x.y * x.y, -xy]]
    }

    fn time_derivative(&self, _: f64, _: Point2) -> [f64; 2] {
        [0.0; 2]
    }
}

fn bump(s: f64) -> f64 {
    s * s * (1.0 - s) * (1.0 - s)
}

fn bump_prime(s: f64) -> f64 {
    2.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
}

/// One rectangular vortex `γ curl ψ` with `ψ = s(ξ₁)s(ξ₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vortex {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub gamma: f64,
}

impl Vortex {
    /// Vortex on the given box whose maximum speed is `speed`.
    pub fn with_speed(x0: f64, y0: f64, x1: f64, y1: f64, speed: f64) -> Self {
        let unit = Vortex { x0, y0, x1, y1, gamma: 1.0 };
        let n = 400;
        let mut max = 0.0f64;
        for i in 0..=n {
            for j in 0..=n {
                let p = Point2::new(x0 + (x1 - x0) * i as f64 / n as f64, y0 + (y1 - y0) * j as f64 / n as f64);
                let u = unit.velocity(p);
                max = max.max(libm::hypot(u[0], u[1]));
            }
        }
        Vortex { gamma: speed / max, ..unit }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn velocity(&self, p: Point2) -> [f64; 2] {
        if !self.contains(p) {
            return [0.0; 2];
        }
        let (lx, ly) = (self.x1 - self.x0, self.y1 - self.y0);
        let (s, t) = ((p.x - self.x0) / lx, (p.y - self.y0) / ly);
        [self.gamma * bump(s) * bump_prime(t) / ly, -self.gamma * bump_prime(s) * bump(t) / lx]
    }
}

/// Initial velocity of the channel experiment: a slow vortex on
/// `(0,2)×(0,1)` next to a fast one on `(2,3)×(0,1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VortexInitialData {
    pub left: Vortex,
    pub right: Vortex,
}

impl VortexInitialData {
    pub fn new(left_speed: f64, right_speed: f64) -> Self {
        VortexInitialData {
            left: Vortex::with_speed(0.0, 0.0, 2.0, 1.0, left_speed),
            right: Vortex::with_speed(2.0, 0.0, 3.0, 1.0, right_speed),
        }
    }

    pub fn velocity(&self, p: Point2) -> [f64; 2] {
        if p.x < 2.0 {
            self.left.velocity(p)
        } else {
            self.right.velocity(p)
        }
    }
}

impl Default for VortexInitialData {
    fn default() -> Self {
        VortexInitialData::new(1.0, 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Vortex,
    Singular,
    Manufactured,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Vortex => "vortex",
            ExperimentKind::Singular => "singular",
            ExperimentKind::Manufactured => "manufactured",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "vortex" => Some(ExperimentKind::Vortex),
            "singular" => Some(ExperimentKind::Singular),
            "manufactured" => Some(ExperimentKind::Manufactured),
            _ => None,
        }
    }
}

/// Full description of one run. The mesh is the `nx × ny` rectangle mesh
/// refined `level - 1` times.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub family: ElementFamily,
    pub p: f64,
    pub delta: f64,
    /// `[x0, y0, x1, y1]`.
    pub domain: [f64; 4],
    pub nx: usize,
    pub ny: usize,
    pub level: usize,
    pub t_end: f64,
    pub steps: usize,
    pub convection: bool,
    pub time_quad: usize,
    pub initial: InitialData,
    pub newton: NewtonConfig,
    pub error_variant: ErrorVariant,
    pub output: String,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            experiment: kind,
            family: ElementFamily::Mini,
            p: 11.0 / 5.0,
            delta: 1e-2,
            domain: [0.0, 0.0, 3.0, 1.0],
            nx: 48,
            ny: 16,
            level: 1,
            t_end: 1.0,
            steps: 100,
            convection: true,
            time_quad: 3,
            initial: InitialData::Projection,
            newton: NewtonConfig::default(),
            error_variant: ErrorVariant::Squared,
            output: String::from("out"),
        };
        match kind {
            ExperimentKind::Vortex => base,
            ExperimentKind::Singular => ExperimentConfig {
                delta: 1e-4,
                domain: [-1.0, -1.0, 1.0, 1.0],
                nx: 2,
                ny: 2,
                // τ = 4e-3 on (0, ½)
                t_end: 0.5,
                steps: 125,
                ..base
            },
            ExperimentKind::Manufactured => ExperimentConfig {
                family: ElementFamily::TaylorHood,
                p: 2.0,
                delta: 0.0,
                domain: [-1.0, -1.0, 1.0, 1.0],
                nx: 2,
                ny: 2,
                steps: 1,
                convection: false,
                ..base
            },
        }
    }

    pub fn tau(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        let [x0, y0, x1, y1] = self.domain;
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(x1 > x0 && y1 > y0) {
            return bad("domain must have positive extent");
        }
        if self.nx == 0 || self.ny == 0 || self.level == 0 {
            return bad("nx, ny and level must be at least 1");
        }
        if !(self.p > 1.0) || !(self.delta >= 0.0) {
            return bad("need p > 1 and delta >= 0");
        }
        if !(self.t_end > 0.0) || self.steps == 0 || self.time_quad == 0 {
            return bad("need T > 0, K >= 1 and at least one time quadrature point");
        }
        self.newton.validate()
    }

    pub fn mesh(&self) -> Result<Mesh> {
        let [x0, y0, x1, y1] = self.domain;
        let base = build_rectangle_mesh(x0, y0, x1, y1, self.nx, self.ny)?;
        Ok(refine_times(&base, self.level - 1))
    }

    pub fn model(&self) -> Result<StressModel> {
        let nu = match self.experiment {
            ExperimentKind::Vortex => Viscosity::field(|t, x| t * t + libm::exp(-x.x * x.x + x.y * x.y)),
            _ => Viscosity::Constant(1.0),
        };
        StressModel::new(self.p, self.delta, nu)
    }

    pub fn exact(&self) -> Option<Arc<dyn ExactSolution>> {
        match self.experiment {
            ExperimentKind::Vortex => None,
            ExperimentKind::Singular => Some(Arc::new(SingularSolution::for_p(self.p))),
            ExperimentKind::Manufactured => Some(Arc::new(StokesManufactured)),
        }
    }
}

/// Result of [`solve`].
pub struct Outcome {
    pub space: MixedSpace,
    pub model: StressModel,
    pub trajectory: Trajectory,
    /// Errors against the exact solution, when the experiment has one.
    pub errors: Option<LevelErrors>,
}

/// Failure of [`solve`]: invalid input, or a solver failure with the
/// partial trajectory.
#[derive(Debug)]
pub enum SolveError {
    Config(Error),
    Run { space: Box<MixedSpace>, failure: RunFailure },
}

impl core::fmt::Display for SolveError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SolveError::Config(e) => write!(f, "invalid configuration: {e}"),
            SolveError::Run { failure, .. } => write!(f, "solver failed: {failure}"),
        }
    }
}

impl core::error::Error for SolveError {}

/// Builds and runs the experiment described by `cfg`.
pub fn solve(cfg: &ExperimentConfig) -> core::result::Result<Outcome, SolveError> {
    cfg.validate().map_err(SolveError::Config)?;
    let mesh = cfg.mesh().map_err(SolveError::Config)?;
    let space = MixedSpace::new(&mesh, cfg.family);
    let model = cfg.model().map_err(SolveError::Config)?;
    let grid = TimeGrid::new(cfg.t_end, cfg.steps).map_err(SolveError::Config)?;
    let exact = cfg.exact();

    let exact_ref = exact.as_deref();
    let forcing: Box<dyn Forcing + '_> = match exact_ref {
        Some(e) => Box::new(ExactForcing { exact: e, model: &model, convection: cfg.convection }),
        None => Box::new(ZeroForcing),
    };
    let vortex = VortexInitialData::default();
    let trace = move |t: f64, x: Point2| exact_ref.map_or([0.0; 2], |e| e.velocity(t, x));
    let initial = move |x: Point2| exact_ref.map_or_else(|| vortex.velocity(x), |e| e.velocity(0.0, x));

    let result = {
        let problem = RotheProblem {
            space: &space,
            model: &model,
            forcing: forcing.as_ref(),
            trace: &trace,
            convection: cfg.convection,
            time_quad: cfg.time_quad,
            newton: cfg.newton,
        };
        let mut stepper = Stepper::new(problem);
        match stepper.initial_state(&initial, cfg.initial) {
            Ok(u0) => stepper.run(u0, grid),
            Err(e) => return Err(SolveError::Config(e)),
        }
    };
    drop(forcing);
    match result {
        Ok(trajectory) => {
            let errors = exact_ref.map(|e| {
                let quad = ErrorQuadrature::new(space.mesh(), e.singular_point(), &PlanSettings::default());
                level_errors(&trajectory, e, &space, &model, &quad)
            });
            Ok(Outcome { space, model, trajectory, errors })
        }
        Err(failure) => Err(SolveError::Run { space: Box::new(space), failure }),
    }
}

/// Mesh sizes of the levels `1..=n` for a configuration.
pub fn level_sizes(cfg: &ExperimentConfig, n: usize) -> Result<Vec<f64>> {
    (1..=n).map(|level| Ok(ExperimentConfig { level, ..cfg.clone() }.mesh()?.h_max())).collect()
}
