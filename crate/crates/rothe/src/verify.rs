//! Invariant suite behind `rothe verify`.
//!
//! Every check reports the worst value it saw next to the bound it was
//! held to. Checks on a solver run use the configured experiment with at
//! most [`VerifyOptions::max_steps`] steps of the configured size.

use std::fmt::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rothe_core::constitutive::{StressModel, Viscosity};
use rothe_core::elements::quadrature::{quadrature, MAX_DEGREE};
use rothe_core::elements::{ElementFamily, MixedSpace};
use rothe_core::experiments::{solve, ExperimentConfig, ExperimentKind, SolveError};
use rothe_core::forms::{clement_mean, Assembler, BodyForce, StepSettings};
use rothe_core::mesh::{build_rectangle_mesh, Mesh};
use rothe_core::nonlinear::{norm2, CsrMatrix};
use rothe_core::timestepping::{clement_contraction, TimeGrid};
use rothe_core::Point2;

use crate::run::stability;

pub const SKEW_TOL: f64 = 1e-12;
pub const IDENTITY_TOL: f64 = 1e-10;
pub const JACOBIAN_TOL: f64 = 1e-6;
pub const QUADRATURE_TOL: f64 = 1e-13;
pub const CLEMENT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn bound(name: impl Into<String>, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Check { name: name.into(), value, tolerance, passed: value <= tolerance, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `check,value,tolerance,passed,detail`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,value,tolerance,passed,detail\n");
        for c in &self.checks {
            let _ = writeln!(s, "{},{:e},{:e},{},{}", c.name, c.value, c.tolerance, c.passed, c.detail.replace(',', ";"));
        }
        s
    }
}

/// Hook applied to every assembled Jacobian before it is compared with
/// finite differences; tests use it to plant errors.
pub type JacobianHook<'a> = &'a dyn Fn(&MixedSpace, &mut CsrMatrix);

pub struct VerifyOptions<'a> {
    pub seed: u64,
    pub skew_fields: usize,
    pub jacobian_states: usize,
    pub max_steps: usize,
    pub jacobian_hook: Option<JacobianHook<'a>>,
}

impl Default for VerifyOptions<'_> {
    fn default() -> Self {
        VerifyOptions { seed: 20, skew_fields: 100, jacobian_states: 10, max_steps: 20, jacobian_hook: None }
    }
}

/// The 8-cell mesh of `(-1, 1)²`.
pub fn small_mesh() -> Mesh {
    build_rectangle_mesh(-1.0, -1.0, 1.0, 1.0, 2, 2).expect("valid rectangle")
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Worst `|<B̂u, u>| / (1 + ‖u‖∞³ |Ω|)` over random fields.
pub fn skew_symmetry(family: ElementFamily, fields: usize, seed: u64) -> f64 {
    let mesh = small_mesh();
    let area = mesh.total_area();
    let space = MixedSpace::new(&mesh, family);
    let asm = Assembler::new(&space);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..fields)
        .map(|i| {
            let scale = [0.1, 1.0, 10.0][i % 3];
            let u = random_vec(&mut rng, space.n_u(), scale);
            let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            asm.convective_form(&u, &u).abs() / (1.0 + sup.powi(3) * area)
        })
        .fold(0.0, f64::max)
}

/// Worst relative mismatch between central differences of the residual and
/// Jacobian-vector products over random states, directions and histories.
pub fn jacobian_consistency(family: ElementFamily, p: f64, convection: bool, states: usize, seed: u64, hook: Option<JacobianHook<'_>>) -> f64 {
    let mesh = small_mesh();
    let space = MixedSpace::new(&mesh, family);
    let model = StressModel::new(p, 1e-2, Viscosity::field(|t, x| 1.0 + t * t + 0.3 * x.x * x.y)).expect("valid model");
    let asm = Assembler::new(&space);
    let trace = |t: f64, x: Point2| [t + x.y, -x.x];
    let forcing = BodyForce(|t: f64, x: Point2| [x.x * t, 1.0]);
    let data = asm.step_data(&model, &forcing, &trace, StepSettings::new(0.05, 2, convection)).expect("valid step");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..states {
        let x = random_vec(&mut rng, asm.size(), 1.0);
        let prev = random_vec(&mut rng, space.n_u(), 1.0);
        let d = random_vec(&mut rng, asm.size(), 1.0);
        let mut jac = asm.jacobian(&model, &data, &x, &prev).expect("sizes match");
        if let Some(hook) = hook {
            hook(&space, &mut jac);
        }
        let jd = jac.mul_vec(&d).expect("sizes match");
        let h = 1e-6;
        let shifted = |s: f64| x.iter().zip(&d).map(|(a, b)| a + s * b).collect::<Vec<f64>>();
        let rp = asm.residual(&model, &data, &shifted(h), &prev).expect("sizes match");
        let rm = asm.residual(&model, &data, &shifted(-h), &prev).expect("sizes match");
        let diff: Vec<f64> = rp.iter().zip(&rm).zip(&jd).map(|((a, b), j)| (a - b) / (2.0 * h) - j).collect();
        worst = worst.max(norm2(&diff) / norm2(&jd));
    }
    worst
}

/// `∫_T ξ^a η^b` on the reference triangle.
pub fn reference_monomial(a: u32, b: u32) -> f64 {
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    fact(a) * fact(b) / fact(a + b + 2)
}

/// Worst relative monomial error of every tabulated triangle rule.
pub fn quadrature_exactness() -> f64 {
    let mut worst = 0.0f64;
    for d in 1..=MAX_DEGREE {
        let rule = quadrature(d).expect("tabulated degree");
        for a in 0..=d as u32 {
            for b in 0..=(d as u32 - a) {
                let got: f64 = rule.iter().map(|(l, w)| w * l[1].powi(a as i32) * l[2].powi(b as i32)).sum();
                let want = reference_monomial(a, b);
                worst = worst.max(((got - want) / want).abs());
            }
        }
    }
    worst
}

/// Worst error of the interval means on monomials `t^j`, `j < 2 q`.
pub fn clement_exactness(time_quad: usize) -> f64 {
    let mut worst = 0.0f64;
    for tau in [0.1, 4e-3, 1.0 / 3.0] {
        for k in [1, 2, 7] {
            let (a, b) = ((k - 1) as f64 * tau, k as f64 * tau);
            for j in 0..2 * time_quad as i32 {
                let exact = (b.powi(j + 1) - a.powi(j + 1)) / ((j + 1) as f64 * tau);
                let got = clement_mean(|t| t.powi(j), k, tau, time_quad);
                worst = worst.max((got - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    worst
}

/// Worst ratio of the discrete `ℓ^p` norm of the means to the `L^p` norm
/// of the sampled function; contraction means at most 1. With a single
/// Gauss point the means are midpoint samples and the bound only holds up
/// to the quadrature error.
pub fn clement_contraction_ratio(time_quad: usize) -> f64 {
    let samples: [fn(f64) -> f64; 3] = [
        |t| (7.0 * t).sin() + 0.3,
        |t| (-3.0 * t).exp() * (1.0 + t * t),
        |t| 1.0 / (1.0 + 25.0 * (t - 0.37) * (t - 0.37)),
    ];
    let mut worst = 0.0f64;
    for p in [2.0, 11.0 / 5.0] {
        for steps in [5, 40] {
            let grid = TimeGrid::new(1.0, steps).expect("valid grid");
            for g in &samples {
                let (means, full) = clement_contraction(g, grid, p, time_quad);
                worst = worst.max(means / full);
            }
        }
    }
    worst
}

/// Runs the whole suite.
pub fn verify(cfg: &ExperimentConfig) -> VerifyReport {
    verify_with(cfg, &VerifyOptions::default())
}

pub fn verify_with(cfg: &ExperimentConfig, opts: &VerifyOptions<'_>) -> VerifyReport {
    let start = Instant::now();
    let mut checks = Vec::new();

    for fam in ElementFamily::ALL {
        let v = skew_symmetry(fam, opts.skew_fields, opts.seed);
        checks.push(Check::bound(format!("skew_symmetry_{}", fam.as_str()), v, SKEW_TOL, format!("{} random fields", opts.skew_fields)));
    }

    let mut ps = vec![2.0, 11.0 / 5.0];
    if !ps.contains(&cfg.p) {
        ps.push(cfg.p);
    }
    for fam in ElementFamily::ALL {
        let mut worst = 0.0f64;
        for &p in &ps {
            for conv in [false, true] {
                worst = worst.max(jacobian_consistency(fam, p, conv, opts.jacobian_states, opts.seed, opts.jacobian_hook));
            }
        }
        let detail = format!("{} states; p in {ps:?}; with and without convection", opts.jacobian_states);
        checks.push(Check::bound(format!("jacobian_fd_{}", fam.as_str()), worst, JACOBIAN_TOL, detail));
    }

    checks.push(Check::bound("quadrature_exactness", quadrature_exactness(), QUADRATURE_TOL, format!("degrees 1..={MAX_DEGREE}")));
    checks.push(Check::bound("clement_exactness", clement_exactness(cfg.time_quad), CLEMENT_TOL, format!("{} Gauss points", cfg.time_quad)));
    checks.push(Check::bound("clement_contraction", clement_contraction_ratio(cfg.time_quad), 1.0 + 1e-12, "ratio of means to samples, p in {2, 2.2}"));

    checks.extend(run_checks(cfg, opts.max_steps));
    VerifyReport { checks, seconds: start.elapsed().as_secs_f64() }
}

/// Energy identity and stability ledger of a short run of `cfg`.
pub fn run_checks(cfg: &ExperimentConfig, max_steps: usize) -> Vec<Check> {
    let steps = cfg.steps.min(max_steps.max(1));
    let short = ExperimentConfig { t_end: cfg.tau() * steps as f64, steps, ..cfg.clone() };
    let traj = match solve(&short) {
        Ok(o) => o.trajectory,
        Err(SolveError::Run { failure, .. }) => {
            let msg = failure.to_string();
            return vec![Check { name: "run".into(), value: f64::NAN, tolerance: 0.0, passed: false, detail: msg }];
        }
        Err(e) => return vec![Check { name: "run".into(), value: f64::NAN, tolerance: 0.0, passed: false, detail: e.to_string() }],
    };
    let mut checks = Vec::new();
    let identity = traj.energy.iter().skip(1).map(|e| e.identity_residual).fold(0.0, f64::max);
    let what = format!("{} {} steps", short.experiment.as_str(), steps);
    checks.push(Check::bound("energy_identity", identity, IDENTITY_TOL, what.clone()));

    let ledger = stability(&short, &traj);
    let excess = ledger.iter().map(|e| e.lhs - e.rhs).fold(f64::NEG_INFINITY, f64::max);
    let tol = crate::run::stability_tolerance(&short, &traj);
    checks.push(Check::bound("stability_ledger", excess, tol, what.clone()));

    if short.experiment == ExperimentKind::Vortex {
        // f = 0: the kinetic energy may not grow
        let growth = traj.energy.windows(2).map(|w| (w[1].kinetic - w[0].kinetic) / w[0].kinetic.max(f64::MIN_POSITIVE)).fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::bound("kinetic_monotone", growth, 1e-14, what));
    }
    checks
}
