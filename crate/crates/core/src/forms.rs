//! Residual and Jacobian of one implicit Rothe step as a saddle-point system.
//!
//! Unknowns are packed as `[u (n_u), pr (n_p), λ]`, where `λ` is the
//! multiplier enforcing zero mean pressure. For a test function
//! `v = φ_a e_i` the momentum row reads
//!
//! ```text
//! ((u - u_prev)/τ, v) + ([S]_k(Du), Dv) + b̂(u, u, v) - (pr, div v) - <[f]_k, v>
//! ```
//!
//! with the skew form `b̂(u, w, v) = ½((u·∇)w, v) - ½((u·∇)v, w)`. Continuity
//! rows are `-(div u, q) + λ (1, q)` and the last row is `(pr, 1)`. With this
//! sign choice the Jacobian is symmetric whenever the stress is linear and
//! convection is off.
//!
//! Dirichlet velocity dofs get the rows `u_i - g_i(kτ)` in the residual and
//! identity rows in the Jacobian. Columns are left untouched.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::constitutive::{dot, StressModel, SymTensor2};
use crate::elements::quadrature::gauss_legendre_unit;
use crate::elements::{quadrature, CellGeometry, LocalValues, MixedSpace, QuadratureRule, ScalarBasis, MAX_LOCAL};
use crate::mesh::Point2;
use crate::nonlinear::CsrMatrix;
use crate::{Error, Result};

/// Coefficients of one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub u: Vec<f64>,
    pub pr: Vec<f64>,
    pub t: f64,
    /// Mean-pressure multiplier.
    pub multiplier: f64,
}

impl DiscreteState {
    pub fn zeros(space: &MixedSpace, t: f64) -> Self {
        DiscreteState { u: vec![0.0; space.n_u()], pr: vec![0.0; space.n_p()], t, multiplier: 0.0 }
    }

    /// `[u, pr, λ]` as one vector.
    pub fn pack(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.u.len() + self.pr.len() + 1);
        x.extend_from_slice(&self.u);
        x.extend_from_slice(&self.pr);
        x.push(self.multiplier);
        x
    }

    pub fn unpack(space: &MixedSpace, x: &[f64], t: f64) -> Result<Self> {
        let (nu, np) = (space.n_u(), space.n_p());
        if x.len() != nu + np + 1 {
            return Err(Error::DimensionMismatch { expected: nu + np + 1, found: x.len() });
        }
        Ok(DiscreteState { u: x[..nu].to_vec(), pr: x[nu..nu + np].to_vec(), t, multiplier: x[nu + np] })
    }

    pub fn check(&self, space: &MixedSpace) -> Result<()> {
        if self.u.len() != space.n_u() {
            return Err(Error::DimensionMismatch { expected: space.n_u(), found: self.u.len() });
        }
        if self.pr.len() != space.n_p() {
            return Err(Error::DimensionMismatch { expected: space.n_p(), found: self.pr.len() });
        }
        Ok(())
    }
}

/// Matrix and right-hand side of a linear system.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// A load in divergence form: `<f, v> = ∫ f0·v + f1:∇v`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LoadDensity {
    pub f0: [f64; 2],
    /// `f1[i][j]` pairs with `∂_j v_i`.
    pub f1: [[f64; 2]; 2],
}

impl LoadDensity {
    fn axpy(&mut self, w: f64, o: &LoadDensity) {
        for i in 0..2 {
            self.f0[i] += w * o.f0[i];
            for j in 0..2 {
                self.f1[i][j] += w * o.f1[i][j];
            }
        }
    }
}

pub trait Forcing: Send + Sync {
    fn density(&self, t: f64, x: Point2) -> LoadDensity;

    /// Lets assembly skip the load entirely.
    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroForcing;

impl Forcing for ZeroForcing {
    fn density(&self, _: f64, _: Point2) -> LoadDensity {
        LoadDensity::default()
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// Plain body force `f0(t, x)`.
pub struct BodyForce<F>(pub F);

impl<F: Fn(f64, Point2) -> [f64; 2] + Send + Sync> Forcing for BodyForce<F> {
    fn density(&self, t: f64, x: Point2) -> LoadDensity {
        LoadDensity { f0: (self.0)(t, x), f1: [[0.0; 2]; 2] }
    }
}

/// Load given directly as a density closure.
pub struct DensityForce<F>(pub F);

impl<F: Fn(f64, Point2) -> LoadDensity + Send + Sync> Forcing for DensityForce<F> {
    fn density(&self, t: f64, x: Point2) -> LoadDensity {
        (self.0)(t, x)
    }
}

/// Velocity boundary data `g(t, x)`.
pub type Trace<'a> = &'a (dyn Fn(f64, Point2) -> [f64; 2] + Send + Sync);

pub fn zero_trace(_: f64, _: Point2) -> [f64; 2] {
    [0.0; 2]
}

/// Per-step parameters of the implicit scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSettings {
    pub tau: f64,
    /// Interval index `k ≥ 1` of `I_k = ((k-1)τ, kτ]`.
    pub k: usize,
    pub convection: bool,
    /// Gauss points used for the interval means.
    pub time_quad: usize,
}

impl StepSettings {
    pub fn new(tau: f64, k: usize, convection: bool) -> Self {
        StepSettings { tau, k, convection, time_quad: 3 }
    }

    pub fn t(&self) -> f64 {
        self.k as f64 * self.tau
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!("time step must be positive, got {}", self.tau)));
        }
        if self.k == 0 || self.time_quad == 0 {
            return Err(Error::InvalidParameter("interval index and time quadrature must be at least 1".into()));
        }
        Ok(())
    }
}

/// Gauss nodes on `I_k` with weights summing to one.
pub fn clement_nodes(k: usize, tau: f64, time_quad: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre_unit(time_quad);
    let t0 = (k as f64 - 1.0) * tau;
    (x.iter().map(|s| t0 + s * tau).collect(), w)
}

/// Interval mean `⨍_{I_k} g(s) ds` by Gauss quadrature; exact for
/// polynomials of degree `2 time_quad - 1`.
pub fn clement_mean(g: impl Fn(f64) -> f64, k: usize, tau: f64, time_quad: usize) -> f64 {
    let (t, w) = clement_nodes(k, tau, time_quad);
    t.iter().zip(&w).map(|(&s, &wi)| wi * g(s)).sum()
}

/// Spatial quadrature degree used for assembly.
pub fn assembly_degree(space: &MixedSpace) -> usize {
    2 * space.family().velocity_degree() + 4
}

/// Interval means of the data at every quadrature point, plus the Dirichlet
/// values at the end of the interval.
#[derive(Debug, Clone, PartialEq)]
pub struct StepData {
    pub settings: StepSettings,
    nu: Option<Vec<f64>>,
    nu_constant: f64,
    load: Option<Vec<LoadDensity>>,
    dirichlet: Vec<f64>,
}

impl StepData {
    pub fn dirichlet_values(&self) -> &[f64] {
        &self.dirichlet
    }
}

/// Reusable assembly context for one space: quadrature, tabulated reference
/// basis values, and the fixed sparsity pattern of the Jacobian.
#[derive(Debug, Clone)]
pub struct Assembler<'a> {
    space: &'a MixedSpace,
    rule: QuadratureRule,
    basis: Vec<LocalValues>,
    pressure: Vec<[f64; 3]>,
    pattern: CsrMatrix,
}

struct Point<'s> {
    w: f64,
    x: Point2,
    vals: &'s LocalValues,
    grads: [[f64; 2]; MAX_LOCAL],
    psi: [f64; 3],
}

impl<'a> Assembler<'a> {
    pub fn new(space: &'a MixedSpace) -> Self {
        Self::with_degree(space, assembly_degree(space)).expect("assembly degree is supported")
    }

    pub fn with_degree(space: &'a MixedSpace, degree: usize) -> Result<Self> {
        let rule = quadrature(degree)?;
        let vb = space.velocity_basis();
        let basis = rule.points.iter().map(|&l| vb.eval(l)).collect();
        let pressure = rule.points.iter().map(|&l| ScalarBasis::P1.eval(l).values).map(|v| [v[0], v[1], v[2]]).collect();
        Ok(Assembler { space, rule, basis, pressure, pattern: saddle_pattern(space) })
    }

    pub fn space(&self) -> &MixedSpace {
        self.space
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Size of the full system `n_u + n_p + 1`.
    pub fn size(&self) -> usize {
        self.space.n_u() + self.space.n_p() + 1
    }

    pub fn pattern(&self) -> &CsrMatrix {
        &self.pattern
    }

    fn points(&self, cell: usize) -> (CellGeometry, impl Iterator<Item = Point<'_>> + '_) {
        let geo = self.space.geometry(cell);
        let iter = self.rule.iter().enumerate().map(move |(q, (l, w))| {
            let vals = &self.basis[q];
            Point { w: w * geo.det, x: geo.map(l), vals, grads: vals.physical_gradients(&geo), psi: self.pressure[q] }
        });
        (geo, iter)
    }

    /// Tabulates `[ν]_k` and `[f]_k` at the quadrature points and the trace at `kτ`.
    pub fn step_data(&self, model: &StressModel, forcing: &dyn Forcing, trace: Trace<'_>, settings: StepSettings) -> Result<StepData> {
        settings.validate()?;
        let (times, tw) = clement_nodes(settings.k, settings.tau, settings.time_quad);
        let cells = self.space.mesh().num_cells();
        let nq = self.rule.len();
        let mut nu = if model.nu.is_constant() { None } else { Some(Vec::with_capacity(cells * nq)) };
        let mut load = if forcing.is_zero() { None } else { Some(Vec::with_capacity(cells * nq)) };
        if nu.is_some() || load.is_some() {
            for c in 0..cells {
                let geo = self.space.geometry(c);
                for l in &self.rule.points {
                    let x = geo.map(l);
                    if let Some(nu) = nu.as_mut() {
                        nu.push(times.iter().zip(&tw).map(|(&t, &w)| w * model.nu.eval(t, x)).sum());
                    }
                    if let Some(load) = load.as_mut() {
                        let mut d = LoadDensity::default();
                        for (&t, &w) in times.iter().zip(&tw) {
                            d.axpy(w, &forcing.density(t, x));
                        }
                        load.push(d);
                    }
                }
            }
        }
        let t = settings.t();
        let points = self.space.node_points();
        let dirichlet = self.space.dirichlet_dofs().iter().map(|&d| trace(t, points[d / 2])[d % 2]).collect();
        Ok(StepData { settings, nu, nu_constant: model.nu.eval(t, Point2::default()), load, dirichlet })
    }

    fn check_inputs(&self, x: &[f64], prev_u: &[f64]) -> Result<()> {
        if x.len() != self.size() {
            return Err(Error::DimensionMismatch { expected: self.size(), found: x.len() });
        }
        if prev_u.len() != self.space.n_u() {
            return Err(Error::DimensionMismatch { expected: self.space.n_u(), found: prev_u.len() });
        }
        Ok(())
    }

    /// Residual at the packed iterate `x = [u, pr, λ]`.
    pub fn residual(&self, model: &StressModel, data: &StepData, x: &[f64], prev_u: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(x, prev_u)?;
        let space = self.space;
        let (nu_dofs, np) = (space.n_u(), space.n_p());
        let (u_c, p_c, lambda) = (&x[..nu_dofs], &x[nu_dofs..nu_dofs + np], x[nu_dofs + np]);
        let tau = data.settings.tau;
        let nq = self.rule.len();
        let mut r = vec![0.0; self.size()];

        for c in 0..space.mesh().num_cells() {
            let nodes = space.cell_velocity_nodes(c);
            let pd = space.cell_pressure_dofs(c);
            let (_, pts) = self.points(c);
            for (q, pt) in pts.enumerate() {
                let (u, g) = space.velocity_at(u_c, c, pt.vals, &pt.grads);
                let up = value_at(space, prev_u, c, pt.vals);
                let pr: f64 = (0..3).map(|i| p_c[pd[i]] * pt.psi[i]).sum();
                let nu = data.nu.as_ref().map_or(data.nu_constant, |v| v[c * nq + q]);
                let s = model.stress_with_viscosity(nu, SymTensor2::sym(g));
                let f = data.load.as_ref().map_or(LoadDensity::default(), |v| v[c * nq + q]);
                let gu = mat_vec(g, u);
                for (a, &node) in nodes.iter().enumerate() {
                    let phi = pt.vals.values[a];
                    let dphi = pt.grads[a];
                    let u_dphi = dot(u, dphi);
                    let sd = s.apply(dphi);
                    for i in 0..2 {
                        let mut val = (u[i] - up[i]) / tau * phi + sd[i] - pr * dphi[i] - f.f0[i] * phi - dot(f.f1[i], dphi);
                        if data.settings.convection {
                            val += 0.5 * (phi * gu[i] - u[i] * u_dphi);
                        }
                        r[2 * node + i] += pt.w * val;
                    }
                }
                let div = g[0][0] + g[1][1];
                for i in 0..3 {
                    r[nu_dofs + pd[i]] += pt.w * (lambda - div) * pt.psi[i];
                }
                r[nu_dofs + np] += pt.w * pr;
            }
        }
        for (&d, &gv) in space.dirichlet_dofs().iter().zip(&data.dirichlet) {
            r[d] = u_c[d] - gv;
        }
        Ok(r)
    }

    /// Jacobian of [`Assembler::residual`] with respect to `x`.
    pub fn jacobian(&self, model: &StressModel, data: &StepData, x: &[f64], prev_u: &[f64]) -> Result<CsrMatrix> {
        self.check_inputs(x, prev_u)?;
        let space = self.space;
        let (nu_dofs, np) = (space.n_u(), space.n_p());
        let u_c = &x[..nu_dofs];
        let tau = data.settings.tau;
        let conv = data.settings.convection;
        let nq = self.rule.len();
        let nloc = space.velocity_basis().len();
        let nl = 2 * nloc + 3;
        let mut jac = self.pattern.clone();
        let mut local = [[0.0; 2 * MAX_LOCAL + 3]; 2 * MAX_LOCAL + 3];
        let mut lam = [0.0; 3];

        for c in 0..space.mesh().num_cells() {
            for row in local.iter_mut().take(nl) {
                row[..nl].fill(0.0);
            }
            lam.fill(0.0);
            let nodes = space.cell_velocity_nodes(c);
            let pd = space.cell_pressure_dofs(c);
            let (_, pts) = self.points(c);
            for (q, pt) in pts.enumerate() {
                let (u, g) = space.velocity_at(u_c, c, pt.vals, &pt.grads);
                let nu = data.nu.as_ref().map_or(data.nu_constant, |v| v[c * nq + q]);
                let a_t = SymTensor2::sym(g);
                let ds = model.stress_derivative_with_viscosity(nu, a_t)?;
                let mut adphi = [[0.0; 2]; MAX_LOCAL];
                let mut u_dphi = [0.0; MAX_LOCAL];
                for a in 0..nloc {
                    adphi[a] = a_t.apply(pt.grads[a]);
                    u_dphi[a] = dot(u, pt.grads[a]);
                }
                let w = pt.w;
                for a in 0..nloc {
                    let (pa, ga) = (pt.vals.values[a], pt.grads[a]);
                    for b in 0..nloc {
                        let (pb, gb) = (pt.vals.values[b], pt.grads[b]);
                        let diag = pa * pb / tau + 0.5 * ds.c_id * dot(ga, gb);
                        for i in 0..2 {
                            for j in 0..2 {
                                let mut v = 0.5 * ds.c_id * gb[i] * ga[j] + ds.c_rank * adphi[b][j] * adphi[a][i];
                                if i == j {
                                    v += diag;
                                }
                                if conv {
                                    let dij = if i == j { 1.0 } else { 0.0 };
                                    v += 0.5 * pa * (dij * u_dphi[b] + g[i][j] * pb) - 0.5 * pb * (dij * u_dphi[a] + u[i] * ga[j]);
                                }
                                local[2 * a + i][2 * b + j] += w * v;
                            }
                        }
                    }
                    for (k, &psi) in pt.psi.iter().enumerate() {
                        for i in 0..2 {
                            let v = -w * psi * ga[i];
                            local[2 * a + i][2 * nloc + k] += v;
                            local[2 * nloc + k][2 * a + i] += v;
                        }
                    }
                }
                for (k, &psi) in pt.psi.iter().enumerate() {
                    lam[k] += w * psi;
                }
            }
            let global = |l: usize| if l < 2 * nloc { 2 * nodes[l / 2] + l % 2 } else { nu_dofs + pd[l - 2 * nloc] };
            scatter(&mut jac, space, nl, &global, &local);
            for k in 0..3 {
                add_at(&mut jac, nu_dofs + pd[k], nu_dofs + np, lam[k]);
                add_at(&mut jac, nu_dofs + np, nu_dofs + pd[k], lam[k]);
            }
        }
        for &d in space.dirichlet_dofs() {
            jac.set_identity_row(d);
        }
        Ok(jac)
    }

    /// Velocity mass matrix `(φ_a e_i, φ_b e_j)`, `n_u × n_u`.
    pub fn mass_matrix(&self) -> CsrMatrix {
        let space = self.space;
        let mut t = Vec::new();
        for c in 0..space.mesh().num_cells() {
            let nodes = space.cell_velocity_nodes(c);
            let (_, pts) = self.points(c);
            let mut local = [[0.0; MAX_LOCAL]; MAX_LOCAL];
            for pt in pts {
                for a in 0..nodes.len() {
                    for b in 0..nodes.len() {
                        local[a][b] += pt.w * pt.vals.values[a] * pt.vals.values[b];
                    }
                }
            }
            for (a, &na) in nodes.iter().enumerate() {
                for (b, &nb) in nodes.iter().enumerate() {
                    for i in 0..2 {
                        t.push((2 * na + i, 2 * nb + i, local[a][b]));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(space.n_u(), space.n_u(), &t).expect("indices in range")
    }

    /// Discrete divergence `B[c][(b, j)] = (ψ_c, ∂_j φ_b)`, `n_p × n_u`.
    pub fn divergence_matrix(&self) -> CsrMatrix {
        let space = self.space;
        let mut t = Vec::new();
        for c in 0..space.mesh().num_cells() {
            let nodes = space.cell_velocity_nodes(c);
            let pd = space.cell_pressure_dofs(c);
            let (_, pts) = self.points(c);
            for pt in pts {
                for (k, &psi) in pt.psi.iter().enumerate() {
                    for (b, &nb) in nodes.iter().enumerate() {
                        for j in 0..2 {
                            t.push((pd[k], 2 * nb + j, pt.w * psi * pt.grads[b][j]));
                        }
                    }
                }
            }
        }
        CsrMatrix::from_triplets(space.n_p(), space.n_u(), &t).expect("indices in range")
    }

    /// `(div u, ψ_c)` for every pressure dof.
    pub fn divergence(&self, u: &[f64]) -> Vec<f64> {
        self.divergence_matrix().mul_vec(u).expect("velocity length")
    }

    /// `∫ S(Du):Dy` with the viscosity sampled at one instant or averaged
    /// over an interval.
    pub fn stress_functional(&self, model: &StressModel, u: &[f64], y: &[f64], sample: TimeSample) -> Result<f64> {
        let space = self.space;
        let times: Vec<(f64, f64)> = match sample {
            TimeSample::Instant(t) => vec![(t, 1.0)],
            TimeSample::Mean { k, tau, time_quad } => {
                let (t, w) = clement_nodes(k, tau, time_quad);
                t.into_iter().zip(w).collect()
            }
        };
        let mut total = 0.0;
        for c in 0..space.mesh().num_cells() {
            let (_, pts) = self.points(c);
            for pt in pts {
                let (_, g) = space.velocity_at(u, c, pt.vals, &pt.grads);
                let (_, h) = space.velocity_at(y, c, pt.vals, &pt.grads);
                let nu: f64 = times.iter().map(|&(t, w)| w * model.nu.eval(t, pt.x)).sum();
                total += pt.w * model.stress_with_viscosity(nu, SymTensor2::sym(g)).ddot_full(h);
            }
        }
        Ok(total)
    }

    /// `b̂(u, u, v)`, the skew-symmetric convection form.
    pub fn convective_form(&self, u: &[f64], v: &[f64]) -> f64 {
        let space = self.space;
        let mut total = 0.0;
        for c in 0..space.mesh().num_cells() {
            let (_, pts) = self.points(c);
            for pt in pts {
                let (uu, g) = space.velocity_at(u, c, pt.vals, &pt.grads);
                let (vv, h) = space.velocity_at(v, c, pt.vals, &pt.grads);
                total += pt.w * skew_density(uu, g, vv, h);
            }
        }
        total
    }

    /// `<[f]_k, v>`.
    pub fn load_functional(&self, forcing: &dyn Forcing, k: usize, tau: f64, time_quad: usize, v: &[f64]) -> f64 {
        if forcing.is_zero() {
            return 0.0;
        }
        let space = self.space;
        let (times, tw) = clement_nodes(k, tau, time_quad);
        let mut total = 0.0;
        for c in 0..space.mesh().num_cells() {
            let (_, pts) = self.points(c);
            for pt in pts {
                let (vv, h) = space.velocity_at(v, c, pt.vals, &pt.grads);
                let mut d = LoadDensity::default();
                for (&t, &w) in times.iter().zip(&tw) {
                    d.axpy(w, &forcing.density(t, pt.x));
                }
                total += pt.w * (dot(d.f0, vv) + dot(d.f1[0], h[0]) + dot(d.f1[1], h[1]));
            }
        }
        total
    }

    /// Saddle system of the L² projection onto discretely divergence-free
    /// velocities: `(u, v) - (pr, div v) = (field, v)`, `(div u, q) = 0`.
    /// Dirichlet rows are not applied.
    pub fn projection_system(&self, field: &dyn Fn(Point2) -> [f64; 2]) -> SparseSystem {
        let space = self.space;
        let (nu_dofs, np) = (space.n_u(), space.n_p());
        let nloc = space.velocity_basis().len();
        let nl = 2 * nloc + 3;
        let mut m = self.pattern.clone();
        let mut rhs = vec![0.0; self.size()];
        for c in 0..space.mesh().num_cells() {
            let nodes = space.cell_velocity_nodes(c);
            let pd = space.cell_pressure_dofs(c);
            let mut local = [[0.0; 2 * MAX_LOCAL + 3]; 2 * MAX_LOCAL + 3];
            let mut lam = [0.0; 3];
            let (_, pts) = self.points(c);
            for pt in pts {
                let fv = field(pt.x);
                for a in 0..nloc {
                    let pa = pt.vals.values[a];
                    for i in 0..2 {
                        rhs[2 * nodes[a] + i] += pt.w * fv[i] * pa;
                    }
                    for b in 0..nloc {
                        let v = pt.w * pa * pt.vals.values[b];
                        local[2 * a][2 * b] += v;
                        local[2 * a + 1][2 * b + 1] += v;
                    }
                    for (k, &psi) in pt.psi.iter().enumerate() {
                        for i in 0..2 {
                            let v = -pt.w * psi * pt.grads[a][i];
                            local[2 * a + i][2 * nloc + k] += v;
                            local[2 * nloc + k][2 * a + i] += v;
                        }
                    }
                }
                for (k, &psi) in pt.psi.iter().enumerate() {
                    lam[k] += pt.w * psi;
                }
            }
            let global = |l: usize| if l < 2 * nloc { 2 * nodes[l / 2] + l % 2 } else { nu_dofs + pd[l - 2 * nloc] };
            scatter(&mut m, self.space, nl, &global, &local);
            for k in 0..3 {
                add_at(&mut m, nu_dofs + pd[k], nu_dofs + np, lam[k]);
                add_at(&mut m, nu_dofs + np, nu_dofs + pd[k], lam[k]);
            }
        }
        SparseSystem { matrix: m, rhs }
    }
}

/// Time at which a viscosity-dependent functional is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeSample {
    Instant(f64),
    Mean { k: usize, tau: f64, time_quad: usize },
}

/// `½ (u·∇)u·v - ½ (u·∇)v·u` from values and full gradients
/// `G[i][j] = ∂_j u_i`, `H[i][j] = ∂_j v_i`.
pub fn skew_density(u: [f64; 2], g: [[f64; 2]; 2], v: [f64; 2], h: [[f64; 2]; 2]) -> f64 {
    0.5 * (dot(mat_vec(g, u), v) - dot(mat_vec(h, u), u))
}

fn mat_vec(g: [[f64; 2]; 2], u: [f64; 2]) -> [f64; 2] {
    [dot(g[0], u), dot(g[1], u)]
}

fn value_at(space: &MixedSpace, coeffs: &[f64], cell: usize, vals: &LocalValues) -> [f64; 2] {
    let mut u = [0.0; 2];
    for (a, &node) in space.cell_velocity_nodes(cell).iter().enumerate() {
        u[0] += coeffs[2 * node] * vals.values[a];
        u[1] += coeffs[2 * node + 1] * vals.values[a];
    }
    u
}

fn add_at(m: &mut CsrMatrix, i: usize, j: usize, v: f64) {
    let k = m.position(i, j).expect("entry in pattern");
    m.values_mut()[k] += v;
}

/// Adds a local matrix; the last three local indices are pressure dofs,
/// whose diagonal block is empty.
/// Adds a local matrix. Rows of Dirichlet dofs are skipped: the pattern
/// holds only their diagonal, which is set afterwards.
fn scatter(m: &mut CsrMatrix, space: &MixedSpace, nl: usize, global: &dyn Fn(usize) -> usize, local: &[[f64; 2 * MAX_LOCAL + 3]; 2 * MAX_LOCAL + 3]) {
    let nv = nl - 3;
    for (r, row) in local.iter().enumerate().take(nl) {
        let gi = global(r);
        if r < nv && space.is_dirichlet(gi) {
            continue;
        }
        let start = m.row_ptr()[gi];
        let end = m.row_ptr()[gi + 1];
        let cols = if r < nv { 0..nl } else { 0..nv };
        for (l, v) in cols.map(|l| (l, row[l])) {
            let gj = global(l);
            let k = start + m.col_idx()[start..end].binary_search(&gj).expect("entry in pattern");
            m.values_mut()[k] += v;
        }
    }
}

/// Pattern of the saddle system of `space`. Rows of Dirichlet dofs hold
/// only the diagonal, so they add no fill to the factorization; the
/// pattern is symmetric apart from those rows.
pub fn saddle_pattern(space: &MixedSpace) -> CsrMatrix {
    let nn = space.n_u() / 2;
    let (nu, np) = (space.n_u(), space.n_p());
    let mut node_nodes: Vec<Vec<usize>> = vec![Vec::new(); nn];
    let mut node_p: Vec<Vec<usize>> = vec![Vec::new(); nn];
    let mut p_nodes: Vec<Vec<usize>> = vec![Vec::new(); np];
    for c in 0..space.mesh().num_cells() {
        let nodes = space.cell_velocity_nodes(c);
        let pd = space.cell_pressure_dofs(c);
        for &a in nodes {
            node_nodes[a].extend_from_slice(nodes);
            node_p[a].extend_from_slice(pd);
        }
        for &k in pd {
            p_nodes[k].extend_from_slice(nodes);
        }
    }
    for l in node_nodes.iter_mut().chain(node_p.iter_mut()).chain(p_nodes.iter_mut()) {
        l.sort_unstable();
        l.dedup();
    }
    let n = nu + np + 1;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    row_ptr.push(0);
    for a in 0..nn {
        for comp in 0..2 {
            if space.is_dirichlet(2 * a + comp) {
                col_idx.push(2 * a + comp);
                row_ptr.push(col_idx.len());
                continue;
            }
            for &b in &node_nodes[a] {
                col_idx.push(2 * b);
                col_idx.push(2 * b + 1);
            }
            col_idx.extend(node_p[a].iter().map(|&k| nu + k));
            row_ptr.push(col_idx.len());
        }
    }
    for k in 0..np {
        for &b in &p_nodes[k] {
            col_idx.push(2 * b);
            col_idx.push(2 * b + 1);
        }
        col_idx.push(nu + np);
        row_ptr.push(col_idx.len());
    }
    col_idx.extend(nu..nu + np);
    row_ptr.push(col_idx.len());
    CsrMatrix::from_pattern(n, n, row_ptr, col_idx)
}

/// Replaces the rows of Dirichlet dofs by identity rows with the trace at
/// time `t` on the right-hand side. Columns are not eliminated, so a
/// symmetric matrix becomes nonsymmetric in those rows.
pub fn apply_dirichlet(mut system: SparseSystem, space: &MixedSpace, trace: Trace<'_>, t: f64) -> SparseSystem {
    let points = space.node_points();
    for &d in space.dirichlet_dofs() {
        system.matrix.set_identity_row(d);
        system.rhs[d] = trace(t, points[d / 2])[d % 2];
    }
    system
}

/// One-shot residual of the step `prev → state` on interval `settings.k`.
pub fn assemble_residual(
    space: &MixedSpace,
    model: &StressModel,
    state: &DiscreteState,
    prev: &DiscreteState,
    settings: StepSettings,
    forcing: &dyn Forcing,
    trace: Trace<'_>,
) -> Result<Vec<f64>> {
    state.check(space)?;
    prev.check(space)?;
    let asm = Assembler::new(space);
    let data = asm.step_data(model, forcing, trace, settings)?;
    asm.residual(model, &data, &state.pack(), &prev.u)
}

/// One-shot Jacobian matching [`assemble_residual`].
pub fn assemble_jacobian(
    space: &MixedSpace,
    model: &StressModel,
    state: &DiscreteState,
    prev: &DiscreteState,
    settings: StepSettings,
    trace: Trace<'_>,
) -> Result<CsrMatrix> {
    state.check(space)?;
    prev.check(space)?;
    let asm = Assembler::new(space);
    let data = asm.step_data(model, &ZeroForcing, trace, settings)?;
    asm.jacobian(model, &data, &state.pack(), &prev.u)
}

/// Boxed forcing, handy for configuration-driven setups.
pub type BoxedForcing = Box<dyn Forcing>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::Viscosity;
    use crate::elements::ElementFamily;
    use crate::mesh::{build_rectangle_mesh, refine_times};
    use crate::nonlinear::sparse_factor_solve;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn base() -> crate::mesh::Mesh {
        build_rectangle_mesh(-1.0, -1.0, 1.0, 1.0, 2, 2).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn clement_mean_examples() {
        assert!((clement_mean(|_| 3.5, 4, 0.1, 3) - 3.5).abs() < 1e-14);
        assert!((clement_mean(|t| t, 3, 0.2, 1) - 2.5 * 0.2).abs() < 1e-15);
        let (k, tau) = (3usize, 0.1);
        let exact = ((k as f64 * tau).powi(3) - ((k as f64 - 1.0) * tau).powi(3)) / (3.0 * tau);
        assert!((clement_mean(|t| t * t, k, tau, 2) - exact).abs() < 1e-15);
    }

    #[test]
    fn zero_state_has_zero_residual() {
        let model = StressModel::new(2.2, 1e-4, Viscosity::Constant(1.0)).unwrap();
        for fam in ElementFamily::ALL {
            let space = MixedSpace::new(&base(), fam);
            let z = DiscreteState::zeros(&space, 0.0);
            let r = assemble_residual(&space, &model, &z, &z, StepSettings::new(0.1, 1, true), &ZeroForcing, &zero_trace).unwrap();
            assert!(r.iter().all(|&v| v == 0.0));
        }
    }

    fn fd_check(fam: ElementFamily, p: f64, convection: bool, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = base();
        let space = MixedSpace::new(&mesh, fam);
        let model = StressModel::new(p, 1e-2, Viscosity::field(|t, x| 1.0 + t * t + 0.3 * x.x * x.y)).unwrap();
        let asm = Assembler::new(&space);
        let trace = |t: f64, x: Point2| [t + x.y, -x.x];
        let forcing = BodyForce(|t: f64, x: Point2| [x.x * t, 1.0]);
        let settings = StepSettings::new(0.05, 2, convection);
        let data = asm.step_data(&model, &forcing, &trace, settings).unwrap();
        let x = random_vec(&mut rng, asm.size(), 1.0);
        let prev = random_vec(&mut rng, space.n_u(), 1.0);
        let d = random_vec(&mut rng, asm.size(), 1.0);
        let jac = asm.jacobian(&model, &data, &x, &prev).unwrap();
        let jd = jac.mul_vec(&d).unwrap();
        let h = 1e-6;
        let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - h * b).collect();
        let rp = asm.residual(&model, &data, &xp, &prev).unwrap();
        let rm = asm.residual(&model, &data, &xm, &prev).unwrap();
        let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let diff: Vec<f64> = fd.iter().zip(&jd).map(|(a, b)| a - b).collect();
        norm(&diff) / norm(&jd)
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for fam in ElementFamily::ALL {
            for p in [2.0, 2.2, 1.6] {
                for conv in [false, true] {
                    let e = fd_check(fam, p, conv, 3);
                    assert!(e < 1e-7, "{fam:?} p={p} conv={conv}: {e}");
                }
            }
        }
    }

    #[test]
    fn stokes_jacobian_is_symmetric_and_state_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = StressModel::newtonian(1.3);
        for fam in ElementFamily::ALL {
            let space = MixedSpace::new(&base(), fam);
            let asm = Assembler::new(&space);
            let data = asm.step_data(&model, &ZeroForcing, &zero_trace, StepSettings::new(0.1, 1, false)).unwrap();
            let prev = vec![0.0; space.n_u()];
            let j1 = asm.jacobian(&model, &data, &random_vec(&mut rng, asm.size(), 1.0), &prev).unwrap();
            let j2 = asm.jacobian(&model, &data, &random_vec(&mut rng, asm.size(), 5.0), &prev).unwrap();
            let scale = j1.max_abs();
            for (a, b) in j1.values().iter().zip(j2.values()) {
                assert!((a - b).abs() <= 1e-13 * scale);
            }
            // symmetric on the rows and columns not replaced by boundary rows
            let n = asm.size();
            for i in (0..n).filter(|&i| !(i < space.n_u() && space.is_dirichlet(i))) {
                let (cols, vals) = j1.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    if j < space.n_u() && space.is_dirichlet(j) {
                        continue;
                    }
                    assert!((v - j1.get(j, i)).abs() <= 1e-13 * scale, "{fam:?} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn doubling_tau_halves_mass_block() {
        let space = MixedSpace::new(&base(), ElementFamily::TaylorHood);
        let asm = Assembler::new(&space);
        let model = StressModel::newtonian(0.0);
        let x = vec![0.0; asm.size()];
        let prev = vec![0.0; space.n_u()];
        let j = |tau| {
            let data = asm.step_data(&model, &ZeroForcing, &zero_trace, StepSettings::new(tau, 1, false)).unwrap();
            asm.jacobian(&model, &data, &x, &prev).unwrap()
        };
        let (a, b) = (j(0.1), j(0.2));
        for i in (0..space.n_u()).filter(|&i| !space.is_dirichlet(i)) {
            for &c in a.row(i).0.iter().filter(|&&c| c < space.n_u()) {
                assert_eq!(a.get(i, c), 2.0 * b.get(i, c));
            }
        }
    }

    #[test]
    fn skew_form_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for fam in ElementFamily::ALL {
            let space = MixedSpace::new(&base(), fam);
            let asm = Assembler::new(&space);
            for _ in 0..10 {
                let u = random_vec(&mut rng, space.n_u(), 3.0);
                let v = random_vec(&mut rng, space.n_u(), 3.0);
                assert!(asm.convective_form(&u, &u).abs() < 1e-12 * (1.0 + norm(&u).powi(3)));
                assert!(asm.convective_form(&u, &v).abs() > 1e-8);
            }
        }
    }

    #[test]
    fn residual_is_affine_in_pressure() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let space = MixedSpace::new(&base(), ElementFamily::Mini);
        let asm = Assembler::new(&space);
        let model = StressModel::new(2.2, 1e-3, Viscosity::Constant(1.0)).unwrap();
        let data = asm.step_data(&model, &ZeroForcing, &zero_trace, StepSettings::new(0.1, 1, true)).unwrap();
        let prev = random_vec(&mut rng, space.n_u(), 1.0);
        let x = random_vec(&mut rng, asm.size(), 1.0);
        let mut dp = vec![0.0; asm.size()];
        for v in &mut dp[space.n_u()..] {
            *v = rng.gen_range(-1.0..1.0);
        }
        let at = |s: f64| {
            let y: Vec<f64> = x.iter().zip(&dp).map(|(a, b)| a + s * b).collect();
            asm.residual(&model, &data, &y, &prev).unwrap()
        };
        let (r0, r1, r2) = (at(0.0), at(1.0), at(2.0));
        for i in 0..r0.len() {
            assert!((r2[i] - 2.0 * r1[i] + r0[i]).abs() < 1e-12 * (1.0 + r0[i].abs()));
        }
    }

    #[test]
    fn divergence_has_full_rank_modulo_constants() {
        for fam in ElementFamily::ALL {
            let space = MixedSpace::new(&base(), fam);
            let asm = Assembler::new(&space);
            let b = asm.divergence_matrix();
            // drop boundary columns, then rank of B restricted to interior velocities
            let interior: Vec<usize> = (0..space.n_u()).filter(|&i| !space.is_dirichlet(i)).collect();
            let dense = b.to_dense();
            let mut m: Vec<Vec<f64>> = dense.iter().map(|row| interior.iter().map(|&j| row[j]).collect()).collect();
            let rank = dense_rank(&mut m);
            assert_eq!(rank, space.n_p() - 1, "{fam:?}");
        }
    }

    fn dense_rank(m: &mut [Vec<f64>]) -> usize {
        let rows = m.len();
        let cols = if rows == 0 { 0 } else { m[0].len() };
        let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut rank = 0;
        for c in 0..cols {
            let Some(p) = (rank..rows).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())) else { break };
            if m[p][c].abs() <= 1e-10 * scale {
                continue;
            }
            m.swap(rank, p);
            for i in rank + 1..rows {
                let f = m[i][c] / m[rank][c];
                for j in c..cols {
                    m[i][j] -= f * m[rank][j];
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn dirichlet_rows() {
        let space = MixedSpace::new(&base(), ElementFamily::TaylorHood);
        let asm = Assembler::new(&space);
        let sys = asm.projection_system(&|_| [0.0, 0.0]);
        let sys = apply_dirichlet(sys, &space, &|_, _| [1.0, 0.0], 0.0);
        for &d in space.dirichlet_dofs() {
            assert_eq!(sys.rhs[d], if d % 2 == 0 { 1.0 } else { 0.0 });
            let (cols, vals) = sys.matrix.row(d);
            for (&c, &v) in cols.iter().zip(vals) {
                assert_eq!(v, if c == d { 1.0 } else { 0.0 });
            }
        }
        let x = sparse_factor_solve(&sys.matrix, &sys.rhs).unwrap();
        // constant field is discretely divergence free, so the projection reproduces it
        for n in 0..space.n_u() / 2 {
            assert!((x[2 * n] - 1.0).abs() < 1e-12 && x[2 * n + 1].abs() < 1e-12);
        }
    }

    fn stokes_exact(x: Point2) -> ([f64; 2], [[f64; 2]; 2], f64) {
        // ψ = (1 - x²)² (1 - y²)², u = (∂_y ψ, -∂_x ψ)
        let (a, b) = (1.0 - x.x * x.x, 1.0 - x.y * x.y);
        let u = [-4.0 * a * a * b * x.y, 4.0 * a * b * b * x.x];
        let g00 = 16.0 * a * b * x.x * x.y;
        let g01 = -4.0 * a * a * (b - 2.0 * x.y * x.y);
        let g10 = 4.0 * b * b * (a - 2.0 * x.x * x.x);
        (u, [[g00, g01], [g10, -g00]], x.x * x.y)
    }

    #[test]
    fn stokes_consistency_improves_with_h() {
        let model = StressModel::newtonian(1.0);
        let forcing = DensityForce(|_t: f64, x: Point2| {
            let (_, g, p) = stokes_exact(x);
            let s = SymTensor2::sym(g);
            LoadDensity { f0: [0.0; 2], f1: [[s.a11 - p, s.a12], [s.a12, s.a22 - p]] }
        });
        let mut last = f64::INFINITY;
        for level in 1..4 {
            let mesh = refine_times(&base(), level);
            let space = MixedSpace::new(&mesh, ElementFamily::TaylorHood);
            let u = space.interpolate_velocity(|x| stokes_exact(x).0);
            let mut pr = space.interpolate_pressure(|x| stokes_exact(x).2);
            let mean: f64 = pr.iter().sum::<f64>() / pr.len() as f64;
            pr.iter_mut().for_each(|v| *v -= mean);
            let state = DiscreteState { u: u.clone(), pr, t: 0.1, multiplier: 0.0 };
            let prev = DiscreteState { u, pr: vec![0.0; space.n_p()], t: 0.0, multiplier: 0.0 };
            let r = assemble_residual(&space, &model, &state, &prev, StepSettings::new(0.1, 1, false), &forcing, &|_, x| stokes_exact(x).0).unwrap();
            let e = norm(&r[..space.n_u()]);
            assert!(e < 0.6 * last, "level {level}: {e} vs {last}");
            last = e;
        }
    }
}
