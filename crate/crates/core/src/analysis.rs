//! Errors against exact solutions, EOC tables, and the quadrature used to
//! integrate errors of solutions with a point singularity.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::constitutive::{StressModel, SymTensor2};
use crate::elements::quadrature::collapsed_rule;
use crate::elements::{ElementFamily, MixedSpace, QuadratureRule};
use crate::forms::{Forcing, LoadDensity};
use crate::mesh::{Mesh, Point2};
use crate::timestepping::Trajectory;
use crate::{Error, Result};

/// Closed-form solution of the continuous problem.
pub trait ExactSolution: Send + Sync {
    fn velocity(&self, t: f64, x: Point2) -> [f64; 2];

    fn pressure(&self, t: f64, x: Point2) -> f64;

    /// `G[i][j] = ∂_j u_i`.
    fn gradient(&self, t: f64, x: Point2) -> [[f64; 2]; 2];

    fn time_derivative(&self, t: f64, x: Point2) -> [f64; 2];

    /// Location of a point singularity of the gradient, if any.
    fn singular_point(&self) -> Option<Point2> {
        None
    }
}

/// Load that makes `exact` a solution: `f0 = ∂_t u + (u·∇)u`,
/// `f1 = S(t, Du) - p I`, paired weakly with the test function.
pub struct ExactForcing<'a, E: ?Sized> {
    pub exact: &'a E,
    pub model: &'a StressModel,
    pub convection: bool,
}

impl<E: ExactSolution + ?Sized> Forcing for ExactForcing<'_, E> {
    fn density(&self, t: f64, x: Point2) -> LoadDensity {
        let g = self.exact.gradient(t, x);
        let mut f0 = self.exact.time_derivative(t, x);
        if self.convection {
            let u = self.exact.velocity(t, x);
            for (i, f) in f0.iter_mut().enumerate() {
                *f += g[i][0] * u[0] + g[i][1] * u[1];
            }
        }
        let s = self.model.stress(t, x, SymTensor2::sym(g));
        let p = self.exact.pressure(t, x);
        LoadDensity { f0, f1: [[s.a11 - p, s.a12], [s.a12, s.a22 - p]] }
    }
}

/// Subdivision thresholds for error integration near a singular point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanSettings {
    pub base_degree: usize,
    /// Cells closer than this are split once (4 sub-triangles).
    pub near: f64,
    /// Cells closer than this are split twice (16 sub-triangles).
    pub very_near: f64,
    /// Extra levels of graded splitting towards the singular point inside
    /// cells that contain it.
    pub graded_depth: usize,
}

impl Default for PlanSettings {
    fn default() -> Self {
        PlanSettings { base_degree: 12, near: 0.25, very_near: 0.1, graded_depth: 24 }
    }
}

/// Sub-triangle of a cell, vertices in the cell's barycentric coordinates.
pub type SubTriangle = [[f64; 3]; 3];

const WHOLE: SubTriangle = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn split(t: &SubTriangle) -> [SubTriangle; 4] {
    let mid = |a: usize, b: usize| core::array::from_fn::<f64, 3, _>(|i| 0.5 * (t[a][i] + t[b][i]));
    let (m01, m12, m02) = (mid(0, 1), mid(1, 2), mid(0, 2));
    [[t[0], m01, m02], [m01, t[1], m12], [m02, m12, t[2]], [m01, m12, m02]]
}

fn contains(t: &SubTriangle, l: [f64; 3]) -> bool {
    // barycentric coordinates of l w.r.t. t, solved from the 2x2 system in (λ1, λ2)
    let (a, b, c) = (t[0], t[1], t[2]);
    let m = [[b[1] - a[1], c[1] - a[1]], [b[2] - a[2], c[2] - a[2]]];
    let r = [l[1] - a[1], l[2] - a[2]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let s = (r[0] * m[1][1] - r[1] * m[0][1]) / det;
    let u = (m[0][0] * r[1] - m[1][0] * r[0]) / det;
    let eps = 1e-12;
    s >= -eps && u >= -eps && s + u <= 1.0 + eps
}

/// Sub-triangles used to integrate over `cell` when the integrand may be
/// singular at `point`. Far cells get the whole cell.
pub fn singular_quadrature(mesh: &Mesh, cell: usize, point: Option<Point2>, settings: &PlanSettings) -> Vec<SubTriangle> {
    let mut tris = vec![WHOLE];
    let Some(p) = point else { return tris };
    let d = mesh.distance_to_cell(cell, p);
    let levels = if d < settings.very_near {
        2
    } else if d < settings.near {
        1
    } else {
        0
    };
    for _ in 0..levels {
        tris = tris.iter().flat_map(split).collect();
    }
    if d == 0.0 {
        let geo = crate::elements::CellGeometry::new(mesh.cell_points(cell));
        let v = geo.vertices;
        let rel = |q: Point2| -> f64 { (q.x - v[0].x) * geo.grad_lambda[1][0] + (q.y - v[0].y) * geo.grad_lambda[1][1] };
        let rel2 = |q: Point2| -> f64 { (q.x - v[0].x) * geo.grad_lambda[2][0] + (q.y - v[0].y) * geo.grad_lambda[2][1] };
        let (l1, l2) = (rel(p), rel2(p));
        let lp = [1.0 - l1 - l2, l1, l2];
        for _ in 0..settings.graded_depth {
            let mut next = Vec::with_capacity(tris.len() + 3);
            for t in &tris {
                if contains(t, lp) {
                    next.extend(split(t));
                } else {
                    next.push(*t);
                }
            }
            tris = next;
        }
    }
    tris
}

/// Quadrature points of a whole mesh for error integrals, in the cell's
/// barycentric coordinates with physical weights.
#[derive(Debug, Clone)]
pub struct ErrorQuadrature {
    cells: Vec<Vec<([f64; 3], f64)>>,
}

impl ErrorQuadrature {
    pub fn new(mesh: &Mesh, point: Option<Point2>, settings: &PlanSettings) -> Self {
        let rule = collapsed_rule(settings.base_degree);
        let cells = (0..mesh.num_cells())
            .map(|c| {
                let det = 2.0 * mesh.signed_area(c);
                let mut pts = Vec::new();
                for t in singular_quadrature(mesh, c, point, settings) {
                    push_mapped(&rule, &t, det, &mut pts);
                }
                pts
            })
            .collect();
        ErrorQuadrature { cells }
    }

    pub fn cell(&self, c: usize) -> &[([f64; 3], f64)] {
        &self.cells[c]
    }

    pub fn num_points(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    /// `∫_Ω f`.
    pub fn integrate(&self, mesh: &Mesh, f: impl Fn(Point2) -> f64) -> f64 {
        let mut total = 0.0;
        for (c, pts) in self.cells.iter().enumerate() {
            let geo = crate::elements::CellGeometry::new(mesh.cell_points(c));
            for (l, w) in pts {
                total += w * f(geo.map(l));
            }
        }
        total
    }
}

fn push_mapped(rule: &QuadratureRule, t: &SubTriangle, det: f64, out: &mut Vec<([f64; 3], f64)>) {
    // ratio of sub-triangle area to cell area in barycentric coordinates
    let (a, b, c) = (t[0], t[1], t[2]);
    let ratio = ((b[1] - a[1]) * (c[2] - a[2]) - (c[1] - a[1]) * (b[2] - a[2])).abs();
    for (r, w) in rule.iter() {
        let l = core::array::from_fn(|i| r[0] * a[i] + r[1] * b[i] + r[2] * c[i]);
        out.push((l, w * ratio * det));
    }
}

/// Per-level spatial error norms of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelErrors {
    /// `‖u(t_k) - u^k‖_{L²}`.
    pub l2: Vec<f64>,
    /// `‖F(Du(t_k)) - F(Du^k)‖_{L²}`.
    pub f: Vec<f64>,
    pub tau: f64,
}

/// How the time sum in the F-error is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorVariant {
    /// `(Σ τ ‖·‖²)^{1/2}`, a discrete `L²(Q_T)` norm.
    #[default]
    Squared,
    /// `(Σ τ ‖·‖)^{1/2}`.
    AsWritten,
}

impl ErrorVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorVariant::Squared => "squared",
            ErrorVariant::AsWritten => "as_written",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "squared" => Some(ErrorVariant::Squared),
            "as_written" => Some(ErrorVariant::AsWritten),
            _ => None,
        }
    }
}

impl LevelErrors {
    /// `max_k ‖u(t_k) - u^k‖`.
    pub fn l2_time_max(&self) -> f64 {
        self.l2.iter().fold(0.0, |m, &v| m.max(v))
    }

    pub fn f_error(&self, variant: ErrorVariant) -> f64 {
        let sum: f64 = match variant {
            ErrorVariant::Squared => self.f.iter().map(|v| self.tau * v * v).sum(),
            ErrorVariant::AsWritten => self.f.iter().map(|v| self.tau * v).sum(),
        };
        libm::sqrt(sum)
    }
}

/// Spatial errors at every level `t_k = kτ`, `k = 0..K`.
pub fn level_errors(traj: &Trajectory, exact: &dyn ExactSolution, space: &MixedSpace, model: &StressModel, quad: &ErrorQuadrature) -> LevelErrors {
    let levels = traj.states.len();
    let times: Vec<f64> = (0..levels).map(|k| traj.grid.time(k)).collect();
    let mut l2 = vec![0.0; levels];
    let mut f = vec![0.0; levels];
    let basis = space.velocity_basis();
    let mesh = space.mesh();
    for c in 0..mesh.num_cells() {
        let geo = space.geometry(c);
        for &(l, w) in quad.cell(c) {
            let x = geo.map(&l);
            let vals = basis.eval(l);
            let grads = vals.physical_gradients(&geo);
            for (k, state) in traj.states.iter().enumerate() {
                let (uh, gh) = space.velocity_at(&state.u, c, &vals, &grads);
                let u = exact.velocity(times[k], x);
                let g = exact.gradient(times[k], x);
                let (e0, e1) = (u[0] - uh[0], u[1] - uh[1]);
                l2[k] += w * (e0 * e0 + e1 * e1);
                let d = model.natural_map(SymTensor2::sym(g)) - model.natural_map(SymTensor2::sym(gh));
                f[k] += w * d.ddot(d);
            }
        }
    }
    LevelErrors { l2: l2.into_iter().map(libm::sqrt).collect(), f: f.into_iter().map(libm::sqrt).collect(), tau: traj.grid.tau() }
}

/// `max_{0≤k≤K} ‖u(t_k) - u^k‖_{L²}`.
pub fn error_l2_time_max(traj: &Trajectory, exact: &dyn ExactSolution, space: &MixedSpace, model: &StressModel, quad: &ErrorQuadrature) -> f64 {
    level_errors(traj, exact, space, model, quad).l2_time_max()
}

/// The F-error summed over `k = 0..K`.
pub fn error_f(traj: &Trajectory, exact: &dyn ExactSolution, space: &MixedSpace, model: &StressModel, quad: &ErrorQuadrature, variant: ErrorVariant) -> f64 {
    level_errors(traj, exact, space, model, quad).f_error(variant)
}

/// `log(e_n / e_{n-1}) / log(h_n / h_{n-1})` for consecutive pairs.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() {
        return Err(Error::DimensionMismatch { expected: hs.len(), found: errors.len() });
    }
    if errors.len() < 2 {
        return Err(Error::InvalidParameter("need at least two levels".into()));
    }
    if errors.iter().chain(hs).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter("errors and mesh sizes must be positive".into()));
    }
    if hs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("mesh sizes must decrease".into()));
    }
    Ok(errors.windows(2).zip(hs.windows(2)).map(|(e, h)| libm::log(e[1] / e[0]) / libm::log(h[1] / h[0])).collect())
}

/// Errors below this are treated as round-off; their EOC is not reported.
pub const EOC_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub e_l2: f64,
    pub e_f: f64,
    pub eoc_l2: Option<f64>,
    pub eoc_f: Option<f64>,
    pub eoc_tot: Option<f64>,
}

impl ConvergenceRow {
    pub fn e_tot(&self) -> f64 {
        self.e_l2 + self.e_f
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportMeta {
    pub family: ElementFamily,
    pub p: f64,
    pub delta: f64,
    pub tau: f64,
    pub steps: usize,
    pub variant: ErrorVariant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub meta: ReportMeta,
    pub rows: Vec<ConvergenceRow>,
}

fn pair_eoc(prev: Option<&ConvergenceRow>, h: f64, e: f64, pick: fn(&ConvergenceRow) -> f64) -> Option<f64> {
    let prev = prev?;
    let e0 = pick(prev);
    if e0 < EOC_FLOOR || e < EOC_FLOOR || !(h < prev.h) {
        return None;
    }
    Some(libm::log(e / e0) / libm::log(h / prev.h))
}

impl ConvergenceReport {
    pub fn new(meta: ReportMeta) -> Self {
        ConvergenceReport { meta, rows: Vec::new() }
    }

    /// Appends level `n` and fills its EOC columns from the previous row.
    pub fn push(&mut self, n: usize, h: f64, e_l2: f64, e_f: f64) {
        let prev = self.rows.last();
        let row = ConvergenceRow {
            n,
            h,
            e_l2,
            e_f,
            eoc_l2: pair_eoc(prev, h, e_l2, |r| r.e_l2),
            eoc_f: pair_eoc(prev, h, e_f, |r| r.e_f),
            eoc_tot: pair_eoc(prev, h, e_l2 + e_f, |r| r.e_tot()),
        };
        self.rows.push(row);
    }

    /// CSV with a leading `#` metadata line. EOC cells are empty on the
    /// first row and `-` where an error is below [`EOC_FLOOR`].
    pub fn to_csv(&self) -> String {
        let m = &self.meta;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# family={} p={} delta={} tau={} K={} e_F={}",
            m.family.as_str(),
            m.p,
            m.delta,
            m.tau,
            m.steps,
            m.variant.as_str()
        );
        s.push_str("n,h,e_L2,EOC_L2,e_F,EOC_F,EOC_tot\n");
        for (i, r) in self.rows.iter().enumerate() {
            let cell = |v: Option<f64>| match (i, v) {
                (0, _) => String::new(),
                (_, Some(v)) => alloc::format!("{v:.3}"),
                (_, None) => "-".into(),
            };
            let _ = writeln!(s, "{},{:.6e},{:.6e},{},{:.6e},{},{}", r.n, r.h, r.e_l2, cell(r.eoc_l2), r.e_f, cell(r.eoc_f), cell(r.eoc_tot));
        }
        s
    }
}

/// Plain convection functional `-∫ (u⊗u):Dv`.
pub fn plain_convection(space: &MixedSpace, quad: &ErrorQuadrature, u: &[f64], v: &[f64]) -> f64 {
    let basis = space.velocity_basis();
    let mut total = 0.0;
    for c in 0..space.mesh().num_cells() {
        let geo = space.geometry(c);
        for &(l, w) in quad.cell(c) {
            let vals = basis.eval(l);
            let grads = vals.physical_gradients(&geo);
            let (uu, _) = space.velocity_at(u, c, &vals, &grads);
            let (_, h) = space.velocity_at(v, c, &vals, &grads);
            let dv = SymTensor2::sym(h);
            total -= w * (uu[0] * dv.apply(uu)[0] + uu[1] * dv.apply(uu)[1]);
        }
    }
    total
}

/// `∫_{(-1,1)²} |x|^β dx` from the radial representation
/// `8/(β+2) ∫_0^{π/4} cos(θ)^{-(β+2)} dθ`, for `β > -2`.
pub fn radial_square_integral(beta: f64) -> f64 {
    let (x, w) = crate::elements::quadrature::gauss_legendre_unit(20);
    let panels = 64;
    let h = core::f64::consts::FRAC_PI_4 / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        for (s, wi) in x.iter().zip(&w) {
            let th = (p as f64 + s) * h;
            sum += h * wi * libm::pow(libm::cos(th), -(beta + 2.0));
        }
    }
    8.0 / (beta + 2.0) * sum
}
