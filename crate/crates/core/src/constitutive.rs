//! Power-law stress with (p, δ)-structure.
//!
//! `S(t, x, A) = ν(t, x) (δ + |A|)^{p-2} A` on symmetric 2×2 matrices with
//! the Frobenius product `A:B = Σ A_ij B_ij`.

use alloc::sync::Arc;
use core::fmt;
use core::ops::{Add, Mul, Sub};

use crate::mesh::Point2;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymTensor2 {
    pub const ZERO: SymTensor2 = SymTensor2 { a11: 0.0, a12: 0.0, a22: 0.0 };

    pub const fn new(a11: f64, a12: f64, a22: f64) -> Self {
        SymTensor2 { a11, a12, a22 }
    }

    pub const fn diag(a11: f64, a22: f64) -> Self {
        SymTensor2 { a11, a12: 0.0, a22 }
    }

    /// Symmetric part of a full gradient `G[i][j] = ∂u_i/∂x_j`.
    pub fn sym(g: [[f64; 2]; 2]) -> Self {
        SymTensor2 { a11: g[0][0], a12: 0.5 * (g[0][1] + g[1][0]), a22: g[1][1] }
    }

    pub fn ddot(self, o: SymTensor2) -> f64 {
        self.a11 * o.a11 + 2.0 * self.a12 * o.a12 + self.a22 * o.a22
    }

    /// `A : G` against a full (possibly non-symmetric) matrix.
    pub fn ddot_full(self, g: [[f64; 2]; 2]) -> f64 {
        self.a11 * g[0][0] + self.a12 * (g[0][1] + g[1][0]) + self.a22 * g[1][1]
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.ddot(self))
    }

    pub fn get(self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.a11,
            (1, 1) => self.a22,
            _ => self.a12,
        }
    }

    /// `A u`.
    pub fn apply(self, u: [f64; 2]) -> [f64; 2] {
        [self.a11 * u[0] + self.a12 * u[1], self.a12 * u[0] + self.a22 * u[1]]
    }
}

impl Add for SymTensor2 {
    type Output = SymTensor2;
    fn add(self, o: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.a11 + o.a11, self.a12 + o.a12, self.a22 + o.a22)
    }
}

impl Sub for SymTensor2 {
    type Output = SymTensor2;
    fn sub(self, o: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.a11 - o.a11, self.a12 - o.a12, self.a22 - o.a22)
    }
}

impl Mul<SymTensor2> for f64 {
    type Output = SymTensor2;
    fn mul(self, a: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self * a.a11, self * a.a12, self * a.a22)
    }
}

type ViscosityFn = dyn Fn(f64, Point2) -> f64 + Send + Sync;

/// Positive viscosity `ν(t, x)`.
#[derive(Clone)]
pub enum Viscosity {
    Constant(f64),
    Field(Arc<ViscosityFn>),
}

impl Viscosity {
    pub fn field(f: impl Fn(f64, Point2) -> f64 + Send + Sync + 'static) -> Self {
        Viscosity::Field(Arc::new(f))
    }

    pub fn eval(&self, t: f64, x: Point2) -> f64 {
        match self {
            Viscosity::Constant(v) => *v,
            Viscosity::Field(f) => f(t, x),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Viscosity::Constant(_))
    }
}

impl fmt::Debug for Viscosity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Viscosity::Constant(v) => write!(f, "Constant({v})"),
            Viscosity::Field(_) => f.write_str("Field(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StressModel {
    pub p: f64,
    pub delta: f64,
    pub nu: Viscosity,
}

/// The linear map `H ↦ c_id H + c_rank (A:H) A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressDerivative {
    pub c_id: f64,
    pub c_rank: f64,
    pub a: SymTensor2,
}

impl StressDerivative {
    pub fn apply(&self, h: SymTensor2) -> SymTensor2 {
        self.c_id * h + (self.c_rank * self.a.ddot(h)) * self.a
    }
}

impl StressModel {
    pub fn new(p: f64, delta: f64, nu: Viscosity) -> Result<Self> {
        if !(p > 1.0) || !(delta >= 0.0) || !p.is_finite() || !delta.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!("need p > 1 and delta >= 0, got p = {p}, delta = {delta}")));
        }
        Ok(StressModel { p, delta, nu })
    }

    pub fn newtonian(nu: f64) -> Self {
        StressModel { p: 2.0, delta: 0.0, nu: Viscosity::Constant(nu) }
    }

    pub fn stress(&self, t: f64, x: Point2, a: SymTensor2) -> SymTensor2 {
        self.stress_with_viscosity(self.nu.eval(t, x), a)
    }

    /// Stress for an already evaluated (or time-averaged) viscosity.
    pub fn stress_with_viscosity(&self, nu: f64, a: SymTensor2) -> SymTensor2 {
        let n = a.norm();
        if n == 0.0 {
            return SymTensor2::ZERO;
        }
        (nu * self.power(n, self.p - 2.0)) * a
    }

    pub fn stress_derivative(&self, t: f64, x: Point2, a: SymTensor2) -> Result<StressDerivative> {
        self.stress_derivative_with_viscosity(self.nu.eval(t, x), a)
    }

    pub fn stress_derivative_with_viscosity(&self, nu: f64, a: SymTensor2) -> Result<StressDerivative> {
        let n = a.norm();
        if n == 0.0 {
            if self.delta == 0.0 && self.p < 2.0 {
                return Err(Error::SingularConstitutivePoint);
            }
            let c_id = if self.delta == 0.0 && self.p > 2.0 { 0.0 } else { nu * self.power(0.0, self.p - 2.0) };
            return Ok(StressDerivative { c_id, c_rank: 0.0, a });
        }
        let base = self.delta + n;
        Ok(StressDerivative {
            c_id: nu * libm::pow(base, self.p - 2.0),
            c_rank: nu * (self.p - 2.0) * libm::pow(base, self.p - 3.0) / n,
            a,
        })
    }

    /// `F(A) = (δ + |A|)^{(p-2)/2} A`.
    pub fn natural_map(&self, a: SymTensor2) -> SymTensor2 {
        let n = a.norm();
        if n == 0.0 {
            return SymTensor2::ZERO;
        }
        self.power(n, 0.5 * (self.p - 2.0)) * a
    }

    fn power(&self, norm: f64, exponent: f64) -> f64 {
        if exponent == 0.0 {
            1.0
        } else {
            libm::pow(self.delta + norm, exponent)
        }
    }
}

/// Pointwise density of the skew-symmetrised convection form:
/// `½ (u⊗v):Du − ½ (u⊗u):Dv`.
pub fn temam_kernel(u: [f64; 2], du: SymTensor2, v: [f64; 2], dv: SymTensor2) -> f64 {
    let uv_du = dot(u, du.apply(v));
    let uu_dv = dot(u, dv.apply(u));
    0.5 * (uv_du - uu_dv)
}

pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}
