//! Symmetric positive-weight quadrature on the reference triangle
//! `{(ξ, η) : ξ, η ≥ 0, ξ + η ≤ 1}` (area ½).
//!
//! Degrees up to 8 use the classical Dunavant point sets. Higher degrees use
//! a collapsed Gauss-Legendre product rule averaged over the six permutations
//! of the barycentric coordinates, which keeps the weights positive and makes
//! the rule fully symmetric.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, Result};

pub const MAX_DEGREE: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Barycentric coordinates `(λ0, λ1, λ2)` with `ξ = λ1`, `η = λ2`.
    pub points: Vec<[f64; 3]>,
    /// Weights on the reference triangle; they sum to ½.
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// Rule integrating every polynomial of total degree `degree` exactly.
pub fn quadrature(degree: usize) -> Result<QuadratureRule> {
    let mut b = Builder::default();
    let exact = match degree {
        1 => {
            b.centroid(1.0);
            1
        }
        2 => {
            b.orbit3(1.0 / 6.0, 1.0 / 3.0);
            2
        }
        3 | 4 => {
            b.orbit3(0.445_948_490_915_965, 0.223_381_589_678_011);
            b.orbit3(0.091_576_213_509_771, 0.109_951_743_655_322);
            4
        }
        5 => {
            let s15 = libm::sqrt(15.0);
            b.centroid(9.0 / 40.0);
            b.orbit3((6.0 - s15) / 21.0, (155.0 - s15) / 1200.0);
            b.orbit3((6.0 + s15) / 21.0, (155.0 + s15) / 1200.0);
            5
        }
        6 => {
            b.orbit3(0.249_286_745_170_910, 0.116_786_275_726_379);
            b.orbit3(0.063_089_014_491_502, 0.050_844_906_370_207);
            b.orbit6(0.053_145_049_844_817, 0.310_352_451_033_784, 0.082_851_075_618_374);
            6
        }
        7 | 8 => {
            b.centroid(0.144_315_607_677_787);
            b.orbit3(0.459_292_588_292_723, 0.095_091_634_267_285);
            b.orbit3(0.170_569_307_751_760, 0.103_217_370_534_718);
            b.orbit3(0.050_547_228_317_031, 0.032_458_497_623_198);
            b.orbit6(0.008_394_777_409_958, 0.263_112_829_634_638, 0.027_230_314_174_435);
            8
        }
        9..=MAX_DEGREE => {
            b.symmetrized_collapsed(degree);
            degree
        }
        _ => return Err(Error::UnsupportedDegree(degree)),
    };
    let Builder { points, weights } = b;
    // Tabulated weights are normalised to unit area; rescale to ½ and
    // remove the last ulp of drift so the weights sum to ½ exactly.
    let total: f64 = weights.iter().sum();
    let weights = weights.into_iter().map(|w| 0.5 * w / total).collect();
    Ok(QuadratureRule { points, weights, degree: exact })
}

/// Collapsed Gauss-Legendre product rule without symmetrisation: exact to
/// `degree` with `((degree + 3) / 2)²` positive weights. Cheaper than
/// [`quadrature`] at high degree, used where symmetry does not matter.
pub fn collapsed_rule(degree: usize) -> QuadratureRule {
    let n = (degree + 3) / 2;
    let (x, w) = gauss_legendre_unit(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let xi = x[i];
            let eta = (1.0 - x[i]) * x[j];
            points.push([1.0 - xi - eta, xi, eta]);
            weights.push(w[i] * w[j] * (1.0 - x[i]));
        }
    }
    QuadratureRule { points, weights, degree }
}

#[derive(Default)]
struct Builder {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl Builder {
    fn centroid(&mut self, w: f64) {
        self.points.push([1.0 / 3.0; 3]);
        self.weights.push(w);
    }

    fn orbit3(&mut self, a: f64, w: f64) {
        let c = 1.0 - 2.0 * a;
        for p in [[c, a, a], [a, c, a], [a, a, c]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    fn orbit6(&mut self, a: f64, b: f64, w: f64) {
        let c = 1.0 - a - b;
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    fn symmetrized_collapsed(&mut self, degree: usize) {
        // ξ = s, η = (1 - s) t with Jacobian (1 - s): degree + 1 in s.
        let n = (degree + 3) / 2;
        let (x, w) = gauss_legendre_unit(n);
        for i in 0..n {
            for j in 0..n {
                let xi = x[i];
                let eta = (1.0 - x[i]) * x[j];
                let weight = w[i] * w[j] * (1.0 - x[i]) * 2.0 / 6.0;
                let l = [1.0 - xi - eta, xi, eta];
                for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                    self.points.push([l[perm[0]], l[perm[1]], l[perm[2]]]);
                    self.weights.push(weight);
                }
            }
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let mut z = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x.push(z);
        w.push(2.0 / ((1.0 - z * z) * dp * dp));
    }
    // ascending order
    x.reverse();
    w.reverse();
    (x, w)
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (x.iter().map(|z| 0.5 * (z + 1.0)).collect(), w.iter().map(|v| 0.5 * v).collect())
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    // ∫_T ξ^a η^b = a! b! / (a + b + 2)!
    fn exact_monomial(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    fn integrate(rule: &QuadratureRule, f: impl Fn(f64, f64) -> f64) -> f64 {
        rule.iter().map(|(l, w)| w * f(l[1], l[2])).sum()
    }

    #[test]
    fn degree_one_is_centroid() {
        let r = quadrature(1).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.weights[0], 0.5);
        assert_eq!(r.points[0], [1.0 / 3.0; 3]);
    }

    #[test]
    fn x2y_with_degree_four() {
        let r = quadrature(4).unwrap();
        let v = integrate(&r, |x, y| x * x * y);
        assert!((v - 1.0 / 60.0).abs() < 1e-15, "{v}");
    }

    #[test]
    fn all_monomials_exact() {
        for d in 1..=MAX_DEGREE {
            let r = quadrature(d).unwrap();
            assert!(r.degree >= d);
            assert!(r.weights.iter().all(|&w| w > 0.0), "degree {d}");
            let sum: f64 = r.weights.iter().sum();
            assert!((sum - 0.5).abs() < 1e-15);
            for l in &r.points {
                assert!(l.iter().all(|&c| (-1e-15..=1.0 + 1e-15).contains(&c)));
                assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
            for a in 0..=d as u32 {
                for b in 0..=(d as u32 - a) {
                    let got = integrate(&r, |x, y| libm::pow(x, a as f64) * libm::pow(y, b as f64));
                    let want = exact_monomial(a, b);
                    assert!(
                        ((got - want) / want).abs() < 1e-13,
                        "degree {d} monomial x^{a} y^{b}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn collapsed_rule_is_exact() {
        let r = collapsed_rule(12);
        assert_eq!(r.len(), 49);
        for a in 0..=12u32 {
            for b in 0..=(12 - a) {
                let got = integrate(&r, |x, y| libm::pow(x, a as f64) * libm::pow(y, b as f64));
                assert!(((got - exact_monomial(a, b)) / exact_monomial(a, b)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rules_are_symmetric() {
        for d in 1..=MAX_DEGREE {
            let r = quadrature(d).unwrap();
            // the moment of λ0 must equal those of λ1 and λ2
            let m: [f64; 3] = core::array::from_fn(|i| r.iter().map(|(l, w)| w * l[i] * l[i] * l[(i + 1) % 3]).sum());
            assert!((m[0] - m[1]).abs() < 1e-15 && (m[1] - m[2]).abs() < 1e-15, "degree {d}: {m:?}");
        }
    }

    #[test]
    fn unsupported_degrees() {
        assert_eq!(quadrature(0), Err(Error::UnsupportedDegree(0)));
        assert_eq!(quadrature(15), Err(Error::UnsupportedDegree(15)));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..10 {
            let (x, w) = gauss_legendre_unit(n);
            for k in 0..(2 * n) {
                let v: f64 = x.iter().zip(&w).map(|(x, w)| w * libm::pow(*x, k as f64)).sum();
                assert!((v - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }
}
