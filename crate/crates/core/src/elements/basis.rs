//! Scalar shape functions written in barycentric coordinates.
//!
//! Derivatives are taken with respect to `(λ0, λ1, λ2)` as if independent;
//! gradients follow from the chain rule with the cell's `∇λ_i`.

use crate::mesh::Point2;

/// Largest local scalar basis (P2 plus bubble).
pub const MAX_LOCAL: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarBasis {
    P1,
    P1Bubble,
    P2,
    P2Bubble,
}

impl ScalarBasis {
    pub const fn len(self) -> usize {
        match self {
            ScalarBasis::P1 => 3,
            ScalarBasis::P1Bubble => 4,
            ScalarBasis::P2 => 6,
            ScalarBasis::P2Bubble => 7,
        }
    }

    pub const fn has_bubble(self) -> bool {
        matches!(self, ScalarBasis::P1Bubble | ScalarBasis::P2Bubble)
    }

    pub const fn has_edges(self) -> bool {
        matches!(self, ScalarBasis::P2 | ScalarBasis::P2Bubble)
    }

    /// Values and barycentric partial derivatives at `l`.
    pub fn eval(self, l: [f64; 3]) -> LocalValues {
        let mut out = LocalValues { len: self.len(), values: [0.0; MAX_LOCAL], dl: [[0.0; 3]; MAX_LOCAL] };
        let quadratic = self.has_edges();
        for i in 0..3 {
            if quadratic {
                out.values[i] = l[i] * (2.0 * l[i] - 1.0);
                out.dl[i][i] = 4.0 * l[i] - 1.0;
            } else {
                out.values[i] = l[i];
                out.dl[i][i] = 1.0;
            }
        }
        let mut next = 3;
        if quadratic {
            for e in 0..3 {
                let (j, k) = ((e + 1) % 3, (e + 2) % 3);
                out.values[next] = 4.0 * l[j] * l[k];
                out.dl[next][j] = 4.0 * l[k];
                out.dl[next][k] = 4.0 * l[j];
                next += 1;
            }
        }
        if self.has_bubble() {
            out.values[next] = 27.0 * l[0] * l[1] * l[2];
            out.dl[next] = [27.0 * l[1] * l[2], 27.0 * l[0] * l[2], 27.0 * l[0] * l[1]];
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalValues {
    pub len: usize,
    pub values: [f64; MAX_LOCAL],
    pub dl: [[f64; 3]; MAX_LOCAL],
}

impl LocalValues {
    /// Gradients with respect to the reference coordinates `(ξ, η)`.
    pub fn reference_gradients(&self) -> [[f64; 2]; MAX_LOCAL] {
        let mut g = [[0.0; 2]; MAX_LOCAL];
        for (gi, d) in g.iter_mut().zip(&self.dl).take(self.len) {
            *gi = [d[1] - d[0], d[2] - d[0]];
        }
        g
    }

    pub fn physical_gradients(&self, geo: &CellGeometry) -> [[f64; 2]; MAX_LOCAL] {
        let mut g = [[0.0; 2]; MAX_LOCAL];
        for (gi, d) in g.iter_mut().zip(&self.dl).take(self.len) {
            for (k, gl) in geo.grad_lambda.iter().enumerate() {
                gi[0] += d[k] * gl[0];
                gi[1] += d[k] * gl[1];
            }
        }
        g
    }
}

/// Affine map data of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub vertices: [Point2; 3],
    /// Twice the signed area (determinant of the reference Jacobian).
    pub det: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl CellGeometry {
    pub fn new(vertices: [Point2; 3]) -> Self {
        let [p0, p1, p2] = vertices;
        let (ax, ay) = (p1.x - p0.x, p1.y - p0.y);
        let (bx, by) = (p2.x - p0.x, p2.y - p0.y);
        let det = ax * by - ay * bx;
        let g1 = [by / det, -bx / det];
        let g2 = [-ay / det, ax / det];
        let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
        CellGeometry { vertices, det, grad_lambda: [g0, g1, g2] }
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }

    pub fn map(&self, l: &[f64; 3]) -> Point2 {
        let [p0, p1, p2] = self.vertices;
        Point2::new(
            l[0] * p0.x + l[1] * p1.x + l[2] * p2.x,
            l[0] * p0.y + l[1] * p1.y + l[2] * p2.y,
        )
    }

    /// Inverse Jacobian transpose applied to a reference gradient.
    pub fn push_gradient(&self, reference: [f64; 2]) -> [f64; 2] {
        let g1 = self.grad_lambda[1];
        let g2 = self.grad_lambda[2];
        [reference[0] * g1[0] + reference[1] * g2[0], reference[0] * g1[1] + reference[1] * g2[1]]
    }
}
