//! Mixed velocity/pressure spaces on a [`Mesh`].
//!
//! Global scalar velocity nodes are numbered vertices first, then edges, then
//! cell bubbles, each in index order. Vector dofs interleave the components:
//! dof `2 * node + component`. Continuous pressure lives on vertices;
//! discontinuous pressure stores three unshared dofs per cell, numbered
//! `3 * cell + local_vertex`.

pub mod basis;
pub mod quadrature;

use alloc::vec;
use alloc::vec::Vec;

pub use basis::{CellGeometry, LocalValues, ScalarBasis, MAX_LOCAL};
pub use quadrature::{quadrature, QuadratureRule};

use crate::mesh::{local_edge_vertices, Mesh, Point2};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementFamily {
    /// P1 + cubic bubble velocity, continuous P1 pressure.
    Mini,
    /// P2 velocity, continuous P1 pressure.
    TaylorHood,
    /// P2 + cubic bubble velocity, discontinuous P1 pressure.
    CrouzeixRaviartConforming,
}

impl ElementFamily {
    pub const ALL: [ElementFamily; 3] =
        [ElementFamily::Mini, ElementFamily::TaylorHood, ElementFamily::CrouzeixRaviartConforming];

    pub const fn velocity_basis(self) -> ScalarBasis {
        match self {
            ElementFamily::Mini => ScalarBasis::P1Bubble,
            ElementFamily::TaylorHood => ScalarBasis::P2,
            ElementFamily::CrouzeixRaviartConforming => ScalarBasis::P2Bubble,
        }
    }

    pub const fn discontinuous_pressure(self) -> bool {
        matches!(self, ElementFamily::CrouzeixRaviartConforming)
    }

    /// Degree of the complete polynomial part of the velocity space.
    pub const fn velocity_degree(self) -> usize {
        match self {
            ElementFamily::Mini => 1,
            _ => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ElementFamily::Mini => "mini",
            ElementFamily::TaylorHood => "taylor_hood",
            ElementFamily::CrouzeixRaviartConforming => "crouzeix_raviart",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mini" => Some(ElementFamily::Mini),
            "taylor_hood" => Some(ElementFamily::TaylorHood),
            "crouzeix_raviart" => Some(ElementFamily::CrouzeixRaviartConforming),
            _ => None,
        }
    }
}

/// Which field an interpolation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Velocity,
    Pressure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedSpace {
    mesh: Mesh,
    family: ElementFamily,
    velocity_nodes: Vec<[usize; MAX_LOCAL]>,
    node_points: Vec<Point2>,
    num_bubble_free_nodes: usize,
    pressure_dofs: Vec<[usize; 3]>,
    pressure_points: Vec<Point2>,
    dirichlet: Vec<usize>,
}

/// Velocity and pressure basis data at one point of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisEval {
    pub velocity: LocalValues,
    pub velocity_reference_gradients: [[f64; 2]; MAX_LOCAL],
    pub velocity_gradients: [[f64; 2]; MAX_LOCAL],
    pub pressure: LocalValues,
    pub pressure_reference_gradients: [[f64; 2]; MAX_LOCAL],
    pub pressure_gradients: [[f64; 2]; MAX_LOCAL],
}

impl MixedSpace {
    pub fn new(mesh: &Mesh, family: ElementFamily) -> Self {
        let basis = family.velocity_basis();
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let edge_offset = nv;
        let bubble_offset = if basis.has_edges() { nv + ne } else { nv };

        let mut node_points: Vec<Point2> = mesh.vertices().to_vec();
        if basis.has_edges() {
            node_points.extend(mesh.edges().iter().map(|&[a, b]| mesh.vertices()[a].midpoint(mesh.vertices()[b])));
        }
        let num_bubble_free_nodes = node_points.len();
        if basis.has_bubble() {
            node_points.extend((0..mesh.num_cells()).map(|c| {
                let [a, b, d] = mesh.cell_points(c);
                Point2::new((a.x + b.x + d.x) / 3.0, (a.y + b.y + d.y) / 3.0)
            }));
        }

        let velocity_nodes = mesh
            .cells()
            .iter()
            .zip(mesh.cell_edges())
            .enumerate()
            .map(|(c, (v, e))| {
                let mut nodes = [usize::MAX; MAX_LOCAL];
                nodes[..3].copy_from_slice(v);
                let mut next = 3;
                if basis.has_edges() {
                    for k in 0..3 {
                        nodes[next] = edge_offset + e[k];
                        next += 1;
                    }
                }
                if basis.has_bubble() {
                    nodes[next] = bubble_offset + c;
                }
                nodes
            })
            .collect();

        let (pressure_dofs, pressure_points) = if family.discontinuous_pressure() {
            let dofs = (0..mesh.num_cells()).map(|c| [3 * c, 3 * c + 1, 3 * c + 2]).collect();
            let pts = (0..mesh.num_cells()).flat_map(|c| mesh.cell_points(c)).collect();
            (dofs, pts)
        } else {
            (mesh.cells().to_vec(), mesh.vertices().to_vec())
        };

        let mut boundary_nodes: Vec<usize> = Vec::new();
        for b in mesh.boundary_edges() {
            let c = mesh.cells()[b.cell];
            let [i, j] = local_edge_vertices(b.local_edge);
            boundary_nodes.push(c[i]);
            boundary_nodes.push(c[j]);
            if basis.has_edges() {
                boundary_nodes.push(edge_offset + mesh.cell_edges()[b.cell][b.local_edge]);
            }
        }
        boundary_nodes.sort_unstable();
        boundary_nodes.dedup();
        let dirichlet = boundary_nodes.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect();

        MixedSpace {
            mesh: mesh.clone(),
            family,
            velocity_nodes,
            node_points,
            num_bubble_free_nodes,
            pressure_dofs,
            pressure_points,
            dirichlet,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn family(&self) -> ElementFamily {
        self.family
    }

    pub fn velocity_basis(&self) -> ScalarBasis {
        self.family.velocity_basis()
    }

    /// Number of velocity coefficients (both components).
    pub fn n_u(&self) -> usize {
        2 * self.node_points.len()
    }

    pub fn n_p(&self) -> usize {
        self.pressure_points.len()
    }

    /// Scalar velocity nodes of a cell, in local basis order.
    pub fn cell_velocity_nodes(&self, cell: usize) -> &[usize] {
        &self.velocity_nodes[cell][..self.velocity_basis().len()]
    }

    pub fn cell_pressure_dofs(&self, cell: usize) -> &[usize; 3] {
        &self.pressure_dofs[cell]
    }

    /// Position of each scalar velocity node (cell centroid for bubbles).
    pub fn node_points(&self) -> &[Point2] {
        &self.node_points
    }

    pub fn is_bubble_node(&self, node: usize) -> bool {
        node >= self.num_bubble_free_nodes
    }

    pub fn pressure_points(&self) -> &[Point2] {
        &self.pressure_points
    }

    /// Sorted velocity dofs fixed by the Dirichlet condition.
    pub fn dirichlet_dofs(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.dirichlet.binary_search(&dof).is_ok()
    }

    pub fn geometry(&self, cell: usize) -> CellGeometry {
        CellGeometry::new(self.mesh.cell_points(cell))
    }

    pub fn eval_basis(&self, cell: usize, point: [f64; 3]) -> Result<BasisEval> {
        if cell >= self.mesh.num_cells() {
            return Err(Error::CellOutOfRange { cell, cells: self.mesh.num_cells() });
        }
        let geo = self.geometry(cell);
        let velocity = self.velocity_basis().eval(point);
        let pressure = ScalarBasis::P1.eval(point);
        Ok(BasisEval {
            velocity_reference_gradients: velocity.reference_gradients(),
            velocity_gradients: velocity.physical_gradients(&geo),
            pressure_reference_gradients: pressure.reference_gradients(),
            pressure_gradients: pressure.physical_gradients(&geo),
            velocity,
            pressure,
        })
    }

    /// Nodal interpolation of a velocity field; bubble coefficients are zero.
    pub fn interpolate_velocity(&self, field: impl Fn(Point2) -> [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_u()];
        for (n, &p) in self.node_points.iter().enumerate().take(self.num_bubble_free_nodes) {
            let v = field(p);
            out[2 * n] = v[0];
            out[2 * n + 1] = v[1];
        }
        out
    }

    pub fn interpolate_pressure(&self, field: impl Fn(Point2) -> f64) -> Vec<f64> {
        self.pressure_points.iter().map(|&p| field(p)).collect()
    }

    /// Velocity value and gradient `G[i][j] = ∂u_i/∂x_j` at a point of a cell.
    pub fn velocity_at(&self, coeffs: &[f64], cell: usize, vals: &LocalValues, grads: &[[f64; 2]; MAX_LOCAL]) -> ([f64; 2], [[f64; 2]; 2]) {
        let mut u = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for (a, &node) in self.cell_velocity_nodes(cell).iter().enumerate() {
            for comp in 0..2 {
                let c = coeffs[2 * node + comp];
                u[comp] += c * vals.values[a];
                g[comp][0] += c * grads[a][0];
                g[comp][1] += c * grads[a][1];
            }
        }
        (u, g)
    }

    pub fn pressure_at(&self, coeffs: &[f64], cell: usize, vals: &LocalValues) -> f64 {
        self.pressure_dofs[cell].iter().enumerate().map(|(i, &d)| coeffs[d] * vals.values[i]).sum()
    }
}

/// Interpolates a velocity or pressure field given as a closure returning
/// up to two components; pressure uses the first.
pub fn interpolate(space: &MixedSpace, field: impl Fn(Point2) -> [f64; 2], component: Component) -> Vec<f64> {
    match component {
        Component::Velocity => space.interpolate_velocity(field),
        Component::Pressure => space.interpolate_pressure(|p| field(p)[0]),
    }
}
