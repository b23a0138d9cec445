//! Conforming triangulations of axis-aligned rectangles.
//!
//! Cells are stored as counter-clockwise vertex triples. Local edge `e` of a
//! cell is the edge opposite local vertex `e`, so edge 0 joins vertices 1 and
//! 2, edge 1 joins 2 and 0, and edge 2 joins 0 and 1. Regular refinement
//! keeps that convention: every boundary sub-edge carries the local edge
//! index of its parent edge.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, p: Point2) -> Point2 {
        Point2::new(self * p.x, self * p.y)
    }
}

/// Side of the bounding rectangle a boundary edge lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryTag {
    Left,
    Right,
    Bottom,
    Top,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Left => "left",
            BoundaryTag::Right => "right",
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::Top => "top",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "left" => Some(BoundaryTag::Left),
            "right" => Some(BoundaryTag::Right),
            "bottom" => Some(BoundaryTag::Bottom),
            "top" => Some(BoundaryTag::Top),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BoundaryEdge {
    pub cell: usize,
    pub local_edge: usize,
    pub tag: BoundaryTag,
}

/// Parent cell of every child cell after one regular refinement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefinementMap {
    pub parent: Vec<usize>,
}

impl RefinementMap {
    pub fn children_of(&self, parent: usize) -> impl Iterator<Item = usize> + '_ {
        self.parent
            .iter()
            .enumerate()
            .filter(move |(_, &p)| p == parent)
            .map(|(c, _)| c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point2>,
    cells: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    level: usize,
    h_max: f64,
    // derived
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<[usize; 3]>,
}

pub const fn local_edge_vertices(e: usize) -> [usize; 2] {
    [(e + 1) % 3, (e + 2) % 3]
}

impl Mesh {
    /// Assembles a mesh from raw parts without validating it; see [`Mesh::validate`].
    ///
    /// Vertex indices must be in range, everything else may be broken.
    pub fn from_parts(
        vertices: Vec<Point2>,
        cells: Vec<[usize; 3]>,
        mut boundary: Vec<BoundaryEdge>,
        level: usize,
    ) -> Result<Self> {
        let nv = vertices.len();
        if let Some(c) = cells.iter().position(|c| c.iter().any(|&v| v >= nv)) {
            return Err(Error::InvalidMesh(format!("cell {c} references a missing vertex")));
        }
        if let Some(b) = boundary.iter().find(|b| b.cell >= cells.len() || b.local_edge > 2) {
            return Err(Error::InvalidMesh(format!(
                "boundary entry ({}, {}) out of range",
                b.cell, b.local_edge
            )));
        }
        boundary.sort();

        let mut edges: Vec<[usize; 2]> = cells
            .iter()
            .flat_map(|c| {
                (0..3).map(move |e| {
                    let [i, j] = local_edge_vertices(e);
                    sorted_pair(c[i], c[j])
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let cell_edges = cells
            .iter()
            .map(|c| {
                let mut out = [0; 3];
                for (e, slot) in out.iter_mut().enumerate() {
                    let [i, j] = local_edge_vertices(e);
                    *slot = edges
                        .binary_search(&sorted_pair(c[i], c[j]))
                        .expect("edge listed");
                }
                out
            })
            .collect();

        let mut mesh = Mesh { vertices, cells, boundary, level, h_max: 0.0, edges, cell_edges };
        mesh.h_max = (0..mesh.cells.len()).map(|c| mesh.diameter(c)).fold(0.0, f64::max);
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Unique edges as sorted vertex pairs, in lexicographic order.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Global edge index of each local edge of each cell.
    pub fn cell_edges(&self) -> &[[usize; 3]] {
        &self.cell_edges
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn cell_points(&self, cell: usize) -> [Point2; 3] {
        let c = self.cells[cell];
        [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]]
    }

    pub fn signed_area(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cell_points(cell);
        0.5 * (b - a).cross(c - a)
    }

    /// Longest edge of the cell.
    pub fn diameter(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cell_points(cell);
        a.dist(b).max(b.dist(c)).max(c.dist(a))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.signed_area(c)).sum()
    }

    /// Edges flagged as boundary, as global edge indices (sorted, unique).
    pub fn boundary_edge_indices(&self) -> Vec<usize> {
        let mut out: Vec<usize> =
            self.boundary.iter().map(|b| self.cell_edges[b.cell][b.local_edge]).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Vertices touched by a tagged boundary edge (sorted, unique).
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary_edge_indices()
            .into_iter()
            .flat_map(|e| self.edges[e])
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Euclidean distance from `p` to the closed cell (zero inside).
    pub fn distance_to_cell(&self, cell: usize, p: Point2) -> f64 {
        triangle_distance(self.cell_points(cell), p)
    }

    /// Reports orientation, conformity and boundary-closure violations.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for c in 0..self.num_cells() {
            let area = self.signed_area(c);
            if !(area > 0.0) {
                out.push(Violation::NonPositiveArea { cell: c, area });
            }
        }

        let mut incidence = vec![Vec::new(); self.num_edges()];
        for (c, ce) in self.cell_edges.iter().enumerate() {
            for (e, &g) in ce.iter().enumerate() {
                incidence[g].push((c, e));
            }
        }
        let tagged: BTreeMap<(usize, usize), usize> = {
            let mut m = BTreeMap::new();
            for b in &self.boundary {
                *m.entry((b.cell, b.local_edge)).or_insert(0) += 1;
            }
            m
        };
        for (&(cell, local_edge), &count) in &tagged {
            if count > 1 {
                out.push(Violation::DuplicateBoundaryEntry { cell, local_edge });
            }
        }

        for (g, inc) in incidence.iter().enumerate() {
            match inc.len() {
                1 => {
                    let (cell, local_edge) = inc[0];
                    if !tagged.contains_key(&(cell, local_edge)) {
                        out.push(Violation::UntaggedBoundaryEdge { cell, local_edge });
                    }
                    // A vertex strictly inside an unmatched edge is a hanging node.
                    let [a, b] = self.edges[g];
                    let (pa, pb) = (self.vertices[a], self.vertices[b]);
                    let len = pa.dist(pb);
                    for (v, &pv) in self.vertices.iter().enumerate() {
                        if v == a || v == b {
                            continue;
                        }
                        let d = pb - pa;
                        let s = (pv - pa).dot(d) / d.dot(d);
                        let off = (pv - pa).cross(d).abs() / len;
                        if s > 1e-12 && s < 1.0 - 1e-12 && off <= 1e-12 * len {
                            out.push(Violation::HangingNode { vertex: v, edge: [a, b] });
                        }
                    }
                }
                2 => {
                    for &(cell, local_edge) in inc {
                        if tagged.contains_key(&(cell, local_edge)) {
                            out.push(Violation::TaggedInteriorEdge { cell, local_edge });
                        }
                    }
                }
                n => out.push(Violation::OverSharedEdge { edge: self.edges[g], cells: n }),
            }
        }
        out
    }
}

/// A problem reported by [`Mesh::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveArea { cell: usize, area: f64 },
    HangingNode { vertex: usize, edge: [usize; 2] },
    OverSharedEdge { edge: [usize; 2], cells: usize },
    UntaggedBoundaryEdge { cell: usize, local_edge: usize },
    TaggedInteriorEdge { cell: usize, local_edge: usize },
    DuplicateBoundaryEntry { cell: usize, local_edge: usize },
}

fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

pub(crate) fn triangle_distance(t: [Point2; 3], p: Point2) -> f64 {
    let orient = (t[1] - t[0]).cross(t[2] - t[0]).signum();
    let inside = (0..3).all(|e| {
        let [i, j] = local_edge_vertices(e);
        orient * (t[j] - t[i]).cross(p - t[i]) >= 0.0
    });
    if inside {
        return 0.0;
    }
    (0..3)
        .map(|e| {
            let [i, j] = local_edge_vertices(e);
            segment_distance(t[i], t[j], p)
        })
        .fold(f64::INFINITY, f64::min)
}

fn segment_distance(a: Point2, b: Point2, p: Point2) -> f64 {
    let d = b - a;
    let s = ((p - a).dot(d) / d.dot(d)).clamp(0.0, 1.0);
    p.dist(a + s * d)
}

/// Splits `[x0, x1] × [y0, y1]` into `nx × ny` rectangles, each cut into two
/// triangles along its bottom-left to top-right diagonal.
pub fn build_rectangle_mesh(x0: f64, y0: f64, x1: f64, y1: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if !(x1 > x0 && y1 > y0) || ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidMesh(format!(
            "extents ({x0}, {y0}) .. ({x1}, {y1}) do not span a rectangle"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidMesh(format!("cell counts {nx} x {ny} must be positive")));
    }
    let hx = (x1 - x0) / nx as f64;
    let hy = (y1 - y0) / ny as f64;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        // Pin the far side exactly so tags and areas do not drift.
        let y = if j == ny { y1 } else { y0 + j as f64 * hy };
        for i in 0..=nx {
            let x = if i == nx { x1 } else { x0 + i as f64 * hx };
            vertices.push(Point2::new(x, y));
        }
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(2 * nx * ny);
    let mut boundary = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            let lower = cells.len();
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
            // lower: edge 2 = (v00,v10) bottom, edge 0 = (v10,v11) right
            if j == 0 {
                boundary.push(BoundaryEdge { cell: lower, local_edge: 2, tag: BoundaryTag::Bottom });
            }
            if i == nx - 1 {
                boundary.push(BoundaryEdge { cell: lower, local_edge: 0, tag: BoundaryTag::Right });
            }
            // upper: edge 0 = (v11,v01) top, edge 1 = (v01,v00) left
            if j == ny - 1 {
                boundary.push(BoundaryEdge { cell: lower + 1, local_edge: 0, tag: BoundaryTag::Top });
            }
            if i == 0 {
                boundary.push(BoundaryEdge { cell: lower + 1, local_edge: 1, tag: BoundaryTag::Left });
            }
        }
    }
    Mesh::from_parts(vertices, cells, boundary, 0)
}

/// Regular 1:4 refinement through edge midpoints.
///
/// Child `4c + i` of cell `c = (a, b, c)` with midpoints `m_a, m_b, m_c`
/// (opposite the named vertex) is, in order, `(a, m_c, m_b)`,
/// `(m_c, b, m_a)`, `(m_b, m_a, c)` and the centre `(m_a, m_b, m_c)`.
pub fn refine_regular(mesh: &Mesh) -> (Mesh, RefinementMap) {
    let nv = mesh.num_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.extend(mesh.edges.iter().map(|&[a, b]| mesh.vertices[a].midpoint(mesh.vertices[b])));

    let mut cells = Vec::with_capacity(4 * mesh.num_cells());
    let mut parent = Vec::with_capacity(4 * mesh.num_cells());
    for (c, (v, e)) in mesh.cells.iter().zip(&mesh.cell_edges).enumerate() {
        let m = [nv + e[0], nv + e[1], nv + e[2]];
        cells.push([v[0], m[2], m[1]]);
        cells.push([m[2], v[1], m[0]]);
        cells.push([m[1], m[0], v[2]]);
        cells.push([m[0], m[1], m[2]]);
        parent.extend([c; 4]);
    }
    let boundary = mesh
        .boundary
        .iter()
        .flat_map(|b| {
            (0..3)
                .filter(move |&child| child != b.local_edge)
                .map(move |child| BoundaryEdge { cell: 4 * b.cell + child, local_edge: b.local_edge, tag: b.tag })
        })
        .collect();
    let refined = Mesh::from_parts(vertices, cells, boundary, mesh.level + 1).expect("refinement keeps indices valid");
    (refined, RefinementMap { parent })
}

/// Applies [`refine_regular`] `times` times.
pub fn refine_times(mesh: &Mesh, times: usize) -> Mesh {
    let mut m = mesh.clone();
    for _ in 0..times {
        m = refine_regular(&m).0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Mesh {
        build_rectangle_mesh(0.0, 0.0, 1.0, 1.0, 1, 1).unwrap()
    }

    #[test]
    fn single_square() {
        let m = unit_square();
        assert_eq!(m.num_cells(), 2);
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_edges(), 5);
        assert_eq!(m.h_max(), core::f64::consts::SQRT_2);
        assert!(m.validate().is_empty());
        assert_eq!(m.boundary_edges().len(), 4);
    }

    #[test]
    fn singular_base_mesh() {
        let m = build_rectangle_mesh(-1.0, -1.0, 1.0, 1.0, 2, 2).unwrap();
        assert_eq!(m.num_cells(), 8);
        assert_eq!(m.h_max(), core::f64::consts::SQRT_2);
        // h_0 = 2√2 is the diameter of the whole square, h_1 = h_0 / 2.
        assert_eq!(m.h_max(), 2.0 * core::f64::consts::SQRT_2 / 2.0);
    }

    #[test]
    fn vortex_mesh_size() {
        let m = build_rectangle_mesh(0.0, 0.0, 3.0, 1.0, 48, 16).unwrap();
        assert_eq!(m.num_cells(), 1536);
        assert!(m.validate().is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_rectangle_mesh(0.0, 0.0, 0.0, 1.0, 1, 1).is_err());
        assert!(build_rectangle_mesh(0.0, 0.0, 1.0, -1.0, 1, 1).is_err());
        assert!(build_rectangle_mesh(0.0, 0.0, 1.0, 1.0, 0, 1).is_err());
        assert!(build_rectangle_mesh(0.0, 0.0, 1.0, 1.0, 1, 0).is_err());
    }

    #[test]
    fn refinement_counts_and_size() {
        let m0 = unit_square();
        let (m1, map) = refine_regular(&m0);
        assert_eq!(m1.num_cells(), 8);
        assert_eq!(m1.h_max(), core::f64::consts::SQRT_2 / 2.0);
        assert!(m1.validate().is_empty());
        for p in 0..2 {
            assert_eq!(map.children_of(p).count(), 4);
        }
        let m2 = refine_regular(&m1).0;
        let m3 = refine_regular(&m2).0;
        assert_eq!((m2.num_cells(), m3.num_cells()), (32, 128));
        assert!(m3.validate().is_empty());
    }

    #[test]
    fn table_h_column() {
        let base = build_rectangle_mesh(-1.0, -1.0, 1.0, 1.0, 2, 2).unwrap();
        for n in 1..=5 {
            let m = refine_times(&base, n - 1);
            let expected = core::f64::consts::SQRT_2 / (1u32 << (n - 1)) as f64;
            assert_eq!(m.h_max(), expected, "level {n}");
        }
    }

    #[test]
    fn boundary_vertices_cover_rectangle_boundary() {
        let m = refine_times(&build_rectangle_mesh(0.0, 0.0, 3.0, 1.0, 3, 1).unwrap(), 2);
        let bv = m.boundary_vertices();
        for (v, p) in m.vertices().iter().enumerate() {
            let on = p.x == 0.0 || p.x == 3.0 || p.y == 0.0 || p.y == 1.0;
            assert_eq!(on, bv.binary_search(&v).is_ok(), "vertex {v} at {p:?}");
        }
        for b in m.boundary_edges() {
            let [i, j] = local_edge_vertices(b.local_edge);
            let pts = m.cell_points(b.cell);
            let mid = pts[i].midpoint(pts[j]);
            let expected = if mid.x == 0.0 {
                BoundaryTag::Left
            } else if mid.x == 3.0 {
                BoundaryTag::Right
            } else if mid.y == 0.0 {
                BoundaryTag::Bottom
            } else {
                BoundaryTag::Top
            };
            assert_eq!(b.tag, expected);
        }
    }

    #[test]
    fn flipped_cell_is_reported() {
        let m = unit_square();
        let mut cells = m.cells().to_vec();
        cells[1].swap(0, 1);
        let bad = Mesh::from_parts(m.vertices().to_vec(), cells, m.boundary_edges().to_vec(), 0).unwrap();
        let v = bad.validate();
        assert!(v.iter().any(|v| matches!(v, Violation::NonPositiveArea { cell: 1, .. })), "{v:?}");
    }

    #[test]
    fn hanging_node_is_reported() {
        // Refine only cell 0 of the 8-cell mesh of the unit square.
        let m = refine_regular(&unit_square()).0;
        let nv = m.num_vertices();
        let mut vertices = m.vertices().to_vec();
        let v = m.cells()[0];
        let e = m.cell_edges()[0];
        let mids: Vec<usize> = (0..3)
            .map(|k| {
                let [a, b] = m.edges()[e[k]];
                vertices.push(m.vertices()[a].midpoint(m.vertices()[b]));
                nv + k
            })
            .collect();
        let mut cells = vec![
            [v[0], mids[2], mids[1]],
            [mids[2], v[1], mids[0]],
            [mids[1], mids[0], v[2]],
            [mids[0], mids[1], mids[2]],
        ];
        cells.extend_from_slice(&m.cells()[1..]);
        let boundary: Vec<BoundaryEdge> = m
            .boundary_edges()
            .iter()
            .filter(|b| b.cell != 0)
            .map(|b| BoundaryEdge { cell: b.cell + 3, ..*b })
            .collect();
        let hanging = Mesh::from_parts(vertices, cells, boundary, 1).unwrap();
        let diag = hanging.validate();
        assert!(diag.iter().any(|v| matches!(v, Violation::HangingNode { .. })), "{diag:?}");
    }

    #[test]
    fn distance_to_cell() {
        let m = unit_square();
        // cell 0 is (0,0),(1,0),(1,1)
        assert_eq!(m.distance_to_cell(0, Point2::new(0.9, 0.1)), 0.0);
        assert!((m.distance_to_cell(0, Point2::new(2.0, 0.5)) - 1.0).abs() < 1e-15);
        assert!((m.distance_to_cell(0, Point2::new(0.0, 1.0)) - core::f64::consts::SQRT_2 / 2.0).abs() < 1e-15);
    }
}
