//! Legacy ASCII VTK output of one time level.
//!
//! Points are the velocity nodes without bubbles: the mesh vertices, then
//! the edge midpoints for quadratic families. Bubble functions vanish at
//! all of these, so the written vectors are the nodal coefficients. Cells
//! are linear triangles (type 5) for MINI and quadratic triangles (type 22)
//! otherwise. Pressure is written at the points for continuous pressure
//! spaces, as a cell centroid value for all families, and as the three
//! vertex values per cell for the discontinuous one.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use rothe_core::forms::DiscreteState;
use rothe_core::elements::MixedSpace;

use crate::error::{HarnessError, Result};

pub const VTK_TRIANGLE: u8 = 5;
pub const VTK_QUADRATIC_TRIANGLE: u8 = 22;

fn point_count(space: &MixedSpace) -> usize {
    (0..space.node_points().len()).take_while(|&n| !space.is_bubble_node(n)).count()
}

/// Local node order of one cell in VTK convention. VTK wants the midpoints
/// of (v0,v1), (v1,v2), (v2,v0); our local edge `e` is opposite vertex `e`.
fn connectivity(space: &MixedSpace, cell: usize) -> Vec<usize> {
    let n = space.cell_velocity_nodes(cell);
    if space.velocity_basis().has_edges() {
        vec![n[0], n[1], n[2], n[5], n[3], n[4]]
    } else {
        n[..3].to_vec()
    }
}

pub fn to_string(space: &MixedSpace, state: &DiscreteState, title: &str) -> String {
    let mesh = space.mesh();
    let np = point_count(space);
    let nc = mesh.num_cells();
    let quadratic = space.velocity_basis().has_edges();
    let per_cell = if quadratic { 6 } else { 3 };
    let mut s = String::with_capacity(64 * (np + nc));

    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.replace('\n', " "));
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {np} double");
    for p in &space.node_points()[..np] {
        let _ = writeln!(s, "{:?} {:?} 0", p.x, p.y);
    }
    let _ = writeln!(s, "CELLS {nc} {}", nc * (per_cell + 1));
    for c in 0..nc {
        let ids: Vec<String> = connectivity(space, c).iter().map(usize::to_string).collect();
        let _ = writeln!(s, "{per_cell} {}", ids.join(" "));
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    let ty = if quadratic { VTK_QUADRATIC_TRIANGLE } else { VTK_TRIANGLE };
    for _ in 0..nc {
        let _ = writeln!(s, "{ty}");
    }

    let _ = writeln!(s, "POINT_DATA {np}");
    let _ = writeln!(s, "VECTORS velocity double");
    for n in 0..np {
        let _ = writeln!(s, "{:?} {:?} 0", state.u[2 * n], state.u[2 * n + 1]);
    }
    let discontinuous = space.family().discontinuous_pressure();
    if !discontinuous {
        // pressure dofs are the vertices; midpoints get the P1 average
        let nv = mesh.num_vertices();
        let _ = writeln!(s, "SCALARS pressure double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for n in 0..np {
            let v = if n < nv {
                state.pr[n]
            } else {
                let [a, b] = mesh.edges()[n - nv];
                0.5 * (state.pr[a] + state.pr[b])
            };
            let _ = writeln!(s, "{v:?}");
        }
    }

    let _ = writeln!(s, "CELL_DATA {nc}");
    let _ = writeln!(s, "SCALARS pressure_centroid double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for c in 0..nc {
        let d = space.cell_pressure_dofs(c);
        let _ = writeln!(s, "{:?}", (state.pr[d[0]] + state.pr[d[1]] + state.pr[d[2]]) / 3.0);
    }
    if discontinuous {
        let _ = writeln!(s, "SCALARS pressure_vertices double 3");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for c in 0..nc {
            let d = space.cell_pressure_dofs(c);
            let _ = writeln!(s, "{:?} {:?} {:?}", state.pr[d[0]], state.pr[d[1]], state.pr[d[2]]);
        }
    }
    s
}

pub fn write(path: &Path, space: &MixedSpace, state: &DiscreteState, title: &str) -> Result<()> {
    std::fs::write(path, to_string(space, state, title)).map_err(|e| HarnessError::io(path, e))
}

/// The parts of a legacy unstructured-grid file this crate writes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VtkGrid {
    pub title: String,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub point_vectors: BTreeMap<String, Vec<[f64; 3]>>,
    /// Name to (components, flat values).
    pub point_scalars: BTreeMap<String, (usize, Vec<f64>)>,
    pub cell_scalars: BTreeMap<String, (usize, Vec<f64>)>,
}

/// Reader for the subset of the legacy format produced by [`to_string`].
pub fn parse(text: &str) -> Result<VtkGrid> {
    let err = |m: String| HarnessError::format("vtk", m);
    let mut lines = text.lines();
    if !lines.next().unwrap_or("").starts_with("# vtk DataFile") {
        return Err(err("missing version line".into()));
    }
    let mut grid = VtkGrid { title: lines.next().unwrap_or("").to_string(), ..Default::default() };
    if lines.next().map(str::trim) != Some("ASCII") {
        return Err(err("only ASCII files are supported".into()));
    }
    let mut tokens = lines.flat_map(str::split_whitespace);
    let mut next = || tokens.next().ok_or_else(|| err("unexpected end of file".into()));
    fn num<T: std::str::FromStr>(w: &str) -> Result<T> {
        w.parse().map_err(|_| HarnessError::format("vtk", format!("cannot parse `{w}`")))
    }

    let mut section = ""; // POINT_DATA or CELL_DATA
    let mut count = 0;
    while let Ok(kw) = next() {
        match kw {
            "DATASET" => {
                let ty = next()?;
                if ty != "UNSTRUCTURED_GRID" {
                    return Err(err(format!("unsupported dataset {ty}")));
                }
            }
            "POINTS" => {
                let n: usize = num(next()?)?;
                next()?;
                for _ in 0..n {
                    grid.points.push([num(next()?)?, num(next()?)?, num(next()?)?]);
                }
            }
            "CELLS" => {
                let n: usize = num(next()?)?;
                next()?;
                for _ in 0..n {
                    let k: usize = num(next()?)?;
                    grid.cells.push((0..k).map(|_| num(next()?)).collect::<Result<_>>()?);
                }
            }
            "CELL_TYPES" => {
                let n: usize = num(next()?)?;
                for _ in 0..n {
                    grid.cell_types.push(num(next()?)?);
                }
            }
            "POINT_DATA" | "CELL_DATA" => {
                section = if kw == "POINT_DATA" { "POINT_DATA" } else { "CELL_DATA" };
                count = num(next()?)?;
            }
            "VECTORS" => {
                let name = next()?.to_string();
                next()?;
                let v = (0..count).map(|_| Ok([num(next()?)?, num(next()?)?, num(next()?)?])).collect::<Result<Vec<_>>>()?;
                if section != "POINT_DATA" {
                    return Err(err("cell vectors are not supported".into()));
                }
                grid.point_vectors.insert(name, v);
            }
            "SCALARS" => {
                let name = next()?.to_string();
                next()?;
                let comps: usize = num(next()?)?;
                if next()? != "LOOKUP_TABLE" {
                    return Err(err(format!("scalars {name}: expected LOOKUP_TABLE")));
                }
                next()?;
                let v = (0..count * comps).map(|_| num(next()?)).collect::<Result<Vec<f64>>>()?;
                let target = if section == "POINT_DATA" { &mut grid.point_scalars } else { &mut grid.cell_scalars };
                target.insert(name, (comps, v));
            }
            other => return Err(err(format!("unexpected token `{other}`"))),
        }
    }
    if grid.cells.len() != grid.cell_types.len() {
        return Err(err("CELLS and CELL_TYPES disagree".into()));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rothe_core::elements::ElementFamily;
    use rothe_core::mesh::build_rectangle_mesh;

    #[test]
    fn two_cells_give_four_points() {
        let mesh = build_rectangle_mesh(0.0, 0.0, 1.0, 1.0, 1, 1).unwrap();
        let space = MixedSpace::new(&mesh, ElementFamily::Mini);
        let text = to_string(&space, &DiscreteState::zeros(&space, 0.0), "zero");
        let grid = parse(&text).unwrap();
        assert_eq!(grid.points.len(), 4);
        assert_eq!(grid.cells.len(), 2);
        assert_eq!(grid.cell_types, vec![VTK_TRIANGLE; 2]);
        assert!(grid.point_vectors["velocity"].iter().all(|v| *v == [0.0; 3]));
    }

    #[test]
    fn quadratic_midpoints_follow_vtk_order() {
        let mesh = build_rectangle_mesh(0.0, 0.0, 2.0, 1.0, 2, 1).unwrap();
        let space = MixedSpace::new(&mesh, ElementFamily::TaylorHood);
        let grid = parse(&to_string(&space, &DiscreteState::zeros(&space, 0.0), "th")).unwrap();
        for cell in &grid.cells {
            assert_eq!(cell.len(), 6);
            for (m, (a, b)) in [(3, (0, 1)), (4, (1, 2)), (5, (2, 0))] {
                let (pa, pb, pm) = (grid.points[cell[a]], grid.points[cell[b]], grid.points[cell[m]]);
                assert!(((pa[0] + pb[0]) / 2.0 - pm[0]).abs() < 1e-15);
                assert!(((pa[1] + pb[1]) / 2.0 - pm[1]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_binary_and_garbage() {
        assert!(parse("# vtk DataFile Version 3.0\nt\nBINARY\n").is_err());
        assert!(parse("hello").is_err());
    }
}
