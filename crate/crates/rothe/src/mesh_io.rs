//! Plain text mesh files.
//!
//! ```text
//! triangles 2d
//! <vertex count>
//! x y                    (one line per vertex)
//! <cell count>
//! i j k                  (0-based, counter-clockwise)
//! <boundary count>
//! cell edge tag          (edge e is opposite local vertex e; tag left|right|bottom|top)
//! ```

use std::fmt::Write;

use rothe_core::mesh::{BoundaryEdge, BoundaryTag, Mesh};
use rothe_core::Point2;

use crate::error::{HarnessError, Result};

const HEADER: &str = "triangles 2d";

pub fn to_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(s, "{}", mesh.num_vertices());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?}", v.x, v.y);
    }
    let _ = writeln!(s, "{}", mesh.num_cells());
    for [a, b, c] in mesh.cells() {
        let _ = writeln!(s, "{a} {b} {c}");
    }
    let _ = writeln!(s, "{}", mesh.boundary_edges().len());
    for b in mesh.boundary_edges() {
        let _ = writeln!(s, "{} {} {}", b.cell, b.local_edge, b.tag.as_str());
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<Vec<&'a str>> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let words: Vec<&str> = l.split_whitespace().collect();
            if !words.is_empty() {
                return Ok(words);
            }
        }
        Err(self.err("unexpected end of file"))
    }

    fn err(&self, msg: impl std::fmt::Display) -> HarnessError {
        HarnessError::format("mesh", format!("line {}: {msg}", self.line))
    }

    fn count(&mut self) -> Result<usize> {
        let w = self.next()?;
        match w.as_slice() {
            [n] => n.parse().map_err(|_| self.err(format!("bad count `{n}`"))),
            _ => Err(self.err("expected a count")),
        }
    }

    fn parse<T: std::str::FromStr>(&self, w: &str) -> Result<T> {
        w.parse().map_err(|_| self.err(format!("cannot parse `{w}`")))
    }
}

pub fn parse(text: &str) -> Result<Mesh> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    if lines.next()?.join(" ") != HEADER {
        return Err(lines.err(format!("expected `{HEADER}`")));
    }
    let nv = lines.count()?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let w = lines.next()?;
        let [x, y] = w.as_slice() else { return Err(lines.err("expected `x y`")) };
        vertices.push(Point2::new(lines.parse(x)?, lines.parse(y)?));
    }
    let nc = lines.count()?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let w = lines.next()?;
        let [a, b, c] = w.as_slice() else { return Err(lines.err("expected `i j k`")) };
        cells.push([lines.parse(a)?, lines.parse(b)?, lines.parse(c)?]);
    }
    let nb = lines.count()?;
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let w = lines.next()?;
        let [c, e, t] = w.as_slice() else { return Err(lines.err("expected `cell edge tag`")) };
        let tag = BoundaryTag::parse(t).ok_or_else(|| lines.err(format!("unknown tag `{t}`")))?;
        boundary.push(BoundaryEdge { cell: lines.parse(c)?, local_edge: lines.parse(e)?, tag });
    }
    Mesh::from_parts(vertices, cells, boundary, 0).map_err(|e| lines.err(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rothe_core::mesh::{build_rectangle_mesh, refine_times};

    #[test]
    fn round_trip() {
        let mesh = refine_times(&build_rectangle_mesh(-1.0, 0.0, 2.0, 1.3, 3, 2).unwrap(), 1);
        let text = to_string(&mesh);
        let back = parse(&text).unwrap();
        assert_eq!(back.vertices(), mesh.vertices());
        assert_eq!(back.cells(), mesh.cells());
        assert_eq!(back.boundary_edges(), mesh.boundary_edges());
        assert!(back.validate().is_empty());
        assert_eq!(to_string(&back), text);
    }

    #[test]
    fn reports_the_line() {
        let bad = "triangles 2d\n3\n0 0\n1 0\n0 oops\n";
        let msg = parse(bad).unwrap_err().to_string();
        assert!(msg.contains("line 5"), "{msg}");
        assert!(parse("quads\n").is_err());
        assert!(parse("triangles 2d\n1\n0 0\n1\n0 1 2\n0\n").is_err());
    }
}
