//! Plain-text mesh format.
//!
//! ```text
//! ddheat-mesh v1
//! <vertex count>
//! x y                 (one line per vertex)
//! <cell count>
//! v0 v1 v2 order      (one line per cell)
//! <boundary count>
//! v_a v_b TAG value_id   TAG in {DIRICHLET_T, NEUMANN_Q}
//! ```
//!
//! Vertex and cell ordering is the mesh's internal ordering, so writing the
//! same mesh twice produces byte-identical files.

use super::{edge_key, BoundaryTag, Mesh, TagKind};
use crate::error::{DdError, Result};
use std::collections::HashMap;
use std::io::{BufRead, Write};

pub fn write_mesh<W: Write>(mesh: &Mesh, out: &mut W) -> Result<()> {
    writeln!(out, "ddheat-mesh v1")?;
    writeln!(out, "{}", mesh.n_vertices())?;
    for v in &mesh.vertices {
        writeln!(out, "{} {}", v[0], v[1])?;
    }
    writeln!(out, "{}", mesh.n_cells())?;
    for (cell, order) in mesh.cells.iter().zip(&mesh.cell_order) {
        writeln!(out, "{} {} {} {}", cell[0], cell[1], cell[2], order)?;
    }
    writeln!(out, "{}", mesh.boundary.len())?;
    for (&eid, tag) in &mesh.boundary {
        let e = mesh.edge(eid);
        let name = match tag.kind {
            TagKind::DirichletT => "DIRICHLET_T",
            TagKind::NeumannQ => "NEUMANN_Q",
        };
        writeln!(out, "{} {} {} {}", e.v[0], e.v[1], name, tag.value_id)?;
    }
    Ok(())
}

pub fn read_mesh<R: BufRead>(input: R) -> Result<Mesh> {
    let mut lines = input.lines();
    let mut next = || -> Result<String> {
        loop {
            match lines.next() {
                None => return Err(DdError::Mesh("unexpected end of mesh file".into())),
                Some(line) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        return Ok(line);
                    }
                }
            }
        }
    };
    let header = next()?;
    if header.trim() != "ddheat-mesh v1" {
        return Err(DdError::Mesh(format!("bad mesh header: {header:?}")));
    }
    let nv: usize = parse(&next()?, "vertex count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let line = next()?;
        let mut it = line.split_whitespace();
        let x: f64 = parse(it.next().unwrap_or(""), "vertex x")?;
        let y: f64 = parse(it.next().unwrap_or(""), "vertex y")?;
        vertices.push([x, y]);
    }
    let nc: usize = parse(&next()?, "cell count")?;
    let mut cells = Vec::with_capacity(nc);
    let mut orders = Vec::with_capacity(nc);
    for _ in 0..nc {
        let line = next()?;
        let mut it = line.split_whitespace();
        let mut tri = [0usize; 3];
        for t in tri.iter_mut() {
            *t = parse(it.next().unwrap_or(""), "cell vertex")?;
        }
        let order: u8 = parse(it.next().unwrap_or(""), "cell order")?;
        cells.push(tri);
        orders.push(order);
    }
    let nb: usize = parse(&next()?, "boundary count")?;
    let mut tags = HashMap::new();
    for _ in 0..nb {
        let line = next()?;
        let mut it = line.split_whitespace();
        let a: usize = parse(it.next().unwrap_or(""), "boundary vertex")?;
        let b: usize = parse(it.next().unwrap_or(""), "boundary vertex")?;
        let kind = match it.next().unwrap_or("") {
            "DIRICHLET_T" => TagKind::DirichletT,
            "NEUMANN_Q" => TagKind::NeumannQ,
            other => return Err(DdError::Mesh(format!("unknown boundary tag {other:?}"))),
        };
        let value_id: u32 = parse(it.next().unwrap_or(""), "value id")?;
        tags.insert(edge_key(a, b), BoundaryTag { kind, value_id });
    }
    let n = cells.len();
    Mesh::new(vertices, cells, orders, vec![0; n], &tags, &HashMap::new())
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| DdError::Mesh(format!("cannot parse {what} from {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_structured_square;

    #[test]
    fn roundtrip_is_deterministic() {
        let m = generate_structured_square(3, [[0.0, 0.0], [1.0, 1.0]], &|mid, _| BoundaryTag {
            kind: if mid[0] < 0.5 { TagKind::DirichletT } else { TagKind::NeumannQ },
            value_id: 7,
        })
        .unwrap();
        let mut buf = Vec::new();
        write_mesh(&m, &mut buf).unwrap();
        let m2 = read_mesh(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(m.cells, m2.cells);
        assert_eq!(m.vertices, m2.vertices);
        assert_eq!(m.boundary.len(), m2.boundary.len());
        let mut buf2 = Vec::new();
        write_mesh(&m2, &mut buf2).unwrap();
        assert_eq!(buf, buf2, "mesh file not byte-stable");
    }
}
