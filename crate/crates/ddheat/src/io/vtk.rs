//! VTK legacy ASCII export of discontinuous fields.
//!
//! Each cell is subdivided into a barycentric lattice and emitted with its
//! own points, so inter-element jumps of the discontinuous fields survive in
//! the file. Point data: T, the gradient and flux components and magnitudes;
//! cell data: approximation order and parent cell id.

use crate::error::Result;
use crate::fem::quadrature::newton_cotes_lattice;
use crate::mesh::Mesh;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Values of one lattice point handed to the writer.
#[derive(Debug, Clone, Copy)]
pub struct VtkPointData {
    pub t: f64,
    pub g: [f64; 2],
    pub q: [f64; 2],
}

/// Writes the subdivided fields; `eval` supplies the values of one cell at
/// the given barycentric lattice points.
pub fn write_fields_vtk(
    path: &Path,
    mesh: &Mesh,
    title: &str,
    subdivision: usize,
    eval: &dyn Fn(usize, &[[f64; 3]]) -> Vec<VtkPointData>,
) -> Result<()> {
    let n = subdivision.max(1);
    let lattice = newton_cotes_lattice(n);
    let npts_cell = lattice.points.len();
    // lattice index map (i, j) -> local point id, i + j <= n
    let lidx = {
        let mut map = std::collections::HashMap::new();
        for (id, b) in lattice.points.iter().enumerate() {
            let i = (b[1] * n as f64).round() as usize;
            let j = (b[2] * n as f64).round() as usize;
            map.insert((i, j), id);
        }
        map
    };
    let mut sub_tris: Vec<[usize; 3]> = Vec::new();
    for i in 0..n {
        for j in 0..(n - i) {
            sub_tris.push([lidx[&(i, j)], lidx[&(i + 1, j)], lidx[&(i, j + 1)]]);
            if j + i + 1 < n {
                sub_tris.push([lidx[&(i + 1, j)], lidx[&(i + 1, j + 1)], lidx[&(i, j + 1)]]);
            }
        }
    }

    let n_points = mesh.n_cells() * npts_cell;
    let n_cells_out = mesh.n_cells() * sub_tris.len();
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {n_points} double")?;
    let mut data: Vec<VtkPointData> = Vec::with_capacity(n_points);
    for cell in 0..mesh.n_cells() {
        let verts = mesh.cell_vertices(cell);
        for b in &lattice.points {
            let x = b[0] * verts[0][0] + b[1] * verts[1][0] + b[2] * verts[2][0];
            let y = b[0] * verts[0][1] + b[1] * verts[1][1] + b[2] * verts[2][1];
            writeln!(out, "{x} {y} 0")?;
        }
        data.extend(eval(cell, &lattice.points));
    }
    writeln!(out, "CELLS {n_cells_out} {}", 4 * n_cells_out)?;
    for cell in 0..mesh.n_cells() {
        let base = cell * npts_cell;
        for tri in &sub_tris {
            writeln!(out, "3 {} {} {}", base + tri[0], base + tri[1], base + tri[2])?;
        }
    }
    writeln!(out, "CELL_TYPES {n_cells_out}")?;
    for _ in 0..n_cells_out {
        writeln!(out, "5")?;
    }

    writeln!(out, "POINT_DATA {n_points}")?;
    let scalar = |out: &mut BufWriter<std::fs::File>,
                  name: &str,
                  f: &dyn Fn(&VtkPointData) -> f64|
     -> Result<()> {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for d in &data {
            writeln!(out, "{}", f(d))?;
        }
        Ok(())
    };
    scalar(&mut out, "T", &|d| d.t)?;
    scalar(&mut out, "g_mag", &|d| (d.g[0] * d.g[0] + d.g[1] * d.g[1]).sqrt())?;
    scalar(&mut out, "g_x", &|d| d.g[0])?;
    scalar(&mut out, "g_y", &|d| d.g[1])?;
    scalar(&mut out, "q_mag", &|d| (d.q[0] * d.q[0] + d.q[1] * d.q[1]).sqrt())?;
    scalar(&mut out, "q_x", &|d| d.q[0])?;
    scalar(&mut out, "q_y", &|d| d.q[1])?;

    writeln!(out, "CELL_DATA {n_cells_out}")?;
    writeln!(out, "SCALARS order int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for cell in 0..mesh.n_cells() {
        for _ in 0..sub_tris.len() {
            writeln!(out, "{}", mesh.cell_order[cell])?;
        }
    }
    writeln!(out, "SCALARS cell_id int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for cell in 0..mesh.n_cells() {
        for _ in 0..sub_tris.len() {
            writeln!(out, "{cell}")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes per-cell scalar fields (e.g. indicator maps or ensemble
/// summaries) as flat cell data on the raw mesh.
pub fn write_cell_data_vtk(
    path: &Path,
    mesh: &Mesh,
    title: &str,
    fields: &[(&str, &[f64])],
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.n_vertices())?;
    for v in &mesh.vertices {
        writeln!(out, "{} {} 0", v[0], v[1])?;
    }
    writeln!(out, "CELLS {} {}", mesh.n_cells(), 4 * mesh.n_cells())?;
    for cell in &mesh.cells {
        writeln!(out, "3 {} {} {}", cell[0], cell[1], cell[2])?;
    }
    writeln!(out, "CELL_TYPES {}", mesh.n_cells())?;
    for _ in 0..mesh.n_cells() {
        writeln!(out, "5")?;
    }
    writeln!(out, "CELL_DATA {}", mesh.n_cells())?;
    for (name, values) in fields {
        assert_eq!(values.len(), mesh.n_cells());
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in *values {
            writeln!(out, "{v}")?;
        }
    }
    out.flush()?;
    Ok(())
}
