//! Global degree-of-freedom numbering with per-cell orders and essential
//! boundary constraints.
//!
//! Shared entities (vertices, edges) take the maximum order of their incident
//! cells, so mixed-order meshes stay conforming without constraint equations.

use crate::error::Result;
use crate::fem::basis::{self, scalar_dim, EdgeFrame, SpaceKind};
use crate::fem::quadrature::gauss_legendre_01;
use crate::geom::{self, Pt};
use crate::mesh::Mesh;

/// Extra per-kind layout data.
#[derive(Debug, Clone)]
pub enum DofMeta {
    H1 {
        /// First bubble dof of each mesh edge.
        edge_dof_start: Vec<usize>,
    },
    L2 {
        /// 1 for scalar fields, 2 for vector fields (x block then y block
        /// inside each cell).
        components: usize,
    },
    Hdiv {
        /// First moment dof of each mesh edge.
        edge_dof_start: Vec<usize>,
    },
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub kind: SpaceKind,
    pub n_dofs: usize,
    /// Local-to-global map per cell, matching the basis function layout.
    pub cell_dofs: Vec<Vec<usize>>,
    /// Field order per cell.
    pub cell_order: Vec<usize>,
    /// Trace order per mesh edge (max of incident cell orders).
    pub edge_order: Vec<usize>,
    /// Prescribed values of constrained dofs.
    pub constrained: Vec<Option<f64>>,
    pub meta: DofMeta,
}

impl DofMap {
    pub fn n_constrained(&self) -> usize {
        self.constrained.iter().filter(|c| c.is_some()).count()
    }

    pub fn n_free(&self) -> usize {
        self.n_dofs - self.n_constrained()
    }

    /// Per-local-edge trace orders of a cell.
    pub fn cell_edge_orders(&self, mesh: &Mesh, cell: usize) -> [usize; 3] {
        let eids = mesh.cell_edge_ids(cell);
        std::array::from_fn(|e| self.edge_order[eids[e]])
    }
}

/// Builds the numbering for `kind` with the given per-cell orders.
pub fn build_dofmap(mesh: &Mesh, kind: SpaceKind, per_cell_order: &[usize]) -> Result<DofMap> {
    assert_eq!(per_cell_order.len(), mesh.n_cells());
    for &p in per_cell_order {
        kind.validate_order(p)?;
    }
    let mut edge_order = vec![0usize; mesh.n_edges()];
    for cell in 0..mesh.n_cells() {
        for eid in mesh.cell_edge_ids(cell) {
            edge_order[eid] = edge_order[eid].max(per_cell_order[cell]);
        }
    }

    let mut cell_dofs = vec![Vec::new(); mesh.n_cells()];
    let n_dofs;
    let meta;
    match kind {
        SpaceKind::H1Continuous => {
            let mut next = mesh.n_vertices();
            let mut edge_dof_start = vec![usize::MAX; mesh.n_edges()];
            for (eid, &m) in edge_order.iter().enumerate() {
                edge_dof_start[eid] = next;
                next += m.saturating_sub(1);
            }
            for cell in 0..mesh.n_cells() {
                let k = per_cell_order[cell];
                let gv = mesh.cells[cell];
                let eids = mesh.cell_edge_ids(cell);
                let mut dofs = Vec::new();
                dofs.extend_from_slice(&gv);
                for e in 0..3 {
                    let m = edge_order[eids[e]];
                    for d in 0..m.saturating_sub(1) {
                        dofs.push(edge_dof_start[eids[e]] + d);
                    }
                }
                if k >= 3 {
                    dofs.push(next);
                    next += 1;
                }
                cell_dofs[cell] = dofs;
            }
            n_dofs = next;
            meta = DofMeta::H1 { edge_dof_start };
        }
        SpaceKind::L2Discontinuous => {
            let mut next = 0;
            for cell in 0..mesh.n_cells() {
                let nf = scalar_dim(per_cell_order[cell]);
                cell_dofs[cell] = (next..next + nf).collect();
                next += nf;
            }
            n_dofs = next;
            meta = DofMeta::L2 { components: 1 };
        }
        SpaceKind::HdivConforming => {
            let mut next = 0;
            let mut edge_dof_start = vec![usize::MAX; mesh.n_edges()];
            for (eid, &m) in edge_order.iter().enumerate() {
                edge_dof_start[eid] = next;
                next += m + 1;
            }
            for cell in 0..mesh.n_cells() {
                let k = per_cell_order[cell];
                let eids = mesh.cell_edge_ids(cell);
                let mut dofs = Vec::new();
                for e in 0..3 {
                    let m = edge_order[eids[e]];
                    for d in 0..=m {
                        dofs.push(edge_dof_start[eids[e]] + d);
                    }
                }
                let n_int = if k >= 2 {
                    scalar_dim(k - 1) - 1 + scalar_dim(k - 2)
                } else {
                    0
                };
                dofs.extend(next..next + n_int);
                next += n_int;
                cell_dofs[cell] = dofs;
            }
            n_dofs = next;
            meta = DofMeta::Hdiv { edge_dof_start };
        }
    }

    Ok(DofMap {
        kind,
        n_dofs,
        cell_dofs,
        cell_order: per_cell_order.to_vec(),
        edge_order,
        constrained: vec![None; n_dofs],
        meta,
    })
}

/// Vector L2 field: same cell layout as the scalar map, with x and y blocks.
pub fn build_vector_l2(mesh: &Mesh, per_cell_order: &[usize]) -> Result<DofMap> {
    let scalar = build_dofmap(mesh, SpaceKind::L2Discontinuous, per_cell_order)?;
    let mut cell_dofs = vec![Vec::new(); mesh.n_cells()];
    let mut next = 0;
    for cell in 0..mesh.n_cells() {
        let nf = scalar.cell_dofs[cell].len();
        cell_dofs[cell] = (next..next + 2 * nf).collect();
        next += 2 * nf;
    }
    Ok(DofMap {
        kind: SpaceKind::L2Discontinuous,
        n_dofs: next,
        cell_dofs,
        cell_order: per_cell_order.to_vec(),
        edge_order: scalar.edge_order,
        constrained: vec![None; next],
        meta: DofMeta::L2 { components: 2 },
    })
}

/// Global frame of a mesh edge: endpoints ordered lower-to-higher global
/// vertex index.
pub fn edge_frame(mesh: &Mesh, eid: usize) -> EdgeFrame {
    let e = mesh.edge(eid);
    EdgeFrame::new(mesh.vertices[e.v[0]], mesh.vertices[e.v[1]])
}

/// Frames of a cell's three local edges.
pub fn cell_frames(mesh: &Mesh, cell: usize) -> [EdgeFrame; 3] {
    let eids = mesh.cell_edge_ids(cell);
    std::array::from_fn(|e| edge_frame(mesh, eids[e]))
}

/// Constrains H1 boundary dofs on the selected edges: vertex dofs by
/// interpolation and edge bubbles by 1D L2 projection of the residual.
///
/// `select` maps a tagged boundary edge to the prescribed trace, or `None`
/// to leave it unconstrained.
pub fn apply_essential_h1<'a>(
    dofmap: &mut DofMap,
    mesh: &Mesh,
    select: &dyn Fn(usize) -> Option<Box<dyn Fn(Pt) -> f64 + 'a>>,
) {
    let DofMeta::H1 { edge_dof_start } = &dofmap.meta else {
        panic!("apply_essential_h1 on a non-H1 map");
    };
    let edge_dof_start = edge_dof_start.clone();
    for &eid in mesh.boundary.keys() {
        let Some(value) = select(eid) else { continue };
        let e = mesh.edge(eid);
        let (lo, hi) = (e.v[0], e.v[1]);
        let p_lo = mesh.vertices[lo];
        let p_hi = mesh.vertices[hi];
        let f_lo = value(p_lo);
        let f_hi = value(p_hi);
        dofmap.constrained[lo] = Some(f_lo);
        dofmap.constrained[hi] = Some(f_hi);

        let m = dofmap.edge_order[eid];
        if m < 2 {
            continue;
        }
        // project the residual after linear interpolation onto the edge
        // kernels E_2(s) = s(1-s), E_3(s) = s(1-s)(2s-1)
        let nb = m - 1;
        let (sn, sw) = gauss_legendre_01(m + 2);
        let kernel = |d: usize, s: f64| -> f64 {
            match d {
                0 => s * (1.0 - s),
                _ => s * (1.0 - s) * (2.0 * s - 1.0),
            }
        };
        let mut gram = vec![0.0; nb * nb];
        let mut rhs = vec![0.0; nb];
        for (s, w) in sn.iter().zip(&sw) {
            let p = [
                p_lo[0] + s * (p_hi[0] - p_lo[0]),
                p_lo[1] + s * (p_hi[1] - p_lo[1]),
            ];
            let resid = value(p) - ((1.0 - s) * f_lo + s * f_hi);
            for i in 0..nb {
                rhs[i] += w * resid * kernel(i, *s);
                for j in 0..nb {
                    gram[i * nb + j] += w * kernel(i, *s) * kernel(j, *s);
                }
            }
        }
        let coefs = if nb == 1 {
            vec![rhs[0] / gram[0]]
        } else {
            let det = gram[0] * gram[3] - gram[1] * gram[2];
            vec![
                (rhs[0] * gram[3] - rhs[1] * gram[1]) / det,
                (gram[0] * rhs[1] - gram[2] * rhs[0]) / det,
            ]
        };
        for (d, c) in coefs.into_iter().enumerate() {
            dofmap.constrained[edge_dof_start[eid] + d] = Some(c);
        }
    }
}

/// Constrains H(div) normal-trace dofs on the selected edges to the L2
/// projection of the prescribed outward normal flux.
pub fn apply_essential_hdiv<'a>(
    dofmap: &mut DofMap,
    mesh: &Mesh,
    select: &dyn Fn(usize) -> Option<Box<dyn Fn(Pt, Pt) -> f64 + 'a>>,
) {
    let DofMeta::Hdiv { edge_dof_start } = &dofmap.meta else {
        panic!("apply_essential_hdiv on a non-Hdiv map");
    };
    let edge_dof_start = edge_dof_start.clone();
    for &eid in mesh.boundary.keys() {
        let Some(value) = select(eid) else { continue };
        let e = mesh.edge(eid);
        let cell = e.cells[0];
        let frame = edge_frame(mesh, eid);
        // outward normal of the single incident cell
        let le = (0..3)
            .find(|&le| mesh.cell_edge_ids(cell)[le] == eid)
            .expect("boundary edge not in its incident cell");
        let outward = mesh.outward_normal(cell, le);
        let sigma = if geom::dot(frame.normal, outward) > 0.0 { 1.0 } else { -1.0 };

        let m = dofmap.edge_order[eid];
        let (sn, sw) = gauss_legendre_01(m + 3);
        for mom in 0..=m {
            let mut acc = 0.0;
            for (s, w) in sn.iter().zip(&sw) {
                let p = frame.point(*s);
                acc += w * value(p, outward) * basis::legendre01(mom, *s);
            }
            dofmap.constrained[edge_dof_start[eid] + mom] = Some(sigma * acc);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured_square, BoundaryTag, TagKind};
    use approx::assert_relative_eq;

    fn square(n: usize) -> Mesh {
        generate_structured_square(n, [[0.0, 0.0], [1.0, 1.0]], &|_, _| BoundaryTag {
            kind: TagKind::DirichletT,
            value_id: 0,
        })
        .unwrap()
    }

    #[test]
    fn dof_counts() {
        let m = square(2); // 8 cells, 9 vertices, 16 edges
        let l2 = build_dofmap(&m, SpaceKind::L2Discontinuous, &vec![0; 8]).unwrap();
        assert_eq!(l2.n_dofs, 8);
        let h1 = build_dofmap(&m, SpaceKind::H1Continuous, &vec![1; 8]).unwrap();
        assert_eq!(h1.n_dofs, 9);
        // BDM order 1: 2 moments per edge, no interior
        let hdiv = build_dofmap(&m, SpaceKind::HdivConforming, &vec![1; 8]).unwrap();
        assert_eq!(hdiv.n_dofs, 2 * m.n_edges());
        // order 2: 3 per edge + 3 interior per cell
        let hdiv2 = build_dofmap(&m, SpaceKind::HdivConforming, &vec![2; 8]).unwrap();
        assert_eq!(hdiv2.n_dofs, 3 * m.n_edges() + 3 * 8);
    }

    #[test]
    fn shared_edge_dofs_counted_once() {
        let m = generate_structured_square(1, [[0.0, 0.0], [1.0, 1.0]], &|_, _| BoundaryTag {
            kind: TagKind::NeumannQ,
            value_id: 0,
        })
        .unwrap();
        // 2 cells, 5 edges
        let hdiv = build_dofmap(&m, SpaceKind::HdivConforming, &vec![1; 2]).unwrap();
        assert_eq!(hdiv.n_dofs, 10);
        let mut seen = std::collections::BTreeSet::new();
        for c in 0..2 {
            for &d in &hdiv.cell_dofs[c] {
                seen.insert(d);
            }
        }
        assert_eq!(seen.len(), 10);
        // shared edge dofs appear in both cells
        let shared = m.edge_id(0, 3).unwrap();
        let DofMeta::Hdiv { edge_dof_start } = &hdiv.meta else { unreachable!() };
        let d0 = edge_dof_start[shared];
        assert!(hdiv.cell_dofs[0].contains(&d0) && hdiv.cell_dofs[1].contains(&d0));
    }

    #[test]
    fn mixed_orders_use_edge_maximum() {
        let m = square(1);
        let hdiv = build_dofmap(&m, SpaceKind::HdivConforming, &[1, 2]).unwrap();
        let shared = m.edge_id(0, 3).unwrap();
        assert_eq!(hdiv.edge_order[shared], 2);
        // cell 0 (order 1) sees 3 dofs on the promoted edge
        assert!(hdiv.cell_dofs[0].len() > 6);
    }

    #[test]
    fn essential_h1_constant_kills_bubbles() {
        let m = square(2);
        let mut h1 = build_dofmap(&m, SpaceKind::H1Continuous, &vec![3; 8]).unwrap();
        apply_essential_h1(&mut h1, &m, &|_eid| Some(Box::new(|_p| 5.0)));
        let DofMeta::H1 { edge_dof_start } = &h1.meta else { unreachable!() };
        for &eid in m.boundary.keys() {
            for d in 0..2 {
                let c = h1.constrained[edge_dof_start[eid] + d].unwrap();
                assert!(c.abs() < 1e-12, "bubble dof should vanish, got {c}");
            }
        }
        for v in 0..m.n_vertices() {
            let on_boundary = m.boundary.keys().any(|&eid| m.edge(eid).v.contains(&v));
            if on_boundary {
                assert_relative_eq!(h1.constrained[v].unwrap(), 5.0);
            } else {
                assert!(h1.constrained[v].is_none());
            }
        }
    }

    #[test]
    fn essential_h1_reproduces_polynomial_trace() {
        // cubic trace is reproduced exactly by order-3 edges
        let m = square(1);
        let mut h1 = build_dofmap(&m, SpaceKind::H1Continuous, &vec![3; 2]).unwrap();
        let f = |p: Pt| 1.0 + 2.0 * p[0] - p[0] * p[0] + 0.5 * p[0] * p[0] * p[0];
        // constrain only the bottom edge (y = 0)
        apply_essential_h1(&mut h1, &m, &|eid| {
            let e = m.edge(eid);
            let flat = m.vertices[e.v[0]][1].abs() < 1e-12 && m.vertices[e.v[1]][1].abs() < 1e-12;
            flat.then(|| Box::new(f) as Box<dyn Fn(Pt) -> f64>)
        });
        // evaluate the constrained trace at sample points via the basis
        let eid = m.edge_id(0, 1).unwrap();
        let cell = m.edge(eid).cells[0];
        let geom_ = basis::CellGeom::new(m.cell_vertices(cell));
        for s in [0.2, 0.55, 0.81] {
            let p = [s, 0.0];
            let bary = geom_.barycentric(p);
            let table = basis::h1_shapes(
                &geom_,
                m.cells[cell],
                h1.cell_edge_orders(&m, cell),
                3,
                &[bary],
            );
            let mut val = 0.0;
            for (l, &g) in h1.cell_dofs[cell].iter().enumerate() {
                if let Some(c) = h1.constrained[g] {
                    val += c * table.values[l][0];
                }
            }
            assert_relative_eq!(val, f(p), epsilon = 1e-11);
        }
    }

    #[test]
    fn essential_hdiv_projects_flux() {
        let m = square(1);
        let mut hdiv = build_dofmap(&m, SpaceKind::HdivConforming, &vec![2; 2]).unwrap();
        // constrain all boundary edges to q.n = x + 2y (linear, reproduced
        // exactly by order >= 2 traces)
        let qbar = |p: Pt, _n: Pt| p[0] + 2.0 * p[1];
        apply_essential_hdiv(&mut hdiv, &m, &|_eid| {
            Some(Box::new(qbar) as Box<dyn Fn(Pt, Pt) -> f64>)
        });
        // reconstruct the trace from dofs on each boundary edge and compare
        for (&eid, _) in m.boundary.iter() {
            let cell = m.edge(eid).cells[0];
            let geom_ = basis::CellGeom::new(m.cell_vertices(cell));
            let frames = cell_frames(&m, cell);
            let le = (0..3).find(|&le| m.cell_edge_ids(cell)[le] == eid).unwrap();
            let b = basis::hdiv_basis(&geom_, frames, hdiv.cell_edge_orders(&m, cell), 2).unwrap();
            let outward = m.outward_normal(cell, le);
            for s in [0.15, 0.5, 0.9] {
                let p = frames[le].point(s);
                let vals = b.values_at(&[p]);
                let mut qn = 0.0;
                for (l, &g) in hdiv.cell_dofs[cell].iter().enumerate() {
                    if let Some(c) = hdiv.constrained[g] {
                        qn += c * (vals[l][0][0] * outward[0] + vals[l][0][1] * outward[1]);
                    }
                }
                assert_relative_eq!(qn, qbar(p, outward), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn essential_zero_flux() {
        let m = square(2);
        let mut hdiv = build_dofmap(&m, SpaceKind::HdivConforming, &vec![1; 8]).unwrap();
        apply_essential_hdiv(&mut hdiv, &m, &|_eid| {
            Some(Box::new(|_p: Pt, _n: Pt| 0.0) as Box<dyn Fn(Pt, Pt) -> f64>)
        });
        for c in hdiv.constrained.iter().flatten() {
            assert_eq!(*c, 0.0);
        }
        assert_eq!(hdiv.n_constrained(), 2 * m.boundary.len());
    }
}
