//! Fill-reducing, pivot-safe orderings for the block saddle systems.
//!
//! Cells are ordered by recursive coordinate bisection with the interface
//! cells emitted last (nested-dissection style). Dofs are then emitted cell
//! by cell with mass-carrying fields ahead of multipliers, which keeps every
//! leading principal minor of the assembled saddle matrix nonsingular, so
//! the LDL^T factorization needs no numerical pivoting.

use crate::mesh::Mesh;
use std::collections::BTreeSet;

/// Nested-dissection-style ordering of cell ids.
pub fn nd_cell_order(mesh: &Mesh) -> Vec<usize> {
    let centroids: Vec<[f64; 2]> = (0..mesh.n_cells()).map(|c| mesh.cell_centroid(c)).collect();
    let mut out = Vec::with_capacity(mesh.n_cells());
    let all: Vec<usize> = (0..mesh.n_cells()).collect();
    recurse(mesh, &centroids, all, &mut out);
    debug_assert_eq!(out.len(), mesh.n_cells());
    out
}

fn recurse(mesh: &Mesh, centroids: &[[f64; 2]], mut cells: Vec<usize>, out: &mut Vec<usize>) {
    const LEAF: usize = 24;
    if cells.len() <= LEAF {
        out.extend(cells);
        return;
    }
    // split at the median of the wider bounding-box axis
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &c in &cells {
        for d in 0..2 {
            lo[d] = lo[d].min(centroids[c][d]);
            hi[d] = hi[d].max(centroids[c][d]);
        }
    }
    let axis = usize::from(hi[1] - lo[1] > hi[0] - lo[0]);
    cells.sort_by(|&a, &b| {
        centroids[a][axis]
            .partial_cmp(&centroids[b][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mid = cells.len() / 2;
    let b_side: BTreeSet<usize> = cells[mid..].iter().copied().collect();
    let mut a_side = Vec::new();
    let mut separator = Vec::new();
    for &c in &cells[..mid] {
        let touches_b = (0..3).any(|le| {
            mesh.neighbor(c, le)
                .is_some_and(|nb| b_side.contains(&nb))
        });
        if touches_b {
            separator.push(c);
        } else {
            a_side.push(c);
        }
    }
    let b_vec: Vec<usize> = cells[mid..].to_vec();
    recurse(mesh, centroids, a_side, out);
    recurse(mesh, centroids, b_vec, out);
    out.extend(separator);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured_square, BoundaryTag, TagKind};

    #[test]
    fn ordering_is_a_permutation() {
        let m = generate_structured_square(9, [[0.0, 0.0], [1.0, 1.0]], &|_, _| BoundaryTag {
            kind: TagKind::DirichletT,
            value_id: 0,
        })
        .unwrap();
        let order = nd_cell_order(&m);
        assert_eq!(order.len(), m.n_cells());
        let set: BTreeSet<usize> = order.iter().copied().collect();
        assert_eq!(set.len(), m.n_cells());
    }

    #[test]
    fn deterministic() {
        let m = generate_structured_square(7, [[0.0, 0.0], [1.0, 1.0]], &|_, _| BoundaryTag {
            kind: TagKind::NeumannQ,
            value_id: 0,
        })
        .unwrap();
        assert_eq!(nd_cell_order(&m), nd_cell_order(&m));
    }
}
