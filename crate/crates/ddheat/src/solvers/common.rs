//! Shared multi-field assembly plumbing: boundary-value tables, free-dof
//! bookkeeping, triplet assembly with constraint elimination, and per-cell
//! quadrature caches.

use crate::error::{DdError, Result};
use crate::fem::basis::CellGeom;
use crate::fem::dofmap::DofMap;
use crate::fem::quadrature::triangle_rule;
use crate::geom::Pt;
use crate::mesh::Mesh;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Boundary data bound to a mesh tag's `value_id`.
#[derive(Clone)]
pub enum BoundaryValue {
    Const(f64),
    /// Prescribed temperature trace.
    Temperature(Arc<dyn Fn(Pt) -> f64 + Send + Sync>),
    /// Prescribed outward normal flux, given the point and outward normal.
    NormalFlux(Arc<dyn Fn(Pt, Pt) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for BoundaryValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryValue::Const(c) => write!(f, "Const({c})"),
            BoundaryValue::Temperature(_) => write!(f, "Temperature(fn)"),
            BoundaryValue::NormalFlux(_) => write!(f, "NormalFlux(fn)"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BoundaryTable {
    map: BTreeMap<u32, BoundaryValue>,
}

impl BoundaryTable {
    pub fn new() -> BoundaryTable {
        BoundaryTable { map: BTreeMap::new() }
    }

    pub fn insert(&mut self, id: u32, value: BoundaryValue) -> &mut Self {
        self.map.insert(id, value);
        self
    }

    pub fn temperature(&self, id: u32, p: Pt) -> Result<f64> {
        match self.map.get(&id) {
            Some(BoundaryValue::Const(c)) => Ok(*c),
            Some(BoundaryValue::Temperature(f)) => Ok(f(p)),
            Some(BoundaryValue::NormalFlux(_)) => Err(DdError::Config(format!(
                "value id {id} is a flux, used as temperature"
            ))),
            None => Err(DdError::UnboundBoundaryValue(id)),
        }
    }

    pub fn normal_flux(&self, id: u32, p: Pt, outward: Pt) -> Result<f64> {
        match self.map.get(&id) {
            Some(BoundaryValue::Const(c)) => Ok(*c),
            Some(BoundaryValue::NormalFlux(f)) => Ok(f(p, outward)),
            Some(BoundaryValue::Temperature(_)) => Err(DdError::Config(format!(
                "value id {id} is a temperature, used as flux"
            ))),
            None => Err(DdError::UnboundBoundaryValue(id)),
        }
    }
}

/// Field values at one Gauss point, fed to the dataset search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub t: f64,
    pub g: [f64; 2],
    pub q: [f64; 2],
}

/// Global coefficient vectors per field (constrained entries hold their
/// prescribed values). Unused fields stay empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FieldCoeffs {
    pub t: Vec<f64>,
    pub g: Vec<f64>,
    pub q: Vec<f64>,
    pub lam: Vec<f64>,
    pub tau: Vec<f64>,
}

/// One integration point of the global Gauss set.
#[derive(Debug, Clone, Copy)]
pub struct GaussPoint {
    pub cell: u32,
    pub position: Pt,
    /// Physical quadrature weight (sums to the domain area).
    pub weight: f64,
}

/// A field inside a multi-field block system.
#[derive(Debug)]
pub struct FieldSlot {
    pub name: &'static str,
    pub map: DofMap,
    pub offset: usize,
    /// Expected pivot sign: +1 mass/stiffness, -1 multiplier rows.
    pub sign: i8,
    /// Elimination priority inside a cell (lower first).
    pub priority: u8,
}

/// Registry of the fields of one assembled system, with the free/constrained
/// split of the concatenated global dof vector.
#[derive(Debug)]
pub struct MultiField {
    pub slots: Vec<FieldSlot>,
    pub free_index: Vec<Option<usize>>,
    pub fixed_value: Vec<f64>,
    pub n_free: usize,
}

impl MultiField {
    pub fn new(fields: Vec<(&'static str, DofMap, i8, u8)>) -> MultiField {
        let mut slots = Vec::with_capacity(fields.len());
        let mut offset = 0;
        for (name, map, sign, priority) in fields {
            let n = map.n_dofs;
            slots.push(FieldSlot { name, map, offset, sign, priority });
            offset += n;
        }
        let n_global = offset;
        let mut free_index = vec![None; n_global];
        let mut fixed_value = vec![0.0; n_global];
        let mut n_free = 0;
        for slot in &slots {
            for (d, c) in slot.map.constrained.iter().enumerate() {
                let gid = slot.offset + d;
                match c {
                    Some(v) => fixed_value[gid] = *v,
                    None => {
                        free_index[gid] = Some(n_free);
                        n_free += 1;
                    }
                }
            }
        }
        MultiField { slots, free_index, fixed_value, n_free }
    }

    /// Pivot-safe fill-reducing permutation over free dofs.
    ///
    /// Fields are eliminated block by block in priority order; this keeps
    /// every leading principal minor nonsingular (each mass block is
    /// definite, and each multiplier block's Schur complement is definite
    /// once the fields it constrains are eliminated). Inside a block, cells
    /// follow the dissection order for fill locality.
    pub fn permutation(&self, mesh: &Mesh, cell_order: &[usize]) -> Vec<usize> {
        let _ = mesh;
        let mut by_priority: Vec<&FieldSlot> = self.slots.iter().collect();
        by_priority.sort_by_key(|s| s.priority);
        let mut perm = Vec::with_capacity(self.n_free);
        let mut emitted = vec![false; self.n_free];
        for slot in &by_priority {
            for &cell in cell_order {
                for &dof in &slot.map.cell_dofs[cell] {
                    if let Some(fi) = self.free_index[slot.offset + dof] {
                        if !emitted[fi] {
                            emitted[fi] = true;
                            perm.push(fi);
                        }
                    }
                }
            }
        }
        for fi in 0..self.n_free {
            if !emitted[fi] {
                perm.push(fi);
            }
        }
        perm
    }

    /// Expected pivot signs per free dof.
    pub fn dsigns(&self) -> Vec<i8> {
        let mut signs = vec![1i8; self.n_free];
        for slot in &self.slots {
            for d in 0..slot.map.n_dofs {
                if let Some(fi) = self.free_index[slot.offset + d] {
                    signs[fi] = slot.sign;
                }
            }
        }
        signs
    }

    /// Splits a free-dof solution vector into per-field global vectors with
    /// prescribed values filled in.
    pub fn expand(&self, x_free: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.slots.len());
        for slot in &self.slots {
            let mut v = vec![0.0; slot.map.n_dofs];
            for d in 0..slot.map.n_dofs {
                let gid = slot.offset + d;
                v[d] = match self.free_index[gid] {
                    Some(fi) => x_free[fi],
                    None => self.fixed_value[gid],
                };
            }
            out.push(v);
        }
        out
    }

    pub fn layout(&self) -> Vec<(String, std::ops::Range<usize>)> {
        self.slots
            .iter()
            .map(|s| (s.name.to_string(), s.offset..s.offset + s.map.n_dofs))
            .collect()
    }
}

/// Triplet assembler over free dofs with on-the-fly elimination of
/// constrained columns. Callers scatter full (both-orientation) entries.
pub struct Assembler {
    pub triplets: Vec<(usize, usize, f64)>,
    pub b_fixed: Vec<f64>,
}

impl Assembler {
    pub fn new(n_free: usize) -> Assembler {
        Assembler { triplets: Vec::new(), b_fixed: vec![0.0; n_free] }
    }

    /// Adds the full-matrix entry A[gi][gj] += v. Keeps the upper triangle
    /// of the free block once; moves constrained columns to the right-hand
    /// side.
    #[inline]
    pub fn add(&mut self, mf: &MultiField, gi: usize, gj: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        match (mf.free_index[gi], mf.free_index[gj]) {
            (Some(i), Some(j)) => {
                if i <= j {
                    self.triplets.push((i, j, v));
                }
            }
            (Some(i), None) => self.b_fixed[i] -= v * mf.fixed_value[gj],
            _ => {}
        }
    }

    #[inline]
    pub fn add_rhs(&mut self, mf: &MultiField, gi: usize, v: f64) {
        if let Some(i) = mf.free_index[gi] {
            self.b_fixed[i] += v;
        }
    }
}

/// Per-cell quadrature cache: geometry, barycentric points, physical points
/// and weights, plus the slice of the global Gauss array.
#[derive(Debug, Clone)]
pub struct CellQuad {
    pub geom: CellGeom,
    pub bary: Vec<[f64; 3]>,
    pub pts: Vec<Pt>,
    pub weights: Vec<f64>,
    pub qstart: usize,
}

impl CellQuad {
    pub fn nq(&self) -> usize {
        self.bary.len()
    }
}

/// Builds quadrature caches with the per-cell exactness degrees and the flat
/// Gauss-point array.
pub fn cell_quadratures(
    mesh: &Mesh,
    degree: &dyn Fn(usize) -> usize,
) -> Result<(Vec<CellQuad>, Vec<GaussPoint>)> {
    let mut cells = Vec::with_capacity(mesh.n_cells());
    let mut gauss = Vec::new();
    for cell in 0..mesh.n_cells() {
        let rule = triangle_rule(degree(cell))?;
        let geom = CellGeom::new(mesh.cell_vertices(cell));
        let pts: Vec<Pt> = rule.points.iter().map(|&b| geom.to_physical(b)).collect();
        let weights: Vec<f64> = rule.weights.iter().map(|w| w * 2.0 * geom.area).collect();
        let qstart = gauss.len();
        for (i, &p) in pts.iter().enumerate() {
            gauss.push(GaussPoint { cell: cell as u32, position: p, weight: weights[i] });
        }
        cells.push(CellQuad { geom, bary: rule.points, pts, weights, qstart });
    }
    Ok((cells, gauss))
}
