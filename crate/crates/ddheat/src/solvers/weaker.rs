//! Conservative mixed ("weaker") data-driven formulation.
//!
//! Unknowns per cell of base order p: temperature T and multiplier lambda in
//! discontinuous L2 spaces of order p, gradient g in vector L2 of order p+1,
//! flux q and multiplier tau in H(div) of order p+1. The five stationarity
//! statements assemble into one symmetric block system whose matrix is
//! independent of the assigned material states; only the right-hand side
//! changes across data-driven iterations. Neumann data is essential on q
//! (and homogeneous on tau), Dirichlet data enters naturally through the tau
//! equation.

use super::common::{
    cell_quadratures, Assembler, BoundaryTable, CellQuad, FieldCoeffs, FieldSample, GaussPoint,
    MultiField,
};
use super::ordering::nd_cell_order;
use super::{DdOperator, PointAssignment};
use crate::dataset::Scaling;
use crate::error::Result;
use crate::fem::basis::{self, hdiv_basis, l2_shapes, HdivBasis, ShapeTable, SpaceKind};
use crate::fem::dofmap::{self, apply_essential_hdiv, build_dofmap, build_vector_l2, DofMap};
use crate::fem::quadrature::gauss_legendre_01;
use crate::fem::system::{LinearSystem, SymmCsc};
use crate::geom::Pt;
use crate::mesh::{Mesh, TagKind};
use rayon::prelude::*;
use std::sync::Arc;

struct CellTables {
    quad: CellQuad,
    t_tab: ShapeTable,
    g_tab: ShapeTable,
    hdiv: HdivBasis,
    q_vals: Vec<Vec<[f64; 2]>>,
    q_divs: Vec<Vec<f64>>,
}

/// Pointwise evaluation of all weaker fields on one cell.
#[derive(Debug, Clone)]
pub struct CellEval {
    pub t: Vec<f64>,
    pub grad_t: Vec<[f64; 2]>,
    pub g: Vec<[f64; 2]>,
    pub q: Vec<[f64; 2]>,
    pub div_q: Vec<f64>,
}

pub struct WeakerDd {
    pub mesh: Arc<Mesh>,
    mf: MultiField,
    system: LinearSystem,
    cells: Vec<CellTables>,
    gauss: Vec<GaussPoint>,
    area: f64,
    b_fixed: Vec<f64>,
    scaling: Scaling,
    uses_t: bool,
}

const FG: usize = 0;
const FQ: usize = 1;
const FLAM: usize = 2;
const FTAU: usize = 3;
const FT: usize = 4;

impl WeakerDd {
    /// Assembles and factors the weaker system on the mesh's per-cell orders.
    ///
    /// `scaling` provides the S_g/S_q weights of the distance functional (and
    /// S_T when the search is five-dimensional, `uses_t`).
    pub fn new(
        mesh: Arc<Mesh>,
        boundary: &BoundaryTable,
        f_source: &(dyn Fn(Pt) -> f64 + Sync),
        scaling: Scaling,
        uses_t: bool,
    ) -> Result<WeakerDd> {
        let orders_t: Vec<usize> = mesh.cell_order.iter().map(|&p| p as usize).collect();
        let orders_hi: Vec<usize> = orders_t.iter().map(|p| p + 1).collect();
        for &p in &orders_hi {
            SpaceKind::HdivConforming.validate_order(p)?;
        }

        let t_map = build_dofmap(&mesh, SpaceKind::L2Discontinuous, &orders_t)?;
        let lam_map = build_dofmap(&mesh, SpaceKind::L2Discontinuous, &orders_t)?;
        let g_map = build_vector_l2(&mesh, &orders_hi)?;
        let mut q_map = build_dofmap(&mesh, SpaceKind::HdivConforming, &orders_hi)?;
        let mut tau_map = build_dofmap(&mesh, SpaceKind::HdivConforming, &orders_hi)?;

        // essential data: q.n = qbar and tau.n = 0 on the Neumann boundary
        apply_essential_hdiv(&mut q_map, &mesh, &|eid| {
            let tag = mesh.boundary.get(&eid)?;
            (tag.kind == TagKind::NeumannQ).then(|| {
                let id = tag.value_id;
                Box::new(move |p: Pt, n: Pt| {
                    boundary.normal_flux(id, p, n).expect("flux value unbound")
                }) as Box<dyn Fn(Pt, Pt) -> f64>
            })
        });
        apply_essential_hdiv(&mut tau_map, &mesh, &|eid| {
            let tag = mesh.boundary.get(&eid)?;
            (tag.kind == TagKind::NeumannQ)
                .then(|| Box::new(|_: Pt, _: Pt| 0.0) as Box<dyn Fn(Pt, Pt) -> f64>)
        });

        // elimination order g, q, lam, tau, t: the mass blocks are positive
        // definite, the multiplier Schur complements negative definite, and
        // the final temperature Schur complement positive definite again
        // (T eliminates through the already-negative tau block)
        let mf = MultiField::new(vec![
            ("g", g_map, 1, 0),
            ("q", q_map, 1, 1),
            ("lam", lam_map, -1, 2),
            ("tau", tau_map, -1, 3),
            ("t", t_map, 1, 4),
        ]);

        // per-cell tables at quadrature exact for all bilinear terms
        let q_edge_orders: Vec<[usize; 3]> = (0..mesh.n_cells())
            .map(|c| mf.slots[FQ].map.cell_edge_orders(&mesh, c))
            .collect();
        let (quads, gauss) = cell_quadratures(&mesh, &|c| {
            let m = q_edge_orders[c].iter().copied().max().unwrap().max(orders_hi[c]);
            2 * m + 2
        })?;
        let cells: Vec<CellTables> = quads
            .into_par_iter()
            .enumerate()
            .map(|(c, quad)| {
                let t_tab = l2_shapes(&quad.geom, orders_t[c], &quad.bary);
                let g_tab = l2_shapes(&quad.geom, orders_hi[c], &quad.bary);
                let frames = dofmap::cell_frames(&mesh, c);
                let hdiv = hdiv_basis(&quad.geom, frames, q_edge_orders[c], orders_hi[c])
                    .expect("hdiv basis construction failed");
                let q_vals = hdiv.values_at(&quad.pts);
                let q_divs = hdiv.divs_at(&quad.pts);
                CellTables { quad, t_tab, g_tab, hdiv, q_vals, q_divs }
            })
            .collect();

        // assembly (serial scatter of parallel-ready element data; the
        // element work is cheap compared to factorization)
        let mut asm = Assembler::new(mf.n_free);
        let s_g = scaling.s_g;
        let s_q = scaling.s_q;
        for c in 0..mesh.n_cells() {
            let tab = &cells[c];
            let nq = tab.quad.nq();
            let w = &tab.quad.weights;
            let n_t = tab.t_tab.values.len();
            let n_gs = tab.g_tab.values.len();
            let n_q = tab.hdiv.len();
            let gd = |local: usize| mf.slots[FG].offset + mf.slots[FG].map.cell_dofs[c][local];
            let qd = |local: usize| mf.slots[FQ].offset + mf.slots[FQ].map.cell_dofs[c][local];
            let ld = |local: usize| mf.slots[FLAM].offset + mf.slots[FLAM].map.cell_dofs[c][local];
            let ud = |local: usize| mf.slots[FTAU].offset + mf.slots[FTAU].map.cell_dofs[c][local];
            let td = |local: usize| mf.slots[FT].offset + mf.slots[FT].map.cell_dofs[c][local];

            // S_g (g, dg): block-diagonal over components
            for i in 0..n_gs {
                for j in 0..n_gs {
                    let mut m = 0.0;
                    for k in 0..nq {
                        m += w[k] * tab.g_tab.values[i][k] * tab.g_tab.values[j][k];
                    }
                    m *= s_g;
                    asm.add(&mf, gd(i), gd(j), m);
                    asm.add(&mf, gd(n_gs + i), gd(n_gs + j), m);
                }
            }
            // (tau, dg) coupling, both orientations
            for i in 0..n_gs {
                for b in 0..n_q {
                    let mut mx = 0.0;
                    let mut my = 0.0;
                    for k in 0..nq {
                        mx += w[k] * tab.g_tab.values[i][k] * tab.q_vals[b][k][0];
                        my += w[k] * tab.g_tab.values[i][k] * tab.q_vals[b][k][1];
                    }
                    asm.add(&mf, gd(i), ud(b), mx);
                    asm.add(&mf, ud(b), gd(i), mx);
                    asm.add(&mf, gd(n_gs + i), ud(b), my);
                    asm.add(&mf, ud(b), gd(n_gs + i), my);
                }
            }
            // S_q (q, dq)
            for a in 0..n_q {
                for b in 0..n_q {
                    let mut m = 0.0;
                    for k in 0..nq {
                        m += w[k]
                            * (tab.q_vals[a][k][0] * tab.q_vals[b][k][0]
                                + tab.q_vals[a][k][1] * tab.q_vals[b][k][1]);
                    }
                    asm.add(&mf, qd(a), qd(b), s_q * m);
                }
            }
            // (lam, div dq) coupling
            for a in 0..n_q {
                for b in 0..n_t {
                    let mut m = 0.0;
                    for k in 0..nq {
                        m += w[k] * tab.q_divs[a][k] * tab.t_tab.values[b][k];
                    }
                    asm.add(&mf, qd(a), ld(b), m);
                    asm.add(&mf, ld(b), qd(a), m);
                }
            }
            // (T, div dtau) coupling
            for a in 0..n_q {
                for b in 0..n_t {
                    let mut m = 0.0;
                    for k in 0..nq {
                        m += w[k] * tab.q_divs[a][k] * tab.t_tab.values[b][k];
                    }
                    asm.add(&mf, ud(a), td(b), m);
                    asm.add(&mf, td(b), ud(a), m);
                }
            }
            // fixed right-hand side: (f, dlam); the source may be sharply
            // peaked, so integrate it with a richer rule than the mass terms
            {
                let rule = crate::fem::quadrature::triangle_rule(
                    (2 * orders_hi[c] + 10).min(crate::fem::quadrature::MAX_TRIANGLE_DEGREE),
                )?;
                let t_hi = l2_shapes(&tab.quad.geom, orders_t[c], &rule.points);
                for b in 0..n_t {
                    let mut r = 0.0;
                    for (k, &bary) in rule.points.iter().enumerate() {
                        let pt = tab.quad.geom.to_physical(bary);
                        r += rule.weights[k] * 2.0 * tab.quad.geom.area
                            * f_source(pt)
                            * t_hi.values[b][k];
                    }
                    asm.add_rhs(&mf, ld(b), r);
                }
            }
            // natural Dirichlet data: + int_GammaT (dtau . n) Tbar
            let eids = mesh.cell_edge_ids(c);
            for (le, &eid) in eids.iter().enumerate() {
                let Some(tag) = mesh.boundary.get(&eid) else { continue };
                if tag.kind != TagKind::DirichletT {
                    continue;
                }
                let frame = dofmap::edge_frame(&mesh, eid);
                let outward = mesh.outward_normal(c, le);
                let len = frame.length();
                let (sn, sw) = gauss_legendre_01(orders_hi[c] + 3);
                let pts: Vec<Pt> = sn.iter().map(|&s| frame.point(s)).collect();
                let tau_vals = tab.hdiv.values_at(&pts);
                for (a, tau_a) in tau_vals.iter().enumerate() {
                    let mut r = 0.0;
                    for (k, wk) in sw.iter().enumerate() {
                        let tbar = boundary.temperature(tag.value_id, pts[k])?;
                        let tn = tau_a[k][0] * outward[0] + tau_a[k][1] * outward[1];
                        r += wk * len * tn * tbar;
                    }
                    asm.add_rhs(&mf, ud(a), r);
                }
            }
        }

        let csc = SymmCsc::from_triplets(mf.n_free, &asm.triplets);
        let perm = mf.permutation(&mesh, &nd_cell_order(&mesh));
        let dsigns = mf.dsigns();
        let mut system = LinearSystem::new(csc, mf.layout(), perm, dsigns);
        system.factor()?;

        let area = mesh.domain_area();
        Ok(WeakerDd {
            mesh,
            mf,
            system,
            cells,
            gauss,
            area,
            b_fixed: asm.b_fixed,
            scaling,
            uses_t,
        })
    }

    pub fn n_gauss(&self) -> usize {
        self.gauss.len()
    }

    pub fn scaling(&self) -> Scaling {
        self.scaling
    }

    pub fn cell_quad(&self, cell: usize) -> &CellQuad {
        &self.cells[cell].quad
    }

    pub fn t_map(&self) -> &DofMap {
        &self.mf.slots[FT].map
    }

    pub fn g_map(&self) -> &DofMap {
        &self.mf.slots[FG].map
    }

    pub fn q_map(&self) -> &DofMap {
        &self.mf.slots[FQ].map
    }

    /// Right-hand side for one assignment of material states.
    fn rhs(&self, assign: &[PointAssignment]) -> Vec<f64> {
        assert_eq!(assign.len(), self.gauss.len());
        let mut b = self.b_fixed.clone();
        let s_g = self.scaling.s_g;
        let s_q = self.scaling.s_q;
        for c in 0..self.mesh.n_cells() {
            let tab = &self.cells[c];
            let nq = tab.quad.nq();
            let w = &tab.quad.weights;
            let n_gs = tab.g_tab.values.len();
            let gd = |l: usize| self.mf.slots[FG].offset + self.mf.slots[FG].map.cell_dofs[c][l];
            let qd = |l: usize| self.mf.slots[FQ].offset + self.mf.slots[FQ].map.cell_dofs[c][l];
            for i in 0..n_gs {
                let mut rx = 0.0;
                let mut ry = 0.0;
                for k in 0..nq {
                    let a = &assign[tab.quad.qstart + k];
                    let wv = w[k] * tab.g_tab.values[i][k];
                    rx += wv * a.g_star[0];
                    ry += wv * a.g_star[1];
                }
                if let Some(fi) = self.mf.free_index[gd(i)] {
                    b[fi] += s_g * rx;
                }
                if let Some(fi) = self.mf.free_index[gd(n_gs + i)] {
                    b[fi] += s_g * ry;
                }
            }
            for (a_q, vals) in tab.q_vals.iter().enumerate() {
                let mut r = 0.0;
                for k in 0..nq {
                    let a = &assign[tab.quad.qstart + k];
                    r += w[k] * (vals[k][0] * a.q_star[0] + vals[k][1] * a.q_star[1]);
                }
                if let Some(fi) = self.mf.free_index[qd(a_q)] {
                    b[fi] += s_q * r;
                }
            }
        }
        b
    }

    fn expand(&self, x_free: &[f64]) -> FieldCoeffs {
        let mut fields = self.mf.expand(x_free);
        FieldCoeffs {
            t: std::mem::take(&mut fields[FT]),
            g: std::mem::take(&mut fields[FG]),
            q: std::mem::take(&mut fields[FQ]),
            lam: std::mem::take(&mut fields[FLAM]),
            tau: std::mem::take(&mut fields[FTAU]),
        }
    }

    /// Evaluates T (with broken gradient), g, q and div q at arbitrary
    /// barycentric points of one cell.
    pub fn eval_cell(&self, coeffs: &FieldCoeffs, cell: usize, bary: &[[f64; 3]]) -> CellEval {
        let tab = &self.cells[cell];
        let orders_t = self.mf.slots[FT].map.cell_order[cell];
        let orders_hi = orders_t + 1;
        let t_tab = l2_shapes(&tab.quad.geom, orders_t, bary);
        let g_tab = l2_shapes(&tab.quad.geom, orders_hi, bary);
        let pts: Vec<Pt> = bary.iter().map(|&b| tab.quad.geom.to_physical(b)).collect();
        let q_vals = tab.hdiv.values_at(&pts);
        let q_divs = tab.hdiv.divs_at(&pts);

        let np = bary.len();
        let mut out = CellEval {
            t: vec![0.0; np],
            grad_t: vec![[0.0; 2]; np],
            g: vec![[0.0; 2]; np],
            q: vec![[0.0; 2]; np],
            div_q: vec![0.0; np],
        };
        let t_dofs = &self.mf.slots[FT].map.cell_dofs[cell];
        for (i, &dof) in t_dofs.iter().enumerate() {
            let co = coeffs.t[dof];
            for k in 0..np {
                out.t[k] += co * t_tab.values[i][k];
                out.grad_t[k][0] += co * t_tab.grads[i][k][0];
                out.grad_t[k][1] += co * t_tab.grads[i][k][1];
            }
        }
        let g_dofs = &self.mf.slots[FG].map.cell_dofs[cell];
        let n_gs = g_dofs.len() / 2;
        for i in 0..n_gs {
            let cx = coeffs.g[g_dofs[i]];
            let cy = coeffs.g[g_dofs[n_gs + i]];
            for k in 0..np {
                out.g[k][0] += cx * g_tab.values[i][k];
                out.g[k][1] += cy * g_tab.values[i][k];
            }
        }
        let q_dofs = &self.mf.slots[FQ].map.cell_dofs[cell];
        for (a, &dof) in q_dofs.iter().enumerate() {
            let co = coeffs.q[dof];
            for k in 0..np {
                out.q[k][0] += co * q_vals[a][k][0];
                out.q[k][1] += co * q_vals[a][k][1];
                out.div_q[k] += co * q_divs[a][k];
            }
        }
        out
    }

    /// Flux values reconstructed from a coefficient vector at physical
    /// points of one cell (used for normal-trace checks on edges).
    pub fn eval_q_at(&self, q_coeffs: &[f64], cell: usize, pts: &[Pt]) -> Vec<[f64; 2]> {
        let tab = &self.cells[cell];
        let vals = tab.hdiv.values_at(pts);
        let q_dofs = &self.mf.slots[FQ].map.cell_dofs[cell];
        let mut out = vec![[0.0; 2]; pts.len()];
        for (a, &dof) in q_dofs.iter().enumerate() {
            let co = q_coeffs[dof];
            for k in 0..pts.len() {
                out[k][0] += co * vals[a][k][0];
                out[k][1] += co * vals[a][k][1];
            }
        }
        out
    }

    /// Temperature trace from within one cell at physical points.
    pub fn eval_t_at(&self, t_coeffs: &[f64], cell: usize, pts: &[Pt]) -> Vec<f64> {
        let tab = &self.cells[cell];
        let bary: Vec<[f64; 3]> = pts.iter().map(|&p| tab.quad.geom.barycentric(p)).collect();
        let t_tab = l2_shapes(&tab.quad.geom, self.mf.slots[FT].map.cell_order[cell], &bary);
        let t_dofs = &self.mf.slots[FT].map.cell_dofs[cell];
        let mut out = vec![0.0; pts.len()];
        for (i, &dof) in t_dofs.iter().enumerate() {
            for k in 0..pts.len() {
                out[k] += t_coeffs[dof] * t_tab.values[i][k];
            }
        }
        out
    }

    /// Global L2 errors of T and q against exact fields, integrated with a
    /// rule well above the approximation order.
    pub fn l2_errors(
        &self,
        coeffs: &FieldCoeffs,
        exact_t: &(dyn Fn(Pt) -> f64 + Sync),
        exact_q: &(dyn Fn(Pt) -> [f64; 2] + Sync),
    ) -> (f64, f64) {
        let mut err_t = 0.0;
        let mut err_q = 0.0;
        for c in 0..self.mesh.n_cells() {
            let p = self.mf.slots[FT].map.cell_order[c];
            let rule = crate::fem::quadrature::triangle_rule(2 * (p + 1) + 6).unwrap();
            let ev = self.eval_cell(coeffs, c, &rule.points);
            let geom = &self.cells[c].quad.geom;
            for (k, &bary) in rule.points.iter().enumerate() {
                let pt = geom.to_physical(bary);
                let w = rule.weights[k] * 2.0 * geom.area;
                let dt = ev.t[k] - exact_t(pt);
                let qe = exact_q(pt);
                let dq = [ev.q[k][0] - qe[0], ev.q[k][1] - qe[1]];
                err_t += w * dt * dt;
                err_q += w * (dq[0] * dq[0] + dq[1] * dq[1]);
            }
        }
        (err_t.sqrt(), err_q.sqrt())
    }

    /// L2 projections of analytic fields onto the weaker spaces; used for
    /// field transfer and tailored-dataset construction.
    pub fn project_fields(
        &self,
        t_fn: &(dyn Fn(Pt) -> f64 + Sync),
        g_fn: &(dyn Fn(Pt) -> [f64; 2] + Sync),
        q_fn: &(dyn Fn(Pt) -> [f64; 2] + Sync),
    ) -> FieldCoeffs {
        let mut coeffs = FieldCoeffs {
            t: vec![0.0; self.mf.slots[FT].map.n_dofs],
            g: vec![0.0; self.mf.slots[FG].map.n_dofs],
            q: vec![0.0; self.mf.slots[FQ].map.n_dofs],
            lam: vec![0.0; self.mf.slots[FLAM].map.n_dofs],
            tau: vec![0.0; self.mf.slots[FTAU].map.n_dofs],
        };
        for c in 0..self.mesh.n_cells() {
            let tab = &self.cells[c];
            let nq = tab.quad.nq();
            let w = &tab.quad.weights;
            let det = 2.0 * tab.quad.geom.area;
            // modal bases are reference-orthonormal: <phi_i, phi_j> = det d_ij
            let t_dofs = &self.mf.slots[FT].map.cell_dofs[c];
            for (i, &dof) in t_dofs.iter().enumerate() {
                let mut r = 0.0;
                for k in 0..nq {
                    r += w[k] * t_fn(tab.quad.pts[k]) * tab.t_tab.values[i][k];
                }
                coeffs.t[dof] = r / det;
            }
            let g_dofs = &self.mf.slots[FG].map.cell_dofs[c];
            let n_gs = g_dofs.len() / 2;
            for i in 0..n_gs {
                let mut rx = 0.0;
                let mut ry = 0.0;
                for k in 0..nq {
                    let gv = g_fn(tab.quad.pts[k]);
                    rx += w[k] * gv[0] * tab.g_tab.values[i][k];
                    ry += w[k] * gv[1] * tab.g_tab.values[i][k];
                }
                coeffs.g[g_dofs[i]] = rx / det;
                coeffs.g[g_dofs[n_gs + i]] = ry / det;
            }
        }
        // H(div) interpolation: dof functionals applied to the analytic flux
        interpolate_hdiv(&self.mesh, &self.mf.slots[FQ].map, q_fn, &mut coeffs.q);
        coeffs
    }
}

/// Applies the H(div) dof functionals (edge moments and interior moments) to
/// an analytic flux. Interior dofs are fitted per cell by matching values at
/// the quadrature points in the least-squares sense of the dual basis: the
/// edge dofs are exact functionals; interior dofs use the dual-basis
/// representation of the elementwise L2 projection.
pub fn interpolate_hdiv(
    mesh: &Mesh,
    q_map: &DofMap,
    q_fn: &(dyn Fn(Pt) -> [f64; 2] + Sync),
    out: &mut [f64],
) {
    use crate::fem::dofmap::DofMeta;
    let DofMeta::Hdiv { edge_dof_start } = &q_map.meta else {
        panic!("interpolate_hdiv needs an hdiv map");
    };
    // edge moments
    for eid in 0..mesh.n_edges() {
        let m = q_map.edge_order[eid];
        let frame = dofmap::edge_frame(mesh, eid);
        let (sn, sw) = gauss_legendre_01(m + 3);
        for mom in 0..=m {
            let mut acc = 0.0;
            for (s, w) in sn.iter().zip(&sw) {
                let p = frame.point(*s);
                let qv = q_fn(p);
                acc += w * (qv[0] * frame.normal[0] + qv[1] * frame.normal[1])
                    * basis::legendre01(mom, *s);
            }
            out[edge_dof_start[eid] + mom] = acc;
        }
    }
    // interior dofs: least-squares fit of the residual after edge lift
    for c in 0..mesh.n_cells() {
        let k = q_map.cell_order[c];
        if k < 2 {
            continue;
        }
        let geom = crate::fem::basis::CellGeom::new(mesh.cell_vertices(c));
        let frames = dofmap::cell_frames(mesh, c);
        let hdiv = hdiv_basis(&geom, frames, q_map.cell_edge_orders(mesh, c), k)
            .expect("hdiv basis");
        let rule = crate::fem::quadrature::triangle_rule(2 * k + 2).unwrap();
        let pts: Vec<Pt> = rule.points.iter().map(|&b| geom.to_physical(b)).collect();
        let w: Vec<f64> = rule.weights.iter().map(|w| w * 2.0 * geom.area).collect();
        let vals = hdiv.values_at(&pts);
        let dofs = &q_map.cell_dofs[c];
        let n_edge: usize = hdiv.n_edge_dofs.iter().sum();
        let n_int = hdiv.n_interior;
        if n_int == 0 {
            continue;
        }
        // residual after subtracting the edge-lifted part
        let mut resid = vec![[0.0; 2]; pts.len()];
        for (kq, p) in pts.iter().enumerate() {
            let qv = q_fn(*p);
            resid[kq] = qv;
            for a in 0..n_edge {
                let co = out[dofs[a]];
                resid[kq][0] -= co * vals[a][kq][0];
                resid[kq][1] -= co * vals[a][kq][1];
            }
        }
        // normal equations over the interior functions
        let mut gram = crate::fem::smalldense::DMat::zeros(n_int, n_int);
        let mut rhs = vec![0.0; n_int];
        for i in 0..n_int {
            for j in 0..n_int {
                let mut m = 0.0;
                for kq in 0..pts.len() {
                    m += w[kq]
                        * (vals[n_edge + i][kq][0] * vals[n_edge + j][kq][0]
                            + vals[n_edge + i][kq][1] * vals[n_edge + j][kq][1]);
                }
                gram.set(i, j, m);
            }
            let mut r = 0.0;
            for kq in 0..pts.len() {
                r += w[kq]
                    * (vals[n_edge + i][kq][0] * resid[kq][0]
                        + vals[n_edge + i][kq][1] * resid[kq][1]);
            }
            rhs[i] = r;
        }
        let lu = crate::fem::smalldense::DenseLu::factor(gram).expect("interior Gram singular");
        let sol = lu.solve(&rhs);
        for i in 0..n_int {
            out[dofs[n_edge + i]] = sol[i];
        }
    }
}

impl DdOperator for WeakerDd {
    fn gauss(&self) -> &[GaussPoint] {
        &self.gauss
    }

    fn domain_area(&self) -> f64 {
        self.area
    }

    fn solve(&self, assign: &[PointAssignment]) -> FieldCoeffs {
        let b = self.rhs(assign);
        let x = self.system.resolve(&b);
        self.expand(&x)
    }

    fn evaluate(&self, coeffs: &FieldCoeffs) -> Vec<FieldSample> {
        let mut samples = vec![
            FieldSample { t: 0.0, g: [0.0; 2], q: [0.0; 2] };
            self.gauss.len()
        ];
        let chunks: Vec<(usize, Vec<FieldSample>)> = (0..self.mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let tab = &self.cells[c];
                let nq = tab.quad.nq();
                let mut local = vec![FieldSample { t: 0.0, g: [0.0; 2], q: [0.0; 2] }; nq];
                let t_dofs = &self.mf.slots[FT].map.cell_dofs[c];
                for (i, &dof) in t_dofs.iter().enumerate() {
                    let co = coeffs.t[dof];
                    for k in 0..nq {
                        local[k].t += co * tab.t_tab.values[i][k];
                    }
                }
                let g_dofs = &self.mf.slots[FG].map.cell_dofs[c];
                let n_gs = g_dofs.len() / 2;
                for i in 0..n_gs {
                    let cx = coeffs.g[g_dofs[i]];
                    let cy = coeffs.g[g_dofs[n_gs + i]];
                    for k in 0..nq {
                        local[k].g[0] += cx * tab.g_tab.values[i][k];
                        local[k].g[1] += cy * tab.g_tab.values[i][k];
                    }
                }
                let q_dofs = &self.mf.slots[FQ].map.cell_dofs[c];
                for (a, &dof) in q_dofs.iter().enumerate() {
                    let co = coeffs.q[dof];
                    for k in 0..nq {
                        local[k].q[0] += co * tab.q_vals[a][k][0];
                        local[k].q[1] += co * tab.q_vals[a][k][1];
                    }
                }
                (tab.quad.qstart, local)
            })
            .collect();
        for (start, local) in chunks {
            samples[start..start + local.len()].copy_from_slice(&local);
        }
        samples
    }

    fn system(&self) -> &LinearSystem {
        &self.system
    }

    fn search_scaling(&self) -> Scaling {
        self.scaling
    }

    fn search_uses_temperature(&self) -> bool {
        self.uses_t
    }
}
