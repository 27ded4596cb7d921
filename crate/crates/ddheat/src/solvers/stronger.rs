//! Original ("stronger") data-driven formulation: continuous temperature,
//! discontinuous flux, Dirichlet data essential, Neumann data weak.
//!
//! Unknowns for base order p: T in H1 of order p (T = Tbar on Gamma_T), flux
//! q in vector L2 of order p-1, multiplier lambda in H1 of order p with
//! lambda = 0 on Gamma_T. The temperature block decouples from the (q,
//! lambda) saddle block; both are carried in one symmetric matrix that stays
//! fixed across data-driven iterations.

use super::common::{
    cell_quadratures, Assembler, BoundaryTable, CellQuad, FieldCoeffs, FieldSample, GaussPoint,
    MultiField,
};
use super::ordering::nd_cell_order;
use super::{DdOperator, PointAssignment};
use crate::dataset::Scaling;
use crate::error::{DdError, Result};
use crate::fem::basis::{h1_shapes, l2_shapes, ShapeTable, SpaceKind};
use crate::fem::dofmap::{apply_essential_h1, build_dofmap, build_vector_l2, DofMap};
use crate::fem::quadrature::gauss_legendre_01;
use crate::fem::system::{LinearSystem, SymmCsc};
use crate::geom::Pt;
use crate::mesh::{Mesh, TagKind};
use rayon::prelude::*;
use std::sync::Arc;

struct CellTables {
    quad: CellQuad,
    t_tab: ShapeTable,
    q_tab: ShapeTable,
}

pub struct StrongerDd {
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

const FT: usize = 0;
const FQ: usize = 1;
const FLAM: usize = 2;

impl StrongerDd {
    pub fn new(
        mesh: Arc<Mesh>,
        boundary: &BoundaryTable,
        f_source: &(dyn Fn(Pt) -> f64 + Sync),
        scaling: Scaling,
        uses_t: bool,
    ) -> Result<StrongerDd> {
        let orders_t: Vec<usize> = mesh.cell_order.iter().map(|&p| p as usize).collect();
        for &p in &orders_t {
            SpaceKind::H1Continuous.validate_order(p)?;
            if p < 1 {
                return Err(DdError::UnsupportedOrder {
                    space: "stronger formulation temperature",
                    order: p,
                    min: 1,
                    max: 3,
                });
            }
        }
        let orders_q: Vec<usize> = orders_t.iter().map(|p| p - 1).collect();

        let mut t_map = build_dofmap(&mesh, SpaceKind::H1Continuous, &orders_t)?;
        let mut lam_map = build_dofmap(&mesh, SpaceKind::H1Continuous, &orders_t)?;
        let q_map = build_vector_l2(&mesh, &orders_q)?;

        apply_essential_h1(&mut t_map, &mesh, &|eid| {
            let tag = mesh.boundary.get(&eid)?;
            (tag.kind == TagKind::DirichletT).then(|| {
                let id = tag.value_id;
                Box::new(move |p: Pt| boundary.temperature(id, p).expect("T value unbound"))
                    as Box<dyn Fn(Pt) -> f64>
            })
        });
        apply_essential_h1(&mut lam_map, &mesh, &|eid| {
            let tag = mesh.boundary.get(&eid)?;
            (tag.kind == TagKind::DirichletT).then(|| Box::new(|_: Pt| 0.0) as Box<dyn Fn(Pt) -> f64>)
        });

        let mf = MultiField::new(vec![
            ("t", t_map, 1, 0),
            ("q", q_map, 1, 1),
            ("lam", lam_map, -1, 2),
        ]);

        let (quads, gauss) = cell_quadratures(&mesh, &|c| {
            let m = mf.slots[FT].map.cell_edge_orders(&mesh, c).iter().copied().max().unwrap();
            2 * m.max(orders_t[c]) + 2
        })?;
        let cells: Vec<CellTables> = quads
            .into_par_iter()
            .enumerate()
            .map(|(c, quad)| {
                let t_tab = h1_shapes(
                    &quad.geom,
                    mesh.cells[c],
                    mf.slots[FT].map.cell_edge_orders(&mesh, c),
                    orders_t[c],
                    &quad.bary,
                );
                let q_tab = l2_shapes(&quad.geom, orders_q[c], &quad.bary);
                CellTables { quad, t_tab, q_tab }
            })
            .collect();

        let mut asm = Assembler::new(mf.n_free);
        let s_g = scaling.s_g;
        let s_q = scaling.s_q;
        for c in 0..mesh.n_cells() {
            let tab = &cells[c];
            let nq = tab.quad.nq();
            let w = &tab.quad.weights;
            let n_t = tab.t_tab.values.len();
            let n_qs = tab.q_tab.values.len();
            let td = |l: usize| mf.slots[FT].offset + mf.slots[FT].map.cell_dofs[c][l];
            let qd = |l: usize| mf.slots[FQ].offset + mf.slots[FQ].map.cell_dofs[c][l];
            let ld = |l: usize| mf.slots[FLAM].offset + mf.slots[FLAM].map.cell_dofs[c][l];

            // S_g (grad T, grad dT)
            for i in 0..n_t {
                for j in 0..n_t {
                    let mut m = 0.0;
                    for k in 0..nq {
                        m += w[k]
                            * (tab.t_tab.grads[i][k][0] * tab.t_tab.grads[j][k][0]
                                + tab.t_tab.grads[i][k][1] * tab.t_tab.grads[j][k][1]);
                    }
                    asm.add(&mf, td(i), td(j), s_g * m);
                }
            }
            // S_q (q, dq): block-diagonal mass per component
            for i in 0..n_qs {
                for j in 0..n_qs {
                    let mut m = 0.0;
                    for k in 0..nq {
                        m += w[k] * tab.q_tab.values[i][k] * tab.q_tab.values[j][k];
                    }
                    m *= s_q;
                    asm.add(&mf, qd(i), qd(j), m);
                    asm.add(&mf, qd(n_qs + i), qd(n_qs + j), m);
                }
            }
            // (grad lambda, dq) coupling; lambda shares the T basis
            for i in 0..n_qs {
                for b in 0..n_t {
                    let mut mx = 0.0;
                    let mut my = 0.0;
                    for k in 0..nq {
                        mx += w[k] * tab.q_tab.values[i][k] * tab.t_tab.grads[b][k][0];
                        my += w[k] * tab.q_tab.values[i][k] * tab.t_tab.grads[b][k][1];
                    }
                    asm.add(&mf, qd(i), ld(b), mx);
                    asm.add(&mf, ld(b), qd(i), mx);
                    asm.add(&mf, qd(n_qs + i), ld(b), my);
                    asm.add(&mf, ld(b), qd(n_qs + i), my);
                }
            }
            // fixed rhs, lambda row: (qbar, dlam)_Gq - (f, dlam); richer
            // rule for the possibly peaked source
            {
                let rule = crate::fem::quadrature::triangle_rule(
                    (2 * orders_t[c] + 10).min(crate::fem::quadrature::MAX_TRIANGLE_DEGREE),
                )?;
                let t_hi = h1_shapes(
                    &tab.quad.geom,
                    mesh.cells[c],
                    mf.slots[FLAM].map.cell_edge_orders(&mesh, c),
                    orders_t[c],
                    &rule.points,
                );
                for b in 0..n_t {
                    let mut r = 0.0;
                    for (k, &bary) in rule.points.iter().enumerate() {
                        let pt = tab.quad.geom.to_physical(bary);
                        r -= rule.weights[k] * 2.0 * tab.quad.geom.area
                            * f_source(pt)
                            * t_hi.values[b][k];
                    }
                    asm.add_rhs(&mf, ld(b), r);
                }
            }
            let eids = mesh.cell_edge_ids(c);
            for (le, &eid) in eids.iter().enumerate() {
                let Some(tag) = mesh.boundary.get(&eid) else { continue };
                if tag.kind != TagKind::NeumannQ {
                    continue;
                }
                let frame = crate::fem::dofmap::edge_frame(&mesh, eid);
                let outward = mesh.outward_normal(c, le);
                let len = frame.length();
                let (sn, sw) = gauss_legendre_01(orders_t[c] + 3);
                let bary: Vec<[f64; 3]> = sn
                    .iter()
                    .map(|&s| tab.quad.geom.barycentric(frame.point(s)))
                    .collect();
                let lam_tab = h1_shapes(
                    &tab.quad.geom,
                    mesh.cells[c],
                    mf.slots[FLAM].map.cell_edge_orders(&mesh, c),
                    orders_t[c],
                    &bary,
                );
                for (b, lam_b) in lam_tab.values.iter().enumerate() {
                    let mut r = 0.0;
                    for (k, wk) in sw.iter().enumerate() {
                        let p = frame.point(sn[k]);
                        let qbar = boundary.normal_flux(tag.value_id, p, outward)?;
                        r += wk * len * qbar * lam_b[k];
                    }
                    asm.add_rhs(&mf, ld(b), r);
                }
            }
        }

        let csc = SymmCsc::from_triplets(mf.n_free, &asm.triplets);
        let perm = mf.permutation(&mesh, &nd_cell_order(&mesh));
        let dsigns = mf.dsigns();
        let mut system = LinearSystem::new(csc, mf.layout(), perm, dsigns);
        system.factor()?;

        let area = mesh.domain_area();
        Ok(StrongerDd {
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

    pub fn t_map(&self) -> &DofMap {
        &self.mf.slots[FT].map
    }

    pub fn q_map(&self) -> &DofMap {
        &self.mf.slots[FQ].map
    }

    fn rhs(&self, assign: &[PointAssignment]) -> Vec<f64> {
        let mut b = self.b_fixed.clone();
        let s_g = self.scaling.s_g;
        let s_q = self.scaling.s_q;
        for c in 0..self.mesh.n_cells() {
            let tab = &self.cells[c];
            let nq = tab.quad.nq();
            let w = &tab.quad.weights;
            let n_t = tab.t_tab.values.len();
            let n_qs = tab.q_tab.values.len();
            let td = |l: usize| self.mf.slots[FT].offset + self.mf.slots[FT].map.cell_dofs[c][l];
            let qd = |l: usize| self.mf.slots[FQ].offset + self.mf.slots[FQ].map.cell_dofs[c][l];
            for i in 0..n_t {
                let mut r = 0.0;
                for k in 0..nq {
                    let a = &assign[tab.quad.qstart + k];
                    r += w[k]
                        * (a.g_star[0] * tab.t_tab.grads[i][k][0]
                            + a.g_star[1] * tab.t_tab.grads[i][k][1]);
                }
                if let Some(fi) = self.mf.free_index[td(i)] {
                    b[fi] += s_g * r;
                }
            }
            for i in 0..n_qs {
                let mut rx = 0.0;
                let mut ry = 0.0;
                for k in 0..nq {
                    let a = &assign[tab.quad.qstart + k];
                    let wv = w[k] * tab.q_tab.values[i][k];
                    rx += wv * a.q_star[0];
                    ry += wv * a.q_star[1];
                }
                if let Some(fi) = self.mf.free_index[qd(i)] {
                    b[fi] += s_q * rx;
                }
                if let Some(fi) = self.mf.free_index[qd(n_qs + i)] {
                    b[fi] += s_q * ry;
                }
            }
        }
        b
    }

    fn expand(&self, x_free: &[f64]) -> FieldCoeffs {
        let mut fields = self.mf.expand(x_free);
        FieldCoeffs {
            t: std::mem::take(&mut fields[FT]),
            g: Vec::new(),
            q: std::mem::take(&mut fields[FQ]),
            lam: std::mem::take(&mut fields[FLAM]),
            tau: Vec::new(),
        }
    }

    /// Global L2 errors of T and q against exact fields.
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
            let rule = crate::fem::quadrature::triangle_rule(2 * p + 6).unwrap();
            let (tv, _, qv) = self.eval_cell(coeffs, c, &rule.points);
            let geom = &self.cells[c].quad.geom;
            for (k, &bary) in rule.points.iter().enumerate() {
                let pt = geom.to_physical(bary);
                let w = rule.weights[k] * 2.0 * geom.area;
                let dt = tv[k] - exact_t(pt);
                let qe = exact_q(pt);
                let dq = [qv[k][0] - qe[0], qv[k][1] - qe[1]];
                err_t += w * dt * dt;
                err_q += w * (dq[0] * dq[0] + dq[1] * dq[1]);
            }
        }
        (err_t.sqrt(), err_q.sqrt())
    }

    /// T (value and gradient) and q at arbitrary barycentric points of one
    /// cell; the search gradient of the stronger formulation is grad T.
    pub fn eval_cell(
        &self,
        coeffs: &FieldCoeffs,
        cell: usize,
        bary: &[[f64; 3]],
    ) -> (Vec<f64>, Vec<[f64; 2]>, Vec<[f64; 2]>) {
        let tab = &self.cells[cell];
        let t_tab = h1_shapes(
            &tab.quad.geom,
            self.mesh.cells[cell],
            self.mf.slots[FT].map.cell_edge_orders(&self.mesh, cell),
            self.mf.slots[FT].map.cell_order[cell],
            bary,
        );
        let q_tab = l2_shapes(&tab.quad.geom, self.mf.slots[FQ].map.cell_order[cell], bary);
        let np = bary.len();
        let mut t = vec![0.0; np];
        let mut grad_t = vec![[0.0; 2]; np];
        let mut q = vec![[0.0; 2]; np];
        for (i, &dof) in self.mf.slots[FT].map.cell_dofs[cell].iter().enumerate() {
            let co = coeffs.t[dof];
            for k in 0..np {
                t[k] += co * t_tab.values[i][k];
                grad_t[k][0] += co * t_tab.grads[i][k][0];
                grad_t[k][1] += co * t_tab.grads[i][k][1];
            }
        }
        let q_dofs = &self.mf.slots[FQ].map.cell_dofs[cell];
        let n_qs = q_dofs.len() / 2;
        for i in 0..n_qs {
            let cx = coeffs.q[q_dofs[i]];
            let cy = coeffs.q[q_dofs[n_qs + i]];
            for k in 0..np {
                q[k][0] += cx * q_tab.values[i][k];
                q[k][1] += cy * q_tab.values[i][k];
            }
        }
        (t, grad_t, q)
    }
}

impl DdOperator for StrongerDd {
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
        let mut samples = vec![FieldSample { t: 0.0, g: [0.0; 2], q: [0.0; 2] }; self.gauss.len()];
        let chunks: Vec<(usize, Vec<FieldSample>)> = (0..self.mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let tab = &self.cells[c];
                let nq = tab.quad.nq();
                let mut local = vec![FieldSample { t: 0.0, g: [0.0; 2], q: [0.0; 2] }; nq];
                for (i, &dof) in self.mf.slots[FT].map.cell_dofs[c].iter().enumerate() {
                    let co = coeffs.t[dof];
                    for k in 0..nq {
                        local[k].t += co * tab.t_tab.values[i][k];
                        local[k].g[0] += co * tab.t_tab.grads[i][k][0];
                        local[k].g[1] += co * tab.t_tab.grads[i][k][1];
                    }
                }
                let q_dofs = &self.mf.slots[FQ].map.cell_dofs[c];
                let n_qs = q_dofs.len() / 2;
                for i in 0..n_qs {
                    let cx = coeffs.q[q_dofs[i]];
                    let cy = coeffs.q[q_dofs[n_qs + i]];
                    for k in 0..nq {
                        local[k].q[0] += cx * tab.q_tab.values[i][k];
                        local[k].q[1] += cy * tab.q_tab.values[i][k];
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
