//! Adaptive hp-refinement driven jointly by the error estimator and the
//! distance-to-dataset indicators.
//!
//! Order refinement targets elements with a high estimator that are still
//! well informed by the dataset; mesh refinement targets flux singularities
//! at boundary corners and elements whose distance statistics show partial
//! dataset coverage. Marked сells are bisected conformally; fields are
//! transferred by projection and the assignments re-seeded by a fresh
//! nearest search.

use crate::error::Result;
use crate::geom::Pt;
use crate::indicators::{compute_report, IndicatorReport};
use crate::mesh::Mesh;
use crate::solvers::weaker::WeakerDd;
use crate::solvers::{
    dd_iterate, search_fields, BoundaryTable, DdOperator, DdState, FieldCoeffs, InitMode,
    MaterialSource, SolveReport, StopRule,
};
use std::collections::BTreeSet;
use std::sync::Arc;

/// Threshold table of the refinement algorithm.
#[derive(Debug, Clone, Copy)]
pub struct Thresholds {
    /// Order-increase factor on the bounded average estimator.
    pub c_p: f64,
    /// Distance cutoff against d_RMS: beyond it an element is considered
    /// uninformed and never p-refined.
    pub c_d: f64,
    /// Std-deviation cutoff against d_RMS for mesh refinement.
    pub c_s: f64,
    /// Std-deviation cutoff against the element's own average distance.
    pub c_sa: f64,
    /// Mesh-refinement factor on the plain average estimator (corner cells).
    pub c_h: f64,
    pub n_rounds: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { c_p: 1.5, c_d: 4.0, c_s: 0.5, c_sa: 0.5, c_h: 4.0, n_rounds: 6 }
    }
}

/// Cells marked for order increase and for bisection.
#[derive(Debug, Clone, Default)]
pub struct MarkSet {
    pub p_marks: BTreeSet<usize>,
    pub h_marks: BTreeSet<usize>,
}

/// Applies the marking rules to an indicator report.
pub fn mark(report: &IndicatorReport, mesh: &Mesh, thresholds: &Thresholds) -> MarkSet {
    let corners = mesh.boundary_corner_vertices();
    let corner_adjacent: Vec<bool> = (0..mesh.n_cells())
        .map(|c| mesh.cells[c].iter().any(|v| corners.contains(v)))
        .collect();
    // an all-zero field state has d_RMS = 0; distance comparisons against it
    // are skipped (nothing excluded, no distance-driven h-marks)
    let distances_usable = report.d_rms > 0.0;

    let mut marks = MarkSet::default();
    for c in 0..mesh.n_cells() {
        let distance_ok =
            !distances_usable || report.d_ave[c] <= thresholds.c_d * report.d_rms;
        if report.mu[c] > thresholds.c_p * report.mu_avg_bounded && distance_ok {
            marks.p_marks.insert(c);
        }
        let corner_mark =
            report.mu[c] > thresholds.c_h * report.mu_avg && corner_adjacent[c];
        let spread_mark = distances_usable
            && report.d_std[c] > thresholds.c_s * report.d_rms
            && report.d_std[c] > thresholds.c_sa * report.d_ave[c];
        if corner_mark || spread_mark {
            marks.h_marks.insert(c);
        }
    }
    marks
}

/// One completed refinement round.
pub struct AdaptRound {
    pub mesh: Arc<Mesh>,
    pub state: DdState,
    pub solve_report: SolveReport,
    pub report: IndicatorReport,
    pub marks: MarkSet,
    /// p-marks dropped because the supported order ceiling was reached.
    pub p_saturated: usize,
    pub n_free_dofs: usize,
}

/// Highest temperature order of the weaker formulation (flux order ceiling
/// minus one).
pub const MAX_WEAKER_ORDER: u8 = 2;

/// Runs `n_rounds` of solve / indicate / mark / refine on the weaker
/// formulation, starting from the given mesh (Algorithm starts at p = 1 and
/// the coarsest mesh; the caller sets `mesh.cell_order` accordingly).
///
/// Per round the solved state, indicator report and marks are returned; an
/// empty mark set ends the loop early.
#[allow(clippy::too_many_arguments)]
pub fn adapt_loop(
    mesh0: Arc<Mesh>,
    boundary: &BoundaryTable,
    f_source: &(dyn Fn(Pt) -> f64 + Sync),
    source: &MaterialSource,
    thresholds: &Thresholds,
    stop: &StopRule,
    init: InitMode,
    uses_t: bool,
) -> Result<Vec<AdaptRound>> {
    let mut rounds: Vec<AdaptRound> = Vec::new();
    let mut mesh = mesh0;
    let mut next_init = init;

    for round in 0..thresholds.n_rounds {
        let dd = WeakerDd::new(mesh.clone(), boundary, f_source, source.scaling(), uses_t)?;
        let (state, solve_report) = dd_iterate(&dd, source, next_init, stop);
        let report = compute_report(&dd, &state, &f_source, thresholds.c_d, None);
        let marks = mark(&report, &mesh, thresholds);

        // apply order marks, capped at the supported ceiling
        let mut new_orders = mesh.cell_order.clone();
        let mut p_saturated = 0;
        for &c in &marks.p_marks {
            if new_orders[c] < MAX_WEAKER_ORDER {
                new_orders[c] += 1;
            } else {
                p_saturated += 1;
            }
        }

        let done = marks.p_marks.is_empty() && marks.h_marks.is_empty();
        let last = round + 1 == thresholds.n_rounds;
        let n_free_dofs = dd.system().n();
        if done || last {
            rounds.push(AdaptRound {
                mesh: mesh.clone(),
                state,
                solve_report,
                report,
                marks,
                p_saturated,
                n_free_dofs,
            });
            break;
        }

        // bisect marked cells on the order-updated mesh
        let mut marked_mesh = (*mesh).clone();
        marked_mesh.cell_order = new_orders;
        let (refined, parents) = marked_mesh.refine(&marks.h_marks)?;
        let refined = Arc::new(refined);

        // build the next operator, transfer fields, re-seed assignments
        let next_dd =
            WeakerDd::new(refined.clone(), boundary, f_source, source.scaling(), uses_t)?;
        let transferred = transfer_state(&dd, &state.coeffs, &next_dd, &parents);
        let assignment = search_fields(&next_dd, source, &transferred);

        rounds.push(AdaptRound {
            mesh: mesh.clone(),
            state,
            solve_report,
            report,
            marks,
            p_saturated,
            n_free_dofs,
        });
        mesh = refined;
        next_init = InitMode::Assignment(assignment);
    }
    Ok(rounds)
}

/// Projects the old solution onto the refined mesh's spaces: elementwise L2
/// projection for T and g, edge-moment interpolation for q. Essential dofs
/// of the new mesh keep their boundary values; multipliers are not carried.
pub fn transfer_state(
    old: &WeakerDd,
    old_coeffs: &FieldCoeffs,
    new: &WeakerDd,
    parents: &[usize],
) -> FieldCoeffs {
    let mut out = FieldCoeffs {
        t: vec![0.0; new.t_map().n_dofs],
        g: vec![0.0; new.g_map().n_dofs],
        q: vec![0.0; new.q_map().n_dofs],
        lam: Vec::new(),
        tau: Vec::new(),
    };
    let eval_old = |new_cell: usize, pts: &[Pt]| {
        let parent = parents[new_cell];
        let geom_old = &old.cell_quad(parent).geom;
        let bary: Vec<[f64; 3]> = pts.iter().map(|&p| geom_old.barycentric(p)).collect();
        old.eval_cell(old_coeffs, parent, &bary)
    };

    // T and g: L2 projection per new cell (modal bases are orthonormal on
    // the reference cell, so the projection is a scaled moment)
    for nc in 0..new.mesh.n_cells() {
        let quad = new.cell_quad(nc);
        let ev = eval_old(nc, &quad.pts);
        let det = 2.0 * quad.geom.area;
        let p_new = new.t_map().cell_order[nc];
        let t_tab = crate::fem::basis::l2_shapes(&quad.geom, p_new, &quad.bary);
        for (i, &dof) in new.t_map().cell_dofs[nc].iter().enumerate() {
            let mut r = 0.0;
            for k in 0..quad.nq() {
                r += quad.weights[k] * ev.t[k] * t_tab.values[i][k];
            }
            out.t[dof] = r / det;
        }
        let g_tab = crate::fem::basis::l2_shapes(&quad.geom, p_new + 1, &quad.bary);
        let g_dofs = &new.g_map().cell_dofs[nc];
        let n_gs = g_dofs.len() / 2;
        for i in 0..n_gs {
            let mut rx = 0.0;
            let mut ry = 0.0;
            for k in 0..quad.nq() {
                rx += quad.weights[k] * ev.g[k][0] * g_tab.values[i][k];
                ry += quad.weights[k] * ev.g[k][1] * g_tab.values[i][k];
            }
            out.g[g_dofs[i]] = rx / det;
            out.g[g_dofs[n_gs + i]] = ry / det;
        }
    }

    // q: edge moments of the old flux (single-valued across old interfaces,
    // so either incident parent gives the same trace)
    {
        use crate::fem::dofmap::DofMeta;
        let q_map = new.q_map();
        let DofMeta::Hdiv { edge_dof_start } = &q_map.meta else { unreachable!() };
        for eid in 0..new.mesh.n_edges() {
            let owner = new.mesh.edge(eid).cells[0];
            let parent = parents[owner];
            let m = q_map.edge_order[eid];
            let frame = crate::fem::dofmap::edge_frame(&new.mesh, eid);
            let (sn, sw) = crate::fem::quadrature::gauss_legendre_01(m + 3);
            let pts: Vec<Pt> = sn.iter().map(|&s| frame.point(s)).collect();
            let qv = old.eval_q_at(&old_coeffs.q, parent, &pts);
            for mom in 0..=m {
                let mut acc = 0.0;
                for (k, w) in sw.iter().enumerate() {
                    let qn = qv[k][0] * frame.normal[0] + qv[k][1] * frame.normal[1];
                    acc += w * qn * crate::fem::basis::legendre01(mom, sn[k]);
                }
                out.q[edge_dof_start[eid] + mom] = acc;
            }
        }
        // interior dofs: least-squares fit of the residual per cell
        for nc in 0..new.mesh.n_cells() {
            let k_ord = q_map.cell_order[nc];
            if k_ord < 2 {
                continue;
            }
            let quad = new.cell_quad(nc);
            let vals = {
                let frames = crate::fem::dofmap::cell_frames(&new.mesh, nc);
                let hdiv = crate::fem::basis::hdiv_basis(
                    &quad.geom,
                    frames,
                    q_map.cell_edge_orders(&new.mesh, nc),
                    k_ord,
                )
                .expect("hdiv basis");
                hdiv.values_at(&quad.pts)
            };
            let dofs = &q_map.cell_dofs[nc];
            let n_int = dofs.len() - (0..3).map(|e| q_map.cell_edge_orders(&new.mesh, nc)[e] + 1).sum::<usize>();
            if n_int == 0 {
                continue;
            }
            let n_edge = dofs.len() - n_int;
            let ev = eval_old(nc, &quad.pts);
            let mut resid: Vec<[f64; 2]> = ev.q.clone();
            for (kq, r) in resid.iter_mut().enumerate() {
                for a in 0..n_edge {
                    let co = out.q[dofs[a]];
                    r[0] -= co * vals[a][kq][0];
                    r[1] -= co * vals[a][kq][1];
                }
            }
            let mut gram = crate::fem::smalldense::DMat::zeros(n_int, n_int);
            let mut rhs = vec![0.0; n_int];
            for i in 0..n_int {
                for j in 0..n_int {
                    let mut m = 0.0;
                    for kq in 0..quad.nq() {
                        m += quad.weights[kq]
                            * (vals[n_edge + i][kq][0] * vals[n_edge + j][kq][0]
                                + vals[n_edge + i][kq][1] * vals[n_edge + j][kq][1]);
                    }
                    gram.set(i, j, m);
                }
                for kq in 0..quad.nq() {
                    rhs[i] += quad.weights[kq]
                        * (vals[n_edge + i][kq][0] * resid[kq][0]
                            + vals[n_edge + i][kq][1] * resid[kq][1]);
                }
            }
            if let Some(lu) = crate::fem::smalldense::DenseLu::factor(gram) {
                let sol = lu.solve(&rhs);
                for i in 0..n_int {
                    out.q[dofs[n_edge + i]] = sol[i];
                }
            }
        }
        // essential dofs keep the boundary data of the new system
        for (d, c) in q_map.constrained.iter().enumerate() {
            if let Some(v) = c {
                out.q[d] = *v;
            }
        }
    }
    out
}
