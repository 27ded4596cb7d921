//! A posteriori error indicators for the weaker formulation, data-driven
//! distance indicators, and exact-solution error norms.
//!
//! Per element: the gradient mismatch eta = ||grad T - g||^2, the
//! conservation residual nu = h ||f - div q||^2, the temperature-jump sum
//! gamma, the combined estimator mu = (eta^2 + nu^2 + gamma^2)^(1/2), and
//! the statistics of the distance-to-dataset at the Gauss points. The global
//! estimator sums the jump contributions over interior edges once.

use crate::fem::quadrature::gauss_legendre_01;
use crate::geom::{self, Pt};
use crate::solvers::weaker::WeakerDd;
use crate::solvers::{DdOperator, DdState};

/// Per-element and global indicator values of one solved state.
#[derive(Debug, Clone)]
pub struct IndicatorReport {
    pub eta: Vec<f64>,
    pub nu: Vec<f64>,
    pub gamma: Vec<f64>,
    pub mu: Vec<f64>,
    pub d_ave: Vec<f64>,
    pub d_std: Vec<f64>,
    /// Optional total error against an exact solution.
    pub e_tot: Option<Vec<f64>>,
    /// Per interior edge: jump indicator, keyed by edge id.
    pub gamma_edges: Vec<f64>,
    pub mu_global: f64,
    pub mu_avg: f64,
    pub mu_avg_bounded: f64,
    pub d_rms: f64,
    pub eps_d: f64,
    /// Elements excluded from the bounded average (d_ave > c_d * d_RMS).
    pub excluded: Vec<bool>,
}

/// Gradient-mismatch indicator eta_e = ||grad T - g||^2 over one cell.
pub fn indicator_grad(dd: &WeakerDd, state: &DdState, cell: usize) -> f64 {
    let quad = dd.cell_quad(cell);
    let ev = dd.eval_cell(&state.coeffs, cell, &quad.bary);
    let mut acc = 0.0;
    for k in 0..quad.nq() {
        let dx = ev.grad_t[k][0] - ev.g[k][0];
        let dy = ev.grad_t[k][1] - ev.g[k][1];
        acc += quad.weights[k] * (dx * dx + dy * dy);
    }
    acc
}

/// Conservation indicator nu_e = h ||f - div q||^2 over one cell.
pub fn indicator_div(
    dd: &WeakerDd,
    state: &DdState,
    cell: usize,
    f_source: &dyn Fn(Pt) -> f64,
) -> f64 {
    let quad = dd.cell_quad(cell);
    let ev = dd.eval_cell(&state.coeffs, cell, &quad.bary);
    let mut acc = 0.0;
    for k in 0..quad.nq() {
        let r = f_source(quad.pts[k]) - ev.div_q[k];
        acc += quad.weights[k] * r * r;
    }
    dd.mesh.element_size(cell) * acc
}

/// Jump indicator of one interior edge: gamma_l = h^(-1/2) ||[T]||_{0,l},
/// with h the longest edge of the element owning the jump.
pub fn indicator_jump(dd: &WeakerDd, state: &DdState, eid: usize) -> f64 {
    let mesh = &dd.mesh;
    let e = mesh.edge(eid);
    if e.is_boundary() {
        return 0.0;
    }
    let (ca, cb) = (e.cells[0], e.cells[1]);
    let pa = mesh.vertices[e.v[0]];
    let pb = mesh.vertices[e.v[1]];
    let len = geom::dist(pa, pb);
    let p_max = mesh.cell_order[ca].max(mesh.cell_order[cb]) as usize;
    let (sn, sw) = gauss_legendre_01(p_max + 2);
    let pts: Vec<Pt> = sn
        .iter()
        .map(|&s| [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])])
        .collect();
    let ta = dd.eval_t_at(&state.coeffs.t, ca, &pts);
    let tb = dd.eval_t_at(&state.coeffs.t, cb, &pts);
    let mut acc = 0.0;
    for k in 0..pts.len() {
        let j = ta[k] - tb[k];
        acc += sw[k] * len * j * j;
    }
    let h = mesh.element_size(ca).max(mesh.element_size(cb));
    (acc / h).sqrt()
}

/// Distance statistics over one cell's Gauss points: mean and population
/// standard deviation.
pub fn dd_distance_stats(dd: &WeakerDd, state: &DdState, cell: usize) -> (f64, f64) {
    let quad = dd.cell_quad(cell);
    let n = quad.nq();
    let dists = &state.assignment[quad.qstart..quad.qstart + n];
    let mean = dists.iter().map(|a| a.distance).sum::<f64>() / n as f64;
    let var = dists
        .iter()
        .map(|a| (a.distance - mean) * (a.distance - mean))
        .sum::<f64>()
        / n as f64;
    (mean, var.sqrt())
}

/// Comparative RMS of the field values (Eq. of the search metric), global
/// over the domain.
pub fn comparative_rms(dd: &WeakerDd, state: &DdState) -> f64 {
    crate::solvers::comparative_rms_of_samples(dd, &state.samples)
}

/// Total error e_tot = ||T - T~||_{1,e} + ||q - q~||_{0,e} with the broken
/// H1 norm for the temperature.
pub fn total_error(
    dd: &WeakerDd,
    state: &DdState,
    cell: usize,
    exact_t: &dyn Fn(Pt) -> f64,
    exact_grad: &dyn Fn(Pt) -> [f64; 2],
    exact_q: &dyn Fn(Pt) -> [f64; 2],
) -> f64 {
    let p = dd.mesh.cell_order[cell] as usize;
    let rule = crate::fem::quadrature::triangle_rule(2 * (p + 1) + 6).unwrap();
    let ev = dd.eval_cell(&state.coeffs, cell, &rule.points);
    let geomc = &dd.cell_quad(cell).geom;
    let mut h1 = 0.0;
    let mut l2q = 0.0;
    for (k, &bary) in rule.points.iter().enumerate() {
        let pt = geomc.to_physical(bary);
        let w = rule.weights[k] * 2.0 * geomc.area;
        let dt = ev.t[k] - exact_t(pt);
        let ge = exact_grad(pt);
        let dgx = ev.grad_t[k][0] - ge[0];
        let dgy = ev.grad_t[k][1] - ge[1];
        h1 += w * (dt * dt + dgx * dgx + dgy * dgy);
        let qe = exact_q(pt);
        let dqx = ev.q[k][0] - qe[0];
        let dqy = ev.q[k][1] - qe[1];
        l2q += w * (dqx * dqx + dqy * dqy);
    }
    h1.sqrt() + l2q.sqrt()
}

/// Bounded average over all N elements, zeroing those with d_ave above the
/// cutoff; the divisor stays N.
pub fn bounded_average(mu: &[f64], d_ave: &[f64], c_d: f64, d_rms: f64) -> f64 {
    let n = mu.len() as f64;
    mu.iter()
        .zip(d_ave)
        .map(|(m, d)| if *d <= c_d * d_rms { *m } else { 0.0 })
        .sum::<f64>()
        / n
}

pub fn plain_average(mu: &[f64]) -> f64 {
    mu.iter().sum::<f64>() / mu.len() as f64
}

/// Computes the full indicator report for a solved weaker state.
///
/// `c_d` is the distance cutoff used for the bounded average (elements with
/// d_ave > c_d * d_RMS are excluded). Exact fields, when given, add the
/// per-element total error.
#[allow(clippy::type_complexity)]
pub fn compute_report(
    dd: &WeakerDd,
    state: &DdState,
    f_source: &dyn Fn(Pt) -> f64,
    c_d: f64,
    exact: Option<(&dyn Fn(Pt) -> f64, &dyn Fn(Pt) -> [f64; 2], &dyn Fn(Pt) -> [f64; 2])>,
) -> IndicatorReport {
    let mesh = &dd.mesh;
    let nc = mesh.n_cells();
    let mut eta = vec![0.0; nc];
    let mut nu = vec![0.0; nc];
    let mut gamma = vec![0.0; nc];
    let mut d_ave = vec![0.0; nc];
    let mut d_std = vec![0.0; nc];

    let mut gamma_edges = vec![0.0; mesh.n_edges()];
    for eid in 0..mesh.n_edges() {
        if !mesh.edge(eid).is_boundary() {
            gamma_edges[eid] = indicator_jump(dd, state, eid);
        }
    }
    for cell in 0..nc {
        eta[cell] = indicator_grad(dd, state, cell);
        nu[cell] = indicator_div(dd, state, cell, f_source);
        gamma[cell] = mesh
            .cell_edge_ids(cell)
            .iter()
            .map(|&eid| gamma_edges[eid])
            .sum();
        let (ave, std) = dd_distance_stats(dd, state, cell);
        d_ave[cell] = ave;
        d_std[cell] = std;
    }
    let mu: Vec<f64> = (0..nc)
        .map(|c| (eta[c] * eta[c] + nu[c] * nu[c] + gamma[c] * gamma[c]).sqrt())
        .collect();
    let mu_global = {
        let cells: f64 = (0..nc).map(|c| eta[c] * eta[c] + nu[c] * nu[c]).sum();
        let edges: f64 = gamma_edges.iter().map(|g| g * g).sum();
        (cells + edges).sqrt()
    };
    let d_rms = comparative_rms(dd, state);
    let mu_avg = plain_average(&mu);
    let mu_avg_bounded = bounded_average(&mu, &d_ave, c_d, d_rms);
    let excluded: Vec<bool> = d_ave.iter().map(|d| *d > c_d * d_rms).collect();
    let eps_d = {
        let mut acc = 0.0;
        for (gp, a) in dd.gauss().iter().zip(&state.assignment) {
            acc += gp.weight * a.distance * a.distance;
        }
        (acc / dd.domain_area()).sqrt()
    };
    let e_tot = exact.map(|(t, g, q)| {
        (0..nc)
            .map(|c| total_error(dd, state, c, t, g, q))
            .collect()
    });

    IndicatorReport {
        eta,
        nu,
        gamma,
        mu,
        d_ave,
        d_std,
        e_tot,
        gamma_edges,
        mu_global,
        mu_avg,
        mu_avg_bounded,
        d_rms,
        eps_d,
        excluded,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Scaling;
    use crate::mesh::{generate_structured_square, BoundaryTag, TagKind};
    use crate::solvers::{BoundaryTable, BoundaryValue};
    use crate::solvers::{dd_iterate, InitMode, MaterialSource, StopRule};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn solved_state(n: usize) -> (WeakerDd, DdState) {
        let mesh = generate_structured_square(n, [[0.0, 0.0], [1.0, 1.0]], &|_, _| BoundaryTag {
            kind: TagKind::DirichletT,
            value_id: 0,
        })
        .unwrap();
        let mut bt = BoundaryTable::new();
        bt.insert(0, BoundaryValue::Temperature(Arc::new(|p: Pt| p[0] + 0.5 * p[1])));
        let dd = WeakerDd::new(Arc::new(mesh), &bt, &|_| 0.0, Scaling::UNIT, false).unwrap();
        let source = MaterialSource::LineOracle { k: 1.0, scaling: Scaling::UNIT };
        let (state, _) = dd_iterate(&dd, &source, InitMode::Zero, &StopRule::default());
        (dd, state)
    }

    #[test]
    fn pythagorean_estimator() {
        // mu from (eta, nu, gamma) = (3, 4, 0) is 5
        let mu = (3.0f64 * 3.0 + 4.0 * 4.0 + 0.0).sqrt();
        assert_relative_eq!(mu, 5.0);
    }

    #[test]
    fn linear_solution_has_tiny_indicators() {
        // boundary data x + y/2 with f = 0: the exact solution is linear, so
        // eta, nu, gamma all vanish to solver accuracy
        let (dd, state) = solved_state(2);
        let report = compute_report(&dd, &state, &|_| 0.0, 4.0, None);
        for c in 0..dd.mesh.n_cells() {
            assert!(report.eta[c] < 1e-16, "eta[{c}] = {}", report.eta[c]);
            assert!(report.nu[c] < 1e-16, "nu[{c}] = {}", report.nu[c]);
            assert!(report.gamma[c] < 1e-9, "gamma[{c}] = {}", report.gamma[c]);
        }
        assert!(report.mu_global < 1e-8);
        // single linear field: d_RMS equals the RMS of the fields
        assert!(report.d_rms > 0.0);
        // exact solution supplied: e_tot vanishes too
        let report2 = compute_report(
            &dd,
            &state,
            &|_| 0.0,
            4.0,
            Some((
                &|p: Pt| p[0] + 0.5 * p[1],
                &|_p: Pt| [1.0, 0.5],
                &|_p: Pt| [-1.0, -0.5],
            )),
        );
        for v in report2.e_tot.unwrap() {
            assert!(v < 1e-7, "e_tot {v}");
        }
    }

    #[test]
    fn jump_of_constant_offset() {
        // T = 0 on one cell and 1 on its neighbor across a unit edge with
        // h = sqrt(2): gamma_l = (1 / h)^(1/2) ... constructed directly
        let (dd, mut state) = solved_state(1);
        // overwrite T coefficients: constant 0 on cell 0, constant 1 on 1
        state.coeffs.t.fill(0.0);
        let t_map = dd.t_map();
        // modal constant on the reference triangle is sqrt(2), so the
        // coefficient for T = 1 is 1/sqrt(2)
        let c1 = 1.0 / std::f64::consts::SQRT_2;
        state.coeffs.t[t_map.cell_dofs[1][0]] = c1;
        let eid = (0..dd.mesh.n_edges())
            .find(|&e| !dd.mesh.edge(e).is_boundary())
            .unwrap();
        let g = indicator_jump(&dd, &state, eid);
        // jump = 1 along the diagonal edge of length sqrt(2); h = sqrt(2)
        let expect = (2f64.sqrt() / 2f64.sqrt()).sqrt();
        assert_relative_eq!(g, expect, epsilon = 1e-10);
    }

    #[test]
    fn unit_divergence_residual() {
        // q = 0, f = 1 on a unit-area single cell with h = 1 gives nu = 1;
        // here per cell: nu = h_e * area_e, checked against formula
        let (dd, mut state) = solved_state(1);
        state.coeffs.q.fill(0.0);
        for c in 0..dd.mesh.n_cells() {
            let nu = indicator_div(&dd, &state, c, &|_| 1.0);
            let expect = dd.mesh.element_size(c) * dd.mesh.cell_area(c);
            assert_relative_eq!(nu, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn eta_of_constant_g() {
        // T = 0, g = c constant: eta_e = |c|^2 * area
        let (dd, mut state) = solved_state(1);
        state.coeffs.t.fill(0.0);
        state.coeffs.g.fill(0.0);
        let g_map = dd.g_map();
        let c = [2.0, -1.0];
        for cell in 0..dd.mesh.n_cells() {
            let dofs = &g_map.cell_dofs[cell];
            let n_gs = dofs.len() / 2;
            // constant modal function is sqrt(2) on the reference triangle
            state.coeffs.g[dofs[0]] = c[0] / std::f64::consts::SQRT_2;
            state.coeffs.g[dofs[n_gs]] = c[1] / std::f64::consts::SQRT_2;
        }
        for cell in 0..dd.mesh.n_cells() {
            let eta = indicator_grad(&dd, &state, cell);
            let expect = (c[0] * c[0] + c[1] * c[1]) * dd.mesh.cell_area(cell);
            assert_relative_eq!(eta, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn distance_stats_hand_case() {
        let (dd, mut state) = solved_state(1);
        // constant distance d: (d, 0)
        for a in state.assignment.iter_mut() {
            a.distance = 0.7;
        }
        let (ave, std) = dd_distance_stats(&dd, &state, 0);
        assert_relative_eq!(ave, 0.7);
        assert!(std.abs() < 1e-15);
        // half zeros, half twos -> mean 1, std 1
        let quad_n = dd.cell_quad(0).nq();
        for (i, a) in state.assignment.iter_mut().take(quad_n).enumerate() {
            a.distance = if i % 2 == 0 { 0.0 } else { 2.0 };
        }
        let (ave2, std2) = dd_distance_stats(&dd, &state, 0);
        if quad_n % 2 == 0 {
            assert_relative_eq!(ave2, 1.0);
            assert_relative_eq!(std2, 1.0);
        }
    }

    #[test]
    fn averages_and_exclusion() {
        let mu = vec![2.0, 2.0, 2.0, 2.0];
        let d_ave = vec![0.1, 0.1, 9.0, 9.0];
        // cutoff at 1.0: half excluded, divisor stays N
        assert_relative_eq!(bounded_average(&mu, &d_ave, 1.0, 1.0), 1.0);
        assert_relative_eq!(plain_average(&mu), 2.0);
        // nothing excluded: equal
        assert_relative_eq!(bounded_average(&mu, &d_ave, 100.0, 1.0), 2.0);
        // all excluded: zero
        assert_relative_eq!(bounded_average(&mu, &d_ave, 1e-9, 1e-9), 0.0);
    }

    #[test]
    fn mu_dominates_components() {
        let (dd, state) = solved_state(3);
        let report = compute_report(&dd, &state, &|_| 0.0, 4.0, None);
        for c in 0..dd.mesh.n_cells() {
            let max = report.eta[c].max(report.nu[c]).max(report.gamma[c]);
            assert!(report.mu[c] >= max - 1e-15);
        }
    }

    #[test]
    fn comparative_rms_constant_t() {
        // T = 1, g = q = 0 with S_T = 1 in a 5D metric gives d_RMS = 1;
        // verified through the sample-based formula
        let mesh = generate_structured_square(2, [[0.0, 0.0], [1.0, 1.0]], &|_, _| BoundaryTag {
            kind: TagKind::DirichletT,
            value_id: 0,
        })
        .unwrap();
        let mut bt = BoundaryTable::new();
        bt.insert(0, BoundaryValue::Const(0.0));
        let dd = WeakerDd::new(Arc::new(mesh), &bt, &|_| 0.0, Scaling::UNIT, true).unwrap();
        let source = MaterialSource::LineOracle { k: 1.0, scaling: Scaling::UNIT };
        let (mut state, _) = dd_iterate(&dd, &source, InitMode::Zero, &StopRule::default());
        // force samples to T = 1, g = q = 0
        for s in state.samples.iter_mut() {
            s.t = 1.0;
            s.g = [0.0; 2];
            s.q = [0.0; 2];
        }
        let rms = comparative_rms(&dd, &state);
        assert_relative_eq!(rms, 1.0, epsilon = 1e-12);
        // zero fields: rms = 0 (callers treat this as a guard case)
        for s in state.samples.iter_mut() {
            s.t = 0.0;
        }
        assert_relative_eq!(comparative_rms(&dd, &state), 0.0, epsilon = 1e-15);
    }
}
