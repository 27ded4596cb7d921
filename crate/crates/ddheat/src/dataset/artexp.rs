//! Synthetic-experiment ("artexp") dataset: nonlinear reference solves over
//! a grid of boundary-temperature pairs, with the material state recorded at
//! every integration point.

use super::{compute_scaling, DatasetDim, MaterialDataset, MaterialPoint, Provenance};
use crate::error::{DdError, Result};
use crate::mesh::{Mesh, VAL_T_IN, VAL_T_OUT, VAL_Q_ZERO};
use crate::solvers::reference::{solve_reference_nonlinear, NewtonParams};
use crate::solvers::{BoundaryTable, BoundaryValue, KCoeffs};
use std::sync::Arc;

/// Runs `n_levels x n_levels` experiments over ordered boundary-temperature
/// pairs from `t_range` on the given mesh (inner/outer Dirichlet boundaries
/// tagged with [`VAL_T_IN`] / [`VAL_T_OUT`], insulated cuts) and records
/// {T, grad T, q = -k(T) grad T} at every Gauss point.
pub fn generate_artexp(
    t_range: [f64; 2],
    n_levels: usize,
    mesh: &Arc<Mesh>,
    k_coeffs: KCoeffs,
    newton: &NewtonParams,
) -> Result<MaterialDataset> {
    if n_levels < 2 {
        return Err(DdError::Dataset("artexp needs n_levels >= 2".into()));
    }
    let level = |i: usize| {
        t_range[0] + (t_range[1] - t_range[0]) * i as f64 / (n_levels - 1) as f64
    };
    let mut points: Vec<MaterialPoint> = Vec::new();
    for i_in in 0..n_levels {
        for i_out in 0..n_levels {
            let t_in = level(i_in);
            let t_out = level(i_out);
            let mut bt = BoundaryTable::new();
            bt.insert(VAL_T_IN, BoundaryValue::Const(t_in));
            bt.insert(VAL_T_OUT, BoundaryValue::Const(t_out));
            bt.insert(VAL_Q_ZERO, BoundaryValue::Const(0.0));
            let sol = solve_reference_nonlinear(mesh, &bt, &|_| 0.0, k_coeffs, newton)
                .map_err(|e| {
                    DdError::Dataset(format!(
                        "experiment (T_in={t_in}, T_out={t_out}) failed: {e}"
                    ))
                })?;
            for c in 0..mesh.n_cells() {
                let quad = sol.cell_quad(c);
                let bary = quad.bary.clone();
                let (tv, gv) = sol.eval_cell(c, &bary);
                for k in 0..bary.len() {
                    let q = sol.flux_at(tv[k], gv[k]);
                    points.push(MaterialPoint {
                        temperature: Some(tv[k]),
                        gradient: gv[k],
                        flux: q,
                    });
                }
            }
        }
    }
    let scaling = compute_scaling(&points, DatasetDim::Five)?;
    MaterialDataset::from_points(
        points,
        scaling,
        DatasetDim::Five,
        Provenance {
            generator: format!(
                "artexp T_range=[{}, {}] n_levels={n_levels} k=({}, {}, {})",
                t_range[0], t_range[1], k_coeffs.c0, k_coeffs.c1, k_coeffs.c2
            ),
            tweaks: vec![],
            seed: None,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_quarter_annulus;

    fn small_annulus() -> Arc<Mesh> {
        let mut m = generate_quarter_annulus(0.05, 0.15, 0.02).unwrap();
        m.cell_order = vec![2; m.n_cells()];
        Arc::new(m)
    }

    #[test]
    fn counts_and_residual_against_material_law() {
        let mesh = small_annulus();
        let k = KCoeffs::GRAPHITE;
        let ds = generate_artexp([400.0, 1100.0], 3, &mesh, k, &NewtonParams::default()).unwrap();
        // 9 experiments x Gauss points per mesh
        assert_eq!(ds.len() % 9, 0);
        assert!(ds.len() > 9 * mesh.n_cells());
        // every recorded point satisfies q = -k(T) g by construction
        for p in ds.points() {
            let t = p.temperature.unwrap();
            assert!((400.0 - 60.0..=1100.0 + 60.0).contains(&t), "T out of range: {t}");
            let kt = k.k(t);
            for c in 0..2 {
                let r = p.flux[c] + kt * p.gradient[c];
                let scale = p.flux[c].abs().max(kt * p.gradient[c].abs()).max(1.0);
                assert!(r.abs() / scale < 1e-12, "material law residual {r}");
            }
        }
    }

    #[test]
    fn equal_boundary_temperatures_give_uniform_state() {
        let mesh = small_annulus();
        let mut bt = BoundaryTable::new();
        bt.insert(VAL_T_IN, BoundaryValue::Const(500.0));
        bt.insert(VAL_T_OUT, BoundaryValue::Const(500.0));
        bt.insert(VAL_Q_ZERO, BoundaryValue::Const(0.0));
        let sol = solve_reference_nonlinear(
            &mesh,
            &bt,
            &|_| 0.0,
            KCoeffs::GRAPHITE,
            &NewtonParams::default(),
        )
        .unwrap();
        for c in (0..mesh.n_cells()).step_by(7) {
            let (tv, gv) = sol.eval_cell(c, &[[1.0 / 3.0; 3]]);
            assert!((tv[0] - 500.0).abs() < 1e-8, "T = {}", tv[0]);
            assert!(gv[0][0].abs() < 1e-6 && gv[0][1].abs() < 1e-6);
        }
    }

    #[test]
    fn newton_converges_quadratically_on_annulus() {
        // residual ratios shrink superlinearly once in the basin
        let mesh = small_annulus();
        let mut bt = BoundaryTable::new();
        bt.insert(VAL_T_IN, BoundaryValue::Const(1000.0));
        bt.insert(VAL_T_OUT, BoundaryValue::Const(450.0));
        bt.insert(VAL_Q_ZERO, BoundaryValue::Const(0.0));
        let sol = solve_reference_nonlinear(
            &mesh,
            &bt,
            &|_| 0.0,
            KCoeffs::GRAPHITE,
            &NewtonParams { tol: 1e-12, max_iter: 30 },
        )
        .unwrap();
        let h = &sol.residual_history;
        assert!(h.len() >= 3, "history too short: {h:?}");
        // quadratic convergence: r_{n+1} <= C r_n^2 in the final steps
        let n = h.len();
        let r1 = h[n - 2] / h[n - 3];
        let r2 = h[n - 1] / h[n - 2];
        assert!(
            r2 < r1 * r1 * 10.0 + 1e-12,
            "not quadratic: history {h:?}"
        );
        assert!(h[n - 1] < 1e-10 * h[0]);
    }
}
