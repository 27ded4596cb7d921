//! Ready-made problem setups for the three model geometries.

use super::common::{BoundaryTable, BoundaryValue};
use super::exphat;
use crate::error::Result;
use crate::geom::{self, Pt};
use crate::mesh::{
    generate_quarter_annulus, generate_quarter_brick, generate_structured_square, BoundaryTag,
    HoleSpec, Mesh, TagKind, VAL_Q_ZERO, VAL_T_IN, VAL_T_OUT,
};
use std::sync::Arc;

pub const VAL_EXPHAT_T: u32 = 0;
pub const VAL_EXPHAT_Q: u32 = 1;

/// Manufactured verification square [-0.5, 0.5]^2 with n subdivisions per
/// side and uniform base order p: Dirichlet data on the x = +-0.5 edges,
/// Neumann data on the y = +-0.5 edges, both from the exact solution.
pub fn exphat_square(n: usize, p: u8) -> Result<(Arc<Mesh>, BoundaryTable)> {
    let mut mesh = generate_structured_square(n, [[-0.5, -0.5], [0.5, 0.5]], &|mid, _| {
        if mid[0].abs() > 0.5 - 1e-9 {
            BoundaryTag { kind: TagKind::DirichletT, value_id: VAL_EXPHAT_T }
        } else {
            BoundaryTag { kind: TagKind::NeumannQ, value_id: VAL_EXPHAT_Q }
        }
    })?;
    mesh.cell_order = vec![p; mesh.n_cells()];
    let mut bt = BoundaryTable::new();
    bt.insert(VAL_EXPHAT_T, BoundaryValue::Temperature(Arc::new(exphat::temperature)));
    bt.insert(
        VAL_EXPHAT_Q,
        BoundaryValue::NormalFlux(Arc::new(|p: Pt, n: Pt| geom::dot(exphat::flux(p), n))),
    );
    Ok((Arc::new(mesh), bt))
}

/// Quarter annulus with fixed inner/outer temperatures and insulated cuts.
pub fn annulus_problem(
    r_in: f64,
    r_out: f64,
    resolution: f64,
    p: u8,
    t_in: f64,
    t_out: f64,
) -> Result<(Arc<Mesh>, BoundaryTable)> {
    let mut mesh = generate_quarter_annulus(r_in, r_out, resolution)?;
    mesh.cell_order = vec![p; mesh.n_cells()];
    let mut bt = BoundaryTable::new();
    bt.insert(VAL_T_IN, BoundaryValue::Const(t_in));
    bt.insert(VAL_T_OUT, BoundaryValue::Const(t_out));
    bt.insert(VAL_Q_ZERO, BoundaryValue::Const(0.0));
    Ok((Arc::new(mesh), bt))
}

/// Quarter graphite brick slice with hot bore and cooled outer surface.
pub fn brick_problem(
    r_bore: f64,
    outer_half_width: f64,
    holes: &[HoleSpec],
    resolution: f64,
    p: u8,
    t_in: f64,
    t_out: f64,
) -> Result<(Arc<Mesh>, BoundaryTable)> {
    let mut mesh = generate_quarter_brick(r_bore, outer_half_width, holes, resolution)?;
    mesh.cell_order = vec![p; mesh.n_cells()];
    let mut bt = BoundaryTable::new();
    bt.insert(VAL_T_IN, BoundaryValue::Const(t_in));
    bt.insert(VAL_T_OUT, BoundaryValue::Const(t_out));
    bt.insert(VAL_Q_ZERO, BoundaryValue::Const(0.0));
    Ok((Arc::new(mesh), bt))
}

/// Least-squares slope of log(err) against log(h).
pub fn loglog_slope(h: &[f64], err: &[f64]) -> f64 {
    assert_eq!(h.len(), err.len());
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let h = [0.2, 0.1, 0.05];
        let err: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powi(3)).collect();
        approx::assert_relative_eq!(loglog_slope(&h, &err), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn exphat_boundary_split() {
        let (mesh, _) = exphat_square(4, 1).unwrap();
        let mut n_dir = 0;
        let mut n_neu = 0;
        for (&eid, tag) in &mesh.boundary {
            let e = mesh.edge(eid);
            let mid = geom::midpoint(mesh.vertices[e.v[0]], mesh.vertices[e.v[1]]);
            match tag.kind {
                TagKind::DirichletT => {
                    assert!(mid[0].abs() > 0.49, "Dirichlet off the x edges");
                    n_dir += 1;
                }
                TagKind::NeumannQ => {
                    assert!(mid[1].abs() > 0.49, "Neumann off the y edges");
                    n_neu += 1;
                }
            }
        }
        assert_eq!(n_dir, 8);
        assert_eq!(n_neu, 8);
    }
}
