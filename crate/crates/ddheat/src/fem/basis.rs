//! Shape functions on triangles.
//!
//! Three families are provided, matching the fields of the two data-driven
//! formulations:
//!
//! * `H1Continuous` — hierarchical vertex/edge/interior functions built from
//!   barycentric coordinates; continuity across cells follows from ordering
//!   the edge kernels by global vertex index.
//! * `L2Discontinuous` — modal basis, orthonormal on the reference triangle,
//!   so every element mass matrix is diagonal.
//! * `HdivConforming` — Brezzi-Douglas-Marini elements of order k: full
//!   vector polynomials of degree <= k, constructed per physical cell as the
//!   dual basis of global edge-moment and interior functionals. Edges whose
//!   trace order exceeds the cell order are handled by divergence-free curl
//!   enrichments, which keeps elementwise conservation exact on meshes with
//!   mixed orders.

use crate::error::{DdError, Result};
use crate::fem::poly::{n_monomials, Poly2};
use crate::fem::quadrature::{gauss_legendre_01, triangle_rule};
use crate::fem::smalldense::{DMat, DenseLu};
use crate::geom::{self, Pt};

/// Function-space families used by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    H1Continuous,
    L2Discontinuous,
    HdivConforming,
}

impl SpaceKind {
    pub fn order_range(self) -> (usize, usize) {
        match self {
            SpaceKind::H1Continuous => (1, 3),
            SpaceKind::L2Discontinuous => (0, 3),
            SpaceKind::HdivConforming => (1, 3),
        }
    }

    pub fn validate_order(self, order: usize) -> Result<()> {
        let (min, max) = self.order_range();
        if order < min || order > max {
            return Err(DdError::UnsupportedOrder {
                space: match self {
                    SpaceKind::H1Continuous => "H1_CONTINUOUS",
                    SpaceKind::L2Discontinuous => "L2_DISCONTINUOUS",
                    SpaceKind::HdivConforming => "HDIV_CONFORMING",
                },
                order,
                min,
                max,
            });
        }
        Ok(())
    }
}

/// Scalar polynomial dimension on the triangle.
#[inline]
pub fn scalar_dim(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

/// Number of hierarchical H1 functions for cell order `k` and per-edge orders
/// `m` (edge order >= cell order on promoted edges).
pub fn h1_dim(k: usize, m: [usize; 3]) -> usize {
    3 + m.iter().map(|&o| o - 1).sum::<usize>() + if k >= 3 { 1 } else { 0 }
}

/// Affine geometry of one triangle.
#[derive(Debug, Clone)]
pub struct CellGeom {
    pub verts: [Pt; 3],
    pub area: f64,
    /// Physical gradients of the barycentric coordinates (constant).
    pub grad_lambda: [[f64; 2]; 3],
    /// Longest edge; used as the local length scale.
    pub h: f64,
    pub centroid: Pt,
}

impl CellGeom {
    pub fn new(verts: [Pt; 3]) -> CellGeom {
        let area2 = geom::signed_area2(verts[0], verts[1], verts[2]);
        assert!(area2 > 0.0, "cell must be counterclockwise");
        let mut grad_lambda = [[0.0; 2]; 3];
        for i in 0..3 {
            let a = verts[(i + 1) % 3];
            let b = verts[(i + 2) % 3];
            // lambda_i is 1 at vertex i, 0 on edge (a, b)
            grad_lambda[i] = [(a[1] - b[1]) / area2, (b[0] - a[0]) / area2];
        }
        let h = (0..3)
            .map(|i| geom::dist(verts[(i + 1) % 3], verts[(i + 2) % 3]))
            .fold(0.0, f64::max);
        let centroid = [
            (verts[0][0] + verts[1][0] + verts[2][0]) / 3.0,
            (verts[0][1] + verts[1][1] + verts[2][1]) / 3.0,
        ];
        CellGeom {
            verts,
            area: 0.5 * area2,
            grad_lambda,
            h,
            centroid,
        }
    }

    pub fn to_physical(&self, bary: [f64; 3]) -> Pt {
        let mut p = [0.0; 2];
        for i in 0..3 {
            p[0] += bary[i] * self.verts[i][0];
            p[1] += bary[i] * self.verts[i][1];
        }
        p
    }

    pub fn barycentric(&self, p: Pt) -> [f64; 3] {
        let mut bary = [0.0; 3];
        for i in 0..3 {
            let a = self.verts[(i + 1) % 3];
            let b = self.verts[(i + 2) % 3];
            bary[i] = geom::signed_area2(a, b, p) / (2.0 * self.area);
        }
        bary
    }
}

/// Values and gradients of a scalar basis, indexed `[function][point]`.
#[derive(Debug, Clone)]
pub struct ShapeTable {
    pub values: Vec<Vec<f64>>,
    pub grads: Vec<Vec<[f64; 2]>>,
}

/// Hierarchical H1 basis on one cell.
///
/// `gv` are the global vertex ids (used to orient edge kernels), `edge_order`
/// the per-local-edge trace orders and `k` the cell order. Function layout:
/// vertices, then per-edge functions of increasing degree, then the interior
/// bubble.
pub fn h1_shapes(
    geom_: &CellGeom,
    gv: [usize; 3],
    edge_order: [usize; 3],
    k: usize,
    points: &[[f64; 3]],
) -> ShapeTable {
    let np = points.len();
    let nf = h1_dim(k, edge_order);
    let mut values = vec![vec![0.0; np]; nf];
    let mut grads = vec![vec![[0.0; 2]; np]; nf];
    let gl = &geom_.grad_lambda;

    for (pi, bary) in points.iter().enumerate() {
        let l = *bary;
        let mut f = 0;
        for i in 0..3 {
            values[f][pi] = l[i];
            grads[f][pi] = gl[i];
            f += 1;
        }
        for e in 0..3 {
            let (mut a, mut b) = ((e + 1) % 3, (e + 2) % 3);
            if gv[a] > gv[b] {
                std::mem::swap(&mut a, &mut b);
            }
            let (la, lb) = (l[a], l[b]);
            let quad = la * lb;
            let dquad = [
                gl[a][0] * lb + gl[b][0] * la,
                gl[a][1] * lb + gl[b][1] * la,
            ];
            for d in 2..=edge_order[e] {
                match d {
                    2 => {
                        values[f][pi] = quad;
                        grads[f][pi] = dquad;
                    }
                    3 => {
                        let t = lb - la;
                        let dt = [gl[b][0] - gl[a][0], gl[b][1] - gl[a][1]];
                        values[f][pi] = quad * t;
                        grads[f][pi] = [dquad[0] * t + quad * dt[0], dquad[1] * t + quad * dt[1]];
                    }
                    _ => unreachable!("H1 order capped at 3"),
                }
                f += 1;
            }
        }
        if k >= 3 {
            values[f][pi] = l[0] * l[1] * l[2];
            grads[f][pi] = [
                gl[0][0] * l[1] * l[2] + l[0] * gl[1][0] * l[2] + l[0] * l[1] * gl[2][0],
                gl[0][1] * l[1] * l[2] + l[0] * gl[1][1] * l[2] + l[0] * l[1] * gl[2][1],
            ];
            f += 1;
        }
        debug_assert_eq!(f, nf);
    }
    ShapeTable { values, grads }
}

/// Orthonormal modal polynomials on the reference triangle, hierarchical in
/// the total degree (the first `scalar_dim(p)` entries span degree <= p).
fn reference_modal_basis() -> &'static Vec<Poly2> {
    use std::sync::OnceLock;
    static BASIS: OnceLock<Vec<Poly2>> = OnceLock::new();
    BASIS.get_or_init(|| {
        let max_order = 3;
        let mut basis: Vec<Poly2> = Vec::new();
        for d in 0..=max_order {
            for b in 0..=d {
                let mut v = Poly2::monomial(d - b, b);
                // modified Gram-Schmidt, applied twice for orthogonality to
                // machine precision
                for _ in 0..2 {
                    for u in &basis {
                        let proj = v.mul(u).tri_integral();
                        v.add_scaled(u, -proj);
                    }
                }
                let nrm = v.mul(&v).tri_integral().sqrt();
                basis.push(v.scaled(1.0 / nrm));
            }
        }
        basis
    })
}

/// Modal L2 basis of order `p` on a cell; values at barycentric points with
/// physical gradients.
pub fn l2_shapes(geom_: &CellGeom, p: usize, points: &[[f64; 3]]) -> ShapeTable {
    let basis = reference_modal_basis();
    let nf = scalar_dim(p);
    let np = points.len();
    let mut values = vec![vec![0.0; np]; nf];
    let mut grads = vec![vec![[0.0; 2]; np]; nf];
    // reference coordinates are (lambda_1, lambda_2); the chain rule maps
    // reference gradients through the constant barycentric gradients
    let gx = geom_.grad_lambda[1];
    let gy = geom_.grad_lambda[2];
    for (fi, poly) in basis.iter().take(nf).enumerate() {
        let dx = poly.dx();
        let dy = poly.dy();
        for (pi, bary) in points.iter().enumerate() {
            let (x, y) = (bary[1], bary[2]);
            values[fi][pi] = poly.eval(x, y);
            let (du, dv) = (dx.eval(x, y), dy.eval(x, y));
            grads[fi][pi] = [du * gx[0] + dv * gy[0], du * gx[1] + dv * gy[1]];
        }
    }
    ShapeTable { values, grads }
}

/// Global frame of one edge: endpoints ordered by global vertex index and the
/// fixed normal convention (tangent rotated by -90 degrees).
#[derive(Debug, Clone, Copy)]
pub struct EdgeFrame {
    pub start: Pt,
    pub end: Pt,
    pub normal: Pt,
}

impl EdgeFrame {
    pub fn new(start: Pt, end: Pt) -> EdgeFrame {
        let t = geom::sub(end, start);
        let len = geom::norm(t);
        let n = geom::rot_normal([t[0] / len, t[1] / len]);
        EdgeFrame { start, end, normal: n }
    }

    pub fn point(&self, s: f64) -> Pt {
        [
            self.start[0] + s * (self.end[0] - self.start[0]),
            self.start[1] + s * (self.end[1] - self.start[1]),
        ]
    }

    pub fn length(&self) -> f64 {
        geom::dist(self.start, self.end)
    }
}

/// Shifted Legendre polynomial sqrt(2j + 1) P_j(2s - 1), orthonormal on
/// [0, 1].
pub fn legendre01(j: usize, s: f64) -> f64 {
    let x = 2.0 * s - 1.0;
    let mut p0 = 1.0;
    let mut p1 = x;
    let p = match j {
        0 => 1.0,
        1 => x,
        _ => {
            for m in 2..=j {
                let mf = m as f64;
                let p2 = ((2.0 * mf - 1.0) * x * p1 - (mf - 1.0) * p0) / mf;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    };
    ((2 * j + 1) as f64).sqrt() * p
}

/// One H(div) basis function on a cell, stored as vector polynomials in the
/// cell's centered, h-scaled frame.
#[derive(Debug, Clone)]
pub struct HdivShape {
    comp: [Poly2; 2],
    div: Poly2,
}

/// Dual H(div) basis on one cell, ordered edge dofs first (edge 0 moments
/// 0..=M0, edge 1, edge 2) then interior dofs.
#[derive(Debug, Clone)]
pub struct HdivBasis {
    shapes: Vec<HdivShape>,
    center: Pt,
    scale: f64,
    pub n_edge_dofs: [usize; 3],
    pub n_interior: usize,
}

impl HdivBasis {
    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    #[inline]
    fn local(&self, p: Pt) -> (f64, f64) {
        (
            (p[0] - self.center[0]) / self.scale,
            (p[1] - self.center[1]) / self.scale,
        )
    }

    /// Vector values at physical points, `[function][point]`.
    pub fn values_at(&self, pts: &[Pt]) -> Vec<Vec<[f64; 2]>> {
        self.shapes
            .iter()
            .map(|s| {
                pts.iter()
                    .map(|&p| {
                        let (x, y) = self.local(p);
                        [s.comp[0].eval(x, y), s.comp[1].eval(x, y)]
                    })
                    .collect()
            })
            .collect()
    }

    /// Divergences at physical points, `[function][point]`.
    pub fn divs_at(&self, pts: &[Pt]) -> Vec<Vec<f64>> {
        self.shapes
            .iter()
            .map(|s| {
                pts.iter()
                    .map(|&p| {
                        let (x, y) = self.local(p);
                        s.div.eval(x, y) / self.scale
                    })
                    .collect()
            })
            .collect()
    }

    /// Degree bound of the divergence of basis function `i` (coefficients
    /// above tolerance), used by conservation checks.
    pub fn div_effective_degree(&self, i: usize) -> usize {
        self.shapes[i].div.effective_degree(1e-9)
    }
}

/// Builds the dual BDM basis of order `k` with per-edge trace orders
/// `edge_order[e] >= k` on the cell with the given global edge frames.
pub fn hdiv_basis(
    geom_: &CellGeom,
    frames: [EdgeFrame; 3],
    edge_order: [usize; 3],
    k: usize,
) -> Result<HdivBasis> {
    let center = geom_.centroid;
    let scale = geom_.h;
    let local = |p: Pt| -> (f64, f64) { ((p[0] - center[0]) / scale, (p[1] - center[1]) / scale) };

    // barycentric coordinates as linear polynomials of the local frame
    let lambda_polys: [Poly2; 3] = std::array::from_fn(|i| {
        let gl = geom_.grad_lambda[i];
        let at_center = geom_.barycentric(center)[i];
        let mut p = Poly2::constant(at_center);
        p.add_scaled(&Poly2::monomial(1, 0), gl[0] * scale);
        p.add_scaled(&Poly2::monomial(0, 1), gl[1] * scale);
        p
    });

    // candidate space: full vector P_k plus one curl enrichment per promoted
    // edge moment
    let n_base = n_monomials(k);
    let mut space: Vec<[Poly2; 2]> = Vec::new();
    for d in 0..=k {
        for b in 0..=d {
            let m = Poly2::monomial(d - b, b);
            space.push([m.clone(), Poly2::zero(0)]);
            space.push([Poly2::zero(0), m]);
        }
    }
    debug_assert_eq!(space.len(), 2 * n_base);
    for e in 0..3 {
        if edge_order[e] > k {
            let (a, b) = ((e + 1) % 3, (e + 2) % 3);
            // orient by the global frame so both incident cells enrich with
            // the same functions
            let pa = geom_.verts[a];
            let (lo, hi) = if geom::dist(pa, frames[e].start) < geom::dist(pa, frames[e].end) {
                (a, b)
            } else {
                (b, a)
            };
            let bubble = lambda_polys[lo].mul(&lambda_polys[hi]);
            let diff = {
                let mut d = lambda_polys[hi].clone();
                d.add_scaled(&lambda_polys[lo], -1.0);
                d
            };
            for j in (k + 1)..=edge_order[e] {
                // curl of the degree-(j + 1) scalar edge bubble: divergence
                // free, normal trace supported on edge e only
                let mut b_poly = bubble.clone();
                for _ in 0..(j - 1) {
                    b_poly = b_poly.mul(&diff);
                }
                space.push([b_poly.dy(), b_poly.dx().scaled(-1.0)]);
            }
        }
    }

    // degrees of freedom
    let n_grad = if k >= 2 { scalar_dim(k - 1) - 1 } else { 0 };
    let n_bub = if k >= 2 { scalar_dim(k - 2) } else { 0 };
    let n_edge: usize = edge_order.iter().map(|&m| m + 1).sum();
    let n_dofs = n_edge + n_grad + n_bub;
    if n_dofs != space.len() {
        return Err(DdError::Mesh(format!(
            "hdiv dof/space mismatch: {n_dofs} dofs vs {} functions",
            space.len()
        )));
    }

    let max_m = edge_order.iter().copied().max().unwrap();
    let vol_rule = triangle_rule(2 * max_m + 2)?;
    let (en, ew) = gauss_legendre_01(max_m + 3);

    let mut vmat = DMat::zeros(n_dofs, n_dofs);
    for (j, cand) in space.iter().enumerate() {
        let mut row = 0;
        // edge moments against orthonormal shifted Legendre polynomials
        for e in 0..3 {
            let fr = &frames[e];
            for mom in 0..=edge_order[e] {
                let mut acc = 0.0;
                for (s, w) in en.iter().zip(&ew) {
                    let p = fr.point(*s);
                    let (x, y) = local(p);
                    let qn = cand[0].eval(x, y) * fr.normal[0] + cand[1].eval(x, y) * fr.normal[1];
                    acc += w * qn * legendre01(mom, *s);
                }
                vmat.set(row, j, acc);
                row += 1;
            }
        }
        if k >= 2 {
            // interior: moments against gradients of scaled monomials
            for d in 1..=(k - 1) {
                for b in 0..=d {
                    let m = Poly2::monomial(d - b, b);
                    let (mx, my) = (m.dx(), m.dy());
                    let mut acc = 0.0;
                    for (qi, bary) in vol_rule.points.iter().enumerate() {
                        let p = geom_.to_physical(*bary);
                        let (x, y) = local(p);
                        acc += vol_rule.weights[qi]
                            * (cand[0].eval(x, y) * mx.eval(x, y)
                                + cand[1].eval(x, y) * my.eval(x, y));
                    }
                    vmat.set(row, j, acc * 2.0 * geom_.area);
                    row += 1;
                }
            }
            // moments against curls of interior bubbles
            let bubble = lambda_polys[0].mul(&lambda_polys[1]).mul(&lambda_polys[2]);
            for d in 0..=(k - 2) {
                for b in 0..=d {
                    let m = bubble.mul(&Poly2::monomial(d - b, b));
                    let w_curl = [m.dy(), m.dx().scaled(-1.0)];
                    let mut acc = 0.0;
                    for (qi, bary) in vol_rule.points.iter().enumerate() {
                        let p = geom_.to_physical(*bary);
                        let (x, y) = local(p);
                        acc += vol_rule.weights[qi]
                            * (cand[0].eval(x, y) * w_curl[0].eval(x, y)
                                + cand[1].eval(x, y) * w_curl[1].eval(x, y));
                    }
                    vmat.set(row, j, acc * 2.0 * geom_.area);
                    row += 1;
                }
            }
        }
        debug_assert_eq!(row, n_dofs);
    }

    let vcheck = vmat.clone();
    let lu = DenseLu::factor(vmat).ok_or_else(|| {
        DdError::Mesh("hdiv dof matrix singular (degenerate cell geometry)".into())
    })?;

    let mut shapes = Vec::with_capacity(n_dofs);
    for i in 0..n_dofs {
        let mut rhs = vec![0.0; n_dofs];
        rhs[i] = 1.0;
        let coef = lu.solve(&rhs);
        if cfg!(debug_assertions) {
            for a in 0..n_dofs {
                let mut acc = 0.0;
                for j in 0..n_dofs {
                    acc += vcheck.get(a, j) * coef[j];
                }
                let expect = if a == i { 1.0 } else { 0.0 };
                debug_assert!(
                    (acc - expect).abs() < 1e-8,
                    "hdiv dual solve residual {acc} at ({a}, {i})"
                );
            }
        }
        let mut comp = [Poly2::zero(max_m + 2), Poly2::zero(max_m + 2)];
        for (j, cand) in space.iter().enumerate() {
            if coef[j] != 0.0 {
                comp[0].add_scaled(&cand[0], coef[j]);
                comp[1].add_scaled(&cand[1], coef[j]);
            }
        }
        let mut div = comp[0].dx();
        div.add_scaled(&comp[1].dy(), 1.0);
        shapes.push(HdivShape { comp, div });
    }

    Ok(HdivBasis {
        shapes,
        center,
        scale,
        n_edge_dofs: std::array::from_fn(|e| edge_order[e] + 1),
        n_interior: n_grad + n_bub,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_geom() -> CellGeom {
        CellGeom::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    }

    fn frames_of(geom_: &CellGeom, gv: [usize; 3]) -> [EdgeFrame; 3] {
        std::array::from_fn(|e| {
            let (a, b) = ((e + 1) % 3, (e + 2) % 3);
            let (lo, hi) = if gv[a] < gv[b] { (a, b) } else { (b, a) };
            EdgeFrame::new(geom_.verts[lo], geom_.verts[hi])
        })
    }

    #[test]
    fn h1_vertex_functions_are_kronecker() {
        let g = unit_geom();
        let pts = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let t = h1_shapes(&g, [0, 1, 2], [1, 1, 1], 1, &pts);
        for f in 0..3 {
            for p in 0..3 {
                let expect = if f == p { 1.0 } else { 0.0 };
                assert_relative_eq!(t.values[f][p], expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn h1_partition_of_unity_order1() {
        let g = CellGeom::new([[0.2, -0.1], [1.3, 0.4], [0.5, 2.0]]);
        let pts = [[0.2, 0.5, 0.3], [0.1, 0.1, 0.8]];
        let t = h1_shapes(&g, [7, 3, 9], [1, 1, 1], 1, &pts);
        for p in 0..pts.len() {
            let sum: f64 = (0..3).map(|f| t.values[f][p]).sum();
            assert_relative_eq!(sum, 1.0, epsilon = 1e-14);
            let gsum: [f64; 2] = (0..3).fold([0.0; 2], |acc, f| {
                [acc[0] + t.grads[f][p][0], acc[1] + t.grads[f][p][1]]
            });
            assert!(gsum[0].abs() < 1e-13 && gsum[1].abs() < 1e-13);
        }
    }

    #[test]
    fn h1_edge_functions_match_across_cells() {
        // two cells sharing the edge between global vertices 1 and 2; shared
        // functions must have identical traces along it
        let ga = CellGeom::new([[0.0, 0.0], [1.0, 0.0], [0.5, 1.0]]);
        let gb = CellGeom::new([[1.0, 0.0], [1.5, 1.2], [0.5, 1.0]]);
        // global ids: cell a = [0, 1, 2], cell b = [1, 3, 2]
        for s in [0.25, 0.5, 0.9] {
            let pa = [
                ga.verts[1][0] + s * (ga.verts[2][0] - ga.verts[1][0]),
                ga.verts[1][1] + s * (ga.verts[2][1] - ga.verts[1][1]),
            ];
            let ba = ga.barycentric(pa);
            let bb = gb.barycentric(pa);
            let ta = h1_shapes(&ga, [0, 1, 2], [3, 3, 3], 3, &[ba]);
            let tb = h1_shapes(&gb, [1, 3, 2], [3, 3, 3], 3, &[bb]);
            // cell a: local edge 0 = (local 1, local 2) = global (1, 2);
            // cell b: local edge 1 = (local 2, local 0) = global (2, 1).
            // layout: 3 vertex fns, then 2 fns per edge
            for d in 0..2 {
                let fa = 3 + d;
                let fb = 3 + 2 + d;
                assert_relative_eq!(ta.values[fa][0], tb.values[fb][0], epsilon = 1e-12);
            }
            assert_relative_eq!(ta.values[1][0], tb.values[0][0], epsilon = 1e-12);
            assert_relative_eq!(ta.values[2][0], tb.values[2][0], epsilon = 1e-12);
        }
    }

    #[test]
    fn l2_mass_matrix_is_diagonal() {
        let g = CellGeom::new([[0.1, 0.0], [2.0, 0.3], [0.4, 1.7]]);
        let rule = triangle_rule(8).unwrap();
        let t = l2_shapes(&g, 3, &rule.points);
        let nf = scalar_dim(3);
        for i in 0..nf {
            for j in 0..nf {
                let m: f64 = (0..rule.len())
                    .map(|q| rule.weights[q] * t.values[i][q] * t.values[j][q])
                    .sum::<f64>()
                    * 2.0
                    * g.area;
                if i == j {
                    // reference-orthonormal functions: diagonal = |det J|
                    assert_relative_eq!(m, 2.0 * g.area, max_relative = 1e-11);
                } else {
                    assert!(m.abs() < 1e-12, "mass[{i}][{j}] = {m}");
                }
            }
        }
    }

    #[test]
    fn l2_order0_is_constant() {
        let g = unit_geom();
        let t = l2_shapes(&g, 0, &[[0.3, 0.3, 0.4]]);
        assert_eq!(t.values.len(), 1);
        // orthonormal constant on the reference triangle: sqrt(2)
        assert_relative_eq!(t.values[0][0], std::f64::consts::SQRT_2, epsilon = 1e-14);
        assert_eq!(t.grads[0][0], [0.0, 0.0]);
    }

    #[test]
    fn hdiv_dual_property_and_div_degree() {
        for k in 1..=3usize {
            let g = CellGeom::new([[0.0, 0.1], [1.1, 0.0], [0.3, 0.9]]);
            let frames = frames_of(&g, [5, 2, 8]);
            let basis = hdiv_basis(&g, frames, [k; 3], k).unwrap();
            assert_eq!(basis.len(), (k + 1) * (k + 2));
            for i in 0..basis.len() {
                assert!(
                    basis.div_effective_degree(i) <= k.saturating_sub(1),
                    "order {k} fn {i} div degree too high"
                );
            }
            // dual property on edge moments
            let (en, ew) = gauss_legendre_01(k + 3);
            let mut row = 0;
            for e in 0..3 {
                let pts: Vec<Pt> = en.iter().map(|&s| frames[e].point(s)).collect();
                let vals = basis.values_at(&pts);
                for mom in 0..=k {
                    for (j, func_vals) in vals.iter().enumerate() {
                        let mut acc = 0.0;
                        for (qi, w) in ew.iter().enumerate() {
                            let qn = func_vals[qi][0] * frames[e].normal[0]
                                + func_vals[qi][1] * frames[e].normal[1];
                            acc += w * qn * legendre01(mom, en[qi]);
                        }
                        let expect = if j == row { 1.0 } else { 0.0 };
                        assert_relative_eq!(acc, expect, epsilon = 1e-9);
                    }
                    row += 1;
                }
            }
        }
    }

    #[test]
    fn hdiv_normal_trace_single_valued() {
        // two cells sharing an edge with the same global frame: the normal
        // trace reconstructed from the shared dofs must agree
        let ga = CellGeom::new([[0.0, 0.0], [1.0, 0.0], [0.4, 1.1]]);
        let gb = CellGeom::new([[1.0, 0.0], [1.3, 1.0], [0.4, 1.1]]);
        let shared = EdgeFrame::new([1.0, 0.0], [0.4, 1.1]);
        let frames_a = [
            shared,
            EdgeFrame::new([0.0, 0.0], [0.4, 1.1]),
            EdgeFrame::new([0.0, 0.0], [1.0, 0.0]),
        ];
        let frames_b = [
            EdgeFrame::new([1.3, 1.0], [0.4, 1.1]),
            shared,
            EdgeFrame::new([1.0, 0.0], [1.3, 1.0]),
        ];
        let k = 2;
        let ba = hdiv_basis(&ga, frames_a, [k; 3], k).unwrap();
        let bb = hdiv_basis(&gb, frames_b, [k; 3], k).unwrap();
        let pts: Vec<Pt> = [0.2, 0.6, 0.85].iter().map(|&s| shared.point(s)).collect();
        let va = ba.values_at(&pts);
        let vb = bb.values_at(&pts);
        for mom in 0..=k {
            // shared dofs: cell a edge 0 at index mom, cell b edge 1 at
            // offset (k + 1) + mom
            let ia = mom;
            let ib = (k + 1) + mom;
            for p in 0..pts.len() {
                let qa = va[ia][p][0] * shared.normal[0] + va[ia][p][1] * shared.normal[1];
                let qb = vb[ib][p][0] * shared.normal[0] + vb[ib][p][1] * shared.normal[1];
                assert_relative_eq!(qa, qb, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn hdiv_promoted_edge_keeps_divergence_low() {
        // order-1 cell with one edge promoted to order 2: the enrichment must
        // not raise the divergence degree
        let g = CellGeom::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let frames = frames_of(&g, [0, 1, 2]);
        let basis = hdiv_basis(&g, frames, [2, 1, 1], 1).unwrap();
        assert_eq!(basis.len(), 2 * 3 + 1);
        for i in 0..basis.len() {
            assert_eq!(basis.div_effective_degree(i), 0, "div degree of fn {i}");
        }
    }

    #[test]
    fn hdiv_interior_functions_have_zero_trace() {
        let g = CellGeom::new([[0.0, 0.0], [1.2, 0.1], [0.2, 1.0]]);
        let frames = frames_of(&g, [0, 1, 2]);
        let k = 3;
        let basis = hdiv_basis(&g, frames, [k; 3], k).unwrap();
        let n_edge = 3 * (k + 1);
        for e in 0..3 {
            let pts: Vec<Pt> = [0.1, 0.4, 0.7, 0.95].iter().map(|&s| frames[e].point(s)).collect();
            let vals = basis.values_at(&pts);
            for f in n_edge..basis.len() {
                for p in 0..pts.len() {
                    let qn = vals[f][p][0] * frames[e].normal[0]
                        + vals[f][p][1] * frames[e].normal[1];
                    assert!(qn.abs() < 1e-9, "interior fn {f} leaks trace {qn}");
                }
            }
        }
    }
}
