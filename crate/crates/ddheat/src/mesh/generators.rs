//! Parameterized mesh generators for the three model geometries.

use super::{edge_key, Arc, BoundaryTag, Mesh, TagKind};
use crate::error::{DdError, Result};
use crate::geom::{self, Pt};
use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

/// Conventional boundary-value ids used by the curved-geometry generators.
pub const VAL_T_IN: u32 = 0;
pub const VAL_T_OUT: u32 = 1;
pub const VAL_Q_ZERO: u32 = 2;

/// Circular hole carved out of the brick interior.
#[derive(Debug, Clone, Copy)]
pub struct HoleSpec {
    pub center: Pt,
    pub radius: f64,
}

/// Structured n x n grid of squares split into 2 n^2 triangles.
///
/// `tag_rule` maps (edge midpoint, outward normal) to a boundary tag.
pub fn generate_structured_square(
    n: usize,
    bounds: [Pt; 2],
    tag_rule: &dyn Fn(Pt, Pt) -> BoundaryTag,
) -> Result<Mesh> {
    if n == 0 {
        return Err(DdError::Mesh("subdivision count must be >= 1".into()));
    }
    let [lo, hi] = bounds;
    if hi[0] <= lo[0] || hi[1] <= lo[1] {
        return Err(DdError::Mesh(format!("inverted bounds {bounds:?}")));
    }
    let dx = (hi[0] - lo[0]) / n as f64;
    let dy = (hi[1] - lo[1]) / n as f64;
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([lo[0] + i as f64 * dx, lo[1] + j as f64 * dy]);
        }
    }
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            cells.push([a, b, c]);
            cells.push([a, c, d]);
        }
    }
    let mut tags = HashMap::new();
    let mut tag_edge = |a: usize, b: usize, normal: Pt| {
        let mid = geom::midpoint(vertices[a], vertices[b]);
        tags.insert(edge_key(a, b), tag_rule(mid, normal));
    };
    for i in 0..n {
        tag_edge(vid(i, 0), vid(i + 1, 0), [0.0, -1.0]);
        tag_edge(vid(i, n), vid(i + 1, n), [0.0, 1.0]);
        tag_edge(vid(0, i), vid(0, i + 1), [-1.0, 0.0]);
        tag_edge(vid(n, i), vid(n, i + 1), [1.0, 0.0]);
    }
    let nc = cells.len();
    Mesh::new(vertices, cells, vec![1; nc], vec![0; nc], &tags, &HashMap::new())
}

/// Quarter annulus in the first quadrant.
///
/// The inner arc carries `DIRICHLET_T(VAL_T_IN)`, the outer arc
/// `DIRICHLET_T(VAL_T_OUT)` and the two radial cuts `NEUMANN_Q(VAL_Q_ZERO)`.
pub fn generate_quarter_annulus(r_in: f64, r_out: f64, resolution: f64) -> Result<Mesh> {
    if !(r_in > 0.0 && r_in < r_out) {
        return Err(DdError::Mesh(format!(
            "annulus radii must satisfy 0 < r_in < r_out (got {r_in}, {r_out})"
        )));
    }
    if resolution <= 0.0 {
        return Err(DdError::Mesh("resolution must be positive".into()));
    }
    let n_r = (((r_out - r_in) / resolution).ceil() as usize).max(1);
    let n_t = ((FRAC_PI_2 * r_out / resolution).ceil() as usize).max(2);
    let vid = |i: usize, j: usize| j * (n_r + 1) + i;
    let mut vertices = Vec::new();
    for j in 0..=n_t {
        let th = FRAC_PI_2 * j as f64 / n_t as f64;
        for i in 0..=n_r {
            let r = r_in + (r_out - r_in) * i as f64 / n_r as f64;
            vertices.push([r * th.cos(), r * th.sin()]);
        }
    }
    let mut cells = Vec::new();
    for j in 0..n_t {
        for i in 0..n_r {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            cells.push([a, b, c]);
            cells.push([a, c, d]);
        }
    }
    let mut tags = HashMap::new();
    let mut curves = HashMap::new();
    let center = [0.0, 0.0];
    for j in 0..n_t {
        let inner = edge_key(vid(0, j), vid(0, j + 1));
        tags.insert(inner, BoundaryTag { kind: TagKind::DirichletT, value_id: VAL_T_IN });
        curves.insert(inner, Arc { center, radius: r_in });
        let outer = edge_key(vid(n_r, j), vid(n_r, j + 1));
        tags.insert(outer, BoundaryTag { kind: TagKind::DirichletT, value_id: VAL_T_OUT });
        curves.insert(outer, Arc { center, radius: r_out });
    }
    for i in 0..n_r {
        for row in [0, n_t] {
            tags.insert(
                edge_key(vid(i, row), vid(i + 1, row)),
                BoundaryTag { kind: TagKind::NeumannQ, value_id: VAL_Q_ZERO },
            );
        }
    }
    let nc = cells.len();
    Mesh::new(vertices, cells, vec![1; nc], vec![0; nc], &tags, &curves)
}

/// Quarter slice of a graphite brick: square of half-width `outer_half_width`
/// with a quarter-circular bore of radius `r_bore` at the origin corner and
/// optional interior circular holes.
///
/// Bore arc: `DIRICHLET_T(VAL_T_IN)`; outer edges: `DIRICHLET_T(VAL_T_OUT)`;
/// symmetry cuts and hole boundaries: `NEUMANN_Q(VAL_Q_ZERO)`.
pub fn generate_quarter_brick(
    r_bore: f64,
    outer_half_width: f64,
    holes: &[HoleSpec],
    resolution: f64,
) -> Result<Mesh> {
    let w = outer_half_width;
    if !(r_bore > 0.0 && r_bore < w) {
        return Err(DdError::Mesh(format!(
            "bore radius must satisfy 0 < r_bore < outer_half_width (got {r_bore}, {w})"
        )));
    }
    let h = resolution;
    if h <= 0.0 {
        return Err(DdError::Mesh("resolution must be positive".into()));
    }
    for (i, hole) in holes.iter().enumerate() {
        let c = hole.center;
        let rho = hole.radius;
        if rho < 2.0 * h {
            return Err(DdError::Mesh(format!(
                "hole {i} radius {rho} under-resolved at h = {h} (need radius >= 2h)"
            )));
        }
        let margin = 2.0 * h;
        let inside_square =
            c[0] - rho >= margin && c[1] - rho >= margin && c[0] + rho <= w - margin && c[1] + rho <= w - margin;
        if !inside_square || geom::norm(c) - rho < r_bore + margin {
            return Err(DdError::Mesh(format!(
                "hole {i} at {c:?} intersects the bore or outer boundary"
            )));
        }
        for (j, other) in holes.iter().enumerate().take(i) {
            if geom::dist(c, other.center) < rho + other.radius + margin {
                return Err(DdError::Mesh(format!("holes {j} and {i} overlap")));
            }
        }
    }

    // transfinite blend between the bore arc and the outer "L" path
    let outer_path = |th: f64| -> Pt {
        let (c, s) = (th.cos(), th.sin());
        let m = c.max(s);
        [w * c / m, w * s / m]
    };
    let n_t = ((2.0 * w / h).ceil() as usize).max(4);
    let n_s = (((w * std::f64::consts::SQRT_2 - r_bore) / h).ceil() as usize).max(2);
    let vid = |i: usize, j: usize| j * (n_s + 1) + i;
    let mut vertices = Vec::new();
    for j in 0..=n_t {
        let th = FRAC_PI_2 * j as f64 / n_t as f64;
        let b: Pt = [r_bore * th.cos(), r_bore * th.sin()];
        let o = outer_path(th);
        for i in 0..=n_s {
            let s = i as f64 / n_s as f64;
            vertices.push([b[0] + s * (o[0] - b[0]), b[1] + s * (o[1] - b[1])]);
        }
    }
    let mut cells = Vec::new();
    for j in 0..n_t {
        for i in 0..n_s {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            cells.push([a, b, c]);
            cells.push([a, c, d]);
        }
    }

    // carve holes: snap near-circle vertices onto the circle, drop cells
    // inside, and expose the rim as new boundary
    let mut removed = vec![false; cells.len()];
    for hole in holes {
        let c = hole.center;
        let rho = hole.radius;
        let band = 0.55 * h;
        for v in vertices.iter_mut() {
            let d = geom::dist(*v, c);
            if (d - rho).abs() < band && d > 0.0 {
                let dir = geom::scale(geom::sub(*v, c), 1.0 / d);
                *v = geom::add(c, geom::scale(dir, rho));
            }
        }
        for (ci, cell) in cells.iter().enumerate() {
            let verts = [vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]];
            let inside = |p: Pt| geom::dist(p, c) < rho - 1e-12 * rho;
            let centroid = [
                (verts[0][0] + verts[1][0] + verts[2][0]) / 3.0,
                (verts[0][1] + verts[1][1] + verts[2][1]) / 3.0,
            ];
            let on_circle = |p: Pt| (geom::dist(p, c) - rho).abs() <= 1e-9 * rho;
            if verts.iter().any(|&p| inside(p))
                || inside(centroid)
                || verts.iter().all(|&p| on_circle(p))
            {
                removed[ci] = true;
            }
        }
    }

    let kept: Vec<usize> = (0..cells.len()).filter(|&c| !removed[c]).collect();
    let mut old_to_new = vec![usize::MAX; vertices.len()];
    let mut new_vertices = Vec::new();
    let mut new_cells = Vec::new();
    for &ci in &kept {
        let mut tri = [0usize; 3];
        for (k, &v) in cells[ci].iter().enumerate() {
            if old_to_new[v] == usize::MAX {
                old_to_new[v] = new_vertices.len();
                new_vertices.push(vertices[v]);
            }
            tri[k] = old_to_new[v];
        }
        new_cells.push(tri);
    }

    // boundary tags on the trimmed soup
    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    for tri in &new_cells {
        for le in 0..3 {
            *edge_count
                .entry(edge_key(tri[(le + 1) % 3], tri[(le + 2) % 3]))
                .or_insert(0) += 1;
        }
    }
    let mut tags = HashMap::new();
    let mut curves = HashMap::new();
    let origin = [0.0, 0.0];
    let tol = 1e-9 * w;
    for (&key, &count) in &edge_count {
        if count != 1 {
            continue;
        }
        let pa = new_vertices[key.0];
        let pb = new_vertices[key.1];
        let on = |p: Pt, f: &dyn Fn(Pt) -> bool| f(p);
        let both = |f: &dyn Fn(Pt) -> bool| on(pa, f) && on(pb, f);
        let tag;
        if both(&|p| (geom::norm(p) - r_bore).abs() < tol) {
            tag = BoundaryTag { kind: TagKind::DirichletT, value_id: VAL_T_IN };
            curves.insert(key, Arc { center: origin, radius: r_bore });
        } else if both(&|p| (p[0] - w).abs() < tol || (p[1] - w).abs() < tol) {
            tag = BoundaryTag { kind: TagKind::DirichletT, value_id: VAL_T_OUT };
        } else if both(&|p| p[0].abs() < tol) || both(&|p| p[1].abs() < tol) {
            tag = BoundaryTag { kind: TagKind::NeumannQ, value_id: VAL_Q_ZERO };
        } else {
            // must be a hole rim
            let hole = holes.iter().find(|hole| {
                (geom::dist(pa, hole.center) - hole.radius).abs() < 1e-6 * hole.radius
                    && (geom::dist(pb, hole.center) - hole.radius).abs() < 1e-6 * hole.radius
            });
            match hole {
                Some(hole) => {
                    tag = BoundaryTag { kind: TagKind::NeumannQ, value_id: VAL_Q_ZERO };
                    curves.insert(key, Arc { center: hole.center, radius: hole.radius });
                }
                None => {
                    return Err(DdError::Mesh(format!(
                        "carving left a stray boundary edge between {pa:?} and {pb:?}"
                    )))
                }
            }
        }
        tags.insert(key, tag);
    }

    let nc = new_cells.len();
    Mesh::new(new_vertices, new_cells, vec![1; nc], vec![0; nc], &tags, &curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TagKind;

    fn dirichlet(_: Pt, _: Pt) -> BoundaryTag {
        BoundaryTag { kind: TagKind::DirichletT, value_id: 0 }
    }

    #[test]
    fn structured_square_counts() {
        let m = generate_structured_square(2, [[-0.5, -0.5], [0.5, 0.5]], &dirichlet).unwrap();
        assert_eq!(m.n_cells(), 8);
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.boundary.len(), 8);
        assert!((m.domain_area() - 1.0).abs() < 1e-14);

        let m1 = generate_structured_square(1, [[0.0, 0.0], [2.0, 1.0]], &dirichlet).unwrap();
        assert_eq!(m1.n_cells(), 2);
        assert!(m1.cell_area(0) > 0.0 && m1.cell_area(1) > 0.0);
    }

    #[test]
    fn structured_square_h() {
        let m = generate_structured_square(20, [[-0.5, -0.5], [0.5, 0.5]], &dirichlet).unwrap();
        assert_eq!(m.n_cells(), 800);
        // axis-aligned legs have length h = 0.05
        let h: f64 = m.edge_length(m.cell_edge_ids(0)[1]).min(m.edge_length(m.cell_edge_ids(0)[2]));
        assert!((h - 0.05).abs() < 1e-12);
    }

    #[test]
    fn structured_square_rejects_degenerate() {
        assert!(generate_structured_square(0, [[0.0, 0.0], [1.0, 1.0]], &dirichlet).is_err());
        assert!(generate_structured_square(2, [[1.0, 0.0], [0.0, 1.0]], &dirichlet).is_err());
    }

    #[test]
    fn annulus_appendix_scale() {
        let m = generate_quarter_annulus(0.001, 0.003, 0.0002).unwrap();
        // circumradius bound: R = abc / (4A) <= 2h for every cell
        for c in 0..m.n_cells() {
            let [p0, p1, p2] = m.cell_vertices(c);
            let a = crate::geom::dist(p1, p2);
            let b = crate::geom::dist(p2, p0);
            let cc = crate::geom::dist(p0, p1);
            let r = a * b * cc / (4.0 * m.cell_area(c));
            assert!(r <= 2.0 * 0.0002, "circumradius {r} too large");
        }
        // tags: inner/outer Dirichlet, cuts Neumann
        let mut kinds = [0usize; 3];
        for tag in m.boundary.values() {
            match (tag.kind, tag.value_id) {
                (TagKind::DirichletT, VAL_T_IN) => kinds[0] += 1,
                (TagKind::DirichletT, VAL_T_OUT) => kinds[1] += 1,
                (TagKind::NeumannQ, VAL_Q_ZERO) => kinds[2] += 1,
                other => panic!("unexpected tag {other:?}"),
            }
        }
        assert!(kinds.iter().all(|&k| k > 0));
    }

    #[test]
    fn annulus_rejects_bad_radii() {
        assert!(generate_quarter_annulus(1.0, 1.0, 0.1).is_err());
        assert!(generate_quarter_annulus(2.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn brick_without_holes_topology() {
        let m = generate_quarter_brick(0.13, 0.23, &[], 0.02).unwrap();
        // boundary splits into bore arc (T_IN), outer L (T_OUT), two cuts (Q)
        let mut seen = [false; 3];
        for tag in m.boundary.values() {
            match (tag.kind, tag.value_id) {
                (TagKind::DirichletT, VAL_T_IN) => seen[0] = true,
                (TagKind::DirichletT, VAL_T_OUT) => seen[1] = true,
                (TagKind::NeumannQ, VAL_Q_ZERO) => seen[2] = true,
                other => panic!("unexpected tag {other:?}"),
            }
        }
        assert!(seen.iter().all(|&s| s));
        for c in 0..m.n_cells() {
            assert!(m.cell_area(c) > 0.0);
        }
    }

    #[test]
    fn brick_with_holes_tags_rims() {
        let holes = [
            HoleSpec { center: [0.175, 0.08], radius: 0.02 },
            HoleSpec { center: [0.08, 0.175], radius: 0.02 },
        ];
        let m = generate_quarter_brick(0.13, 0.23, &holes, 0.008).unwrap();
        for c in 0..m.n_cells() {
            assert!(m.cell_area(c) > 0.0, "inverted cell {c}");
            // no cell centroid inside a hole
            let ctr = m.cell_centroid(c);
            for hole in &holes {
                assert!(crate::geom::dist(ctr, hole.center) > hole.radius * 0.999);
            }
        }
        // rim edges are Neumann and lie on the hole circles
        let mut rim_edges = 0;
        for (&eid, tag) in &m.boundary {
            let e = m.edge(eid);
            let pa = m.vertices[e.v[0]];
            for hole in &holes {
                if (crate::geom::dist(pa, hole.center) - hole.radius).abs() < 1e-6 {
                    let pb = m.vertices[e.v[1]];
                    if (crate::geom::dist(pb, hole.center) - hole.radius).abs() < 1e-6 {
                        assert_eq!(tag.kind, TagKind::NeumannQ);
                        rim_edges += 1;
                    }
                }
            }
        }
        assert!(rim_edges >= 12, "hole rims too coarse: {rim_edges} edges");
    }

    #[test]
    fn brick_rejects_bad_geometry() {
        assert!(generate_quarter_brick(0.3, 0.23, &[], 0.02).is_err());
        // hole hitting the bore
        let bad = [HoleSpec { center: [0.10, 0.10], radius: 0.02 }];
        assert!(generate_quarter_brick(0.13, 0.23, &bad, 0.005).is_err());
        // overlapping holes
        let overlap = [
            HoleSpec { center: [0.17, 0.08], radius: 0.02 },
            HoleSpec { center: [0.18, 0.09], radius: 0.02 },
        ];
        assert!(generate_quarter_brick(0.13, 0.23, &overlap, 0.005).is_err());
    }
}
