//! Conforming triangular meshes with tagged boundaries and local refinement.
//!
//! Meshes are immutable after construction; [`Mesh::refine`] returns a new
//! mesh together with a child -> parent map so fields can be transferred.

mod generators;
mod io;

pub use generators::{
    generate_quarter_annulus, generate_quarter_brick, generate_structured_square, HoleSpec,
    VAL_Q_ZERO, VAL_T_IN, VAL_T_OUT,
};
pub use io::{read_mesh, write_mesh};

use crate::error::{DdError, Result};
use crate::geom::{self, Pt};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Boundary condition kind carried by a tagged boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagKind {
    /// Prescribed temperature (Dirichlet data `T̄`).
    DirichletT,
    /// Prescribed normal flux (Neumann data `q̄`).
    NeumannQ,
}

/// Tag of one boundary edge; `value_id` refers to a boundary-value table
/// owned by the problem definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryTag {
    pub kind: TagKind,
    pub value_id: u32,
}

/// Analytic curve a boundary edge approximates; refinement snaps new
/// midpoints back onto it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub center: Pt,
    pub radius: f64,
}

/// Undirected edge between two vertices, lower index first.
#[derive(Debug, Clone, Copy)]
pub struct Edge {
    pub v: [usize; 2],
    /// Incident cells; `cells[1] == usize::MAX` on the boundary.
    pub cells: [usize; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.cells[1] == usize::MAX
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Pt>,
    /// Vertex triples, counterclockwise.
    pub cells: Vec<[usize; 3]>,
    /// Base approximation order per cell.
    pub cell_order: Vec<u8>,
    /// Refinement depth per cell.
    pub generation: Vec<u32>,
    edges: Vec<Edge>,
    edge_lookup: HashMap<(usize, usize), usize>,
    /// Edge ids per cell; local edge `i` is opposite local vertex `i`.
    cell_edges: Vec<[usize; 3]>,
    /// Boundary tags, keyed by edge id.
    pub boundary: BTreeMap<usize, BoundaryTag>,
    /// Curved boundary edges, keyed by edge id.
    curves: BTreeMap<usize, Arc>,
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds a mesh from raw arrays, deriving edge topology and checking the
    /// structural invariants. Cells with negative area are reordered to
    /// counterclockwise; zero-area cells are rejected.
    pub fn new(
        vertices: Vec<Pt>,
        mut cells: Vec<[usize; 3]>,
        cell_order: Vec<u8>,
        generation: Vec<u32>,
        tags: &HashMap<(usize, usize), BoundaryTag>,
        curves: &HashMap<(usize, usize), Arc>,
    ) -> Result<Mesh> {
        if cells.len() != cell_order.len() || cells.len() != generation.len() {
            return Err(DdError::Mesh("cell attribute length mismatch".into()));
        }
        for cell in cells.iter_mut() {
            let [a, b, c] = *cell;
            if a.max(b).max(c) >= vertices.len() {
                return Err(DdError::Mesh(format!("cell {cell:?} references missing vertex")));
            }
            let area2 = geom::signed_area2(vertices[a], vertices[b], vertices[c]);
            if area2 == 0.0 || !area2.is_finite() {
                return Err(DdError::Mesh(format!("cell {cell:?} has zero area")));
            }
            if area2 < 0.0 {
                cell.swap(1, 2);
            }
        }

        let mut edges: Vec<Edge> = Vec::new();
        let mut edge_lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cell_edges = vec![[usize::MAX; 3]; cells.len()];
        for (ci, cell) in cells.iter().enumerate() {
            for le in 0..3 {
                let key = edge_key(cell[(le + 1) % 3], cell[(le + 2) % 3]);
                let eid = *edge_lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        v: [key.0, key.1],
                        cells: [usize::MAX; 2],
                    });
                    edges.len() - 1
                });
                let e = &mut edges[eid];
                if e.cells[0] == usize::MAX {
                    e.cells[0] = ci;
                } else if e.cells[1] == usize::MAX {
                    e.cells[1] = ci;
                } else {
                    return Err(DdError::Mesh(format!(
                        "edge {:?} has more than two incident cells",
                        e.v
                    )));
                }
                cell_edges[ci][le] = eid;
            }
        }

        let mut boundary = BTreeMap::new();
        let mut curve_map = BTreeMap::new();
        for (eid, e) in edges.iter().enumerate() {
            let key = (e.v[0], e.v[1]);
            if e.is_boundary() {
                match tags.get(&key) {
                    Some(tag) => {
                        boundary.insert(eid, *tag);
                    }
                    None => {
                        return Err(DdError::Mesh(format!("boundary edge {key:?} is untagged")))
                    }
                }
                if let Some(arc) = curves.get(&key) {
                    curve_map.insert(eid, *arc);
                }
            } else if tags.contains_key(&key) {
                return Err(DdError::Mesh(format!("interior edge {key:?} carries a tag")));
            }
        }

        Ok(Mesh {
            vertices,
            cells,
            cell_order,
            generation,
            edges,
            edge_lookup,
            cell_edges,
            boundary,
            curves: curve_map,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, eid: usize) -> &Edge {
        &self.edges[eid]
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&edge_key(a, b)).copied()
    }

    /// Edge ids of a cell; local edge `i` is opposite local vertex `i`.
    pub fn cell_edge_ids(&self, cell: usize) -> [usize; 3] {
        self.cell_edges[cell]
    }

    pub fn cell_vertices(&self, cell: usize) -> [Pt; 3] {
        let [a, b, c] = self.cells[cell];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cell_vertices(cell);
        0.5 * geom::signed_area2(a, b, c)
    }

    pub fn cell_centroid(&self, cell: usize) -> Pt {
        let [a, b, c] = self.cell_vertices(cell);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edge_length(&self, eid: usize) -> f64 {
        let e = &self.edges[eid];
        geom::dist(self.vertices[e.v[0]], self.vertices[e.v[1]])
    }

    /// Representative element size: the longest edge of the cell.
    pub fn element_size(&self, cell: usize) -> f64 {
        self.cell_edges[cell]
            .iter()
            .map(|&e| self.edge_length(e))
            .fold(0.0, f64::max)
    }

    /// Neighbor of `cell` across local edge `le`, if any.
    pub fn neighbor(&self, cell: usize, le: usize) -> Option<usize> {
        let e = &self.edges[self.cell_edges[cell][le]];
        let other = if e.cells[0] == cell { e.cells[1] } else { e.cells[0] };
        (other != usize::MAX).then_some(other)
    }

    pub fn domain_area(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_area(c)).sum()
    }

    /// Outward unit normal of cell `cell` on its local edge `le`.
    pub fn outward_normal(&self, cell: usize, le: usize) -> Pt {
        let [v0, v1, v2] = self.cells[cell];
        let (a, b) = match le {
            0 => (v1, v2),
            1 => (v2, v0),
            _ => (v0, v1),
        };
        let t = geom::sub(self.vertices[b], self.vertices[a]);
        let n = geom::rot_normal(t);
        let len = geom::norm(n);
        [n[0] / len, n[1] / len]
    }

    /// Vertices flagged as boundary corners: two incident boundary edges with
    /// different tags or non-collinear directions meet there.
    pub fn boundary_corner_vertices(&self) -> BTreeSet<usize> {
        let mut incident: HashMap<usize, Vec<usize>> = HashMap::new();
        for &eid in self.boundary.keys() {
            let e = &self.edges[eid];
            incident.entry(e.v[0]).or_default().push(eid);
            incident.entry(e.v[1]).or_default().push(eid);
        }
        let mut corners = BTreeSet::new();
        for (&v, eids) in &incident {
            if eids.len() != 2 {
                // dangling or non-manifold boundary vertex; treat as corner
                corners.insert(v);
                continue;
            }
            let (e0, e1) = (eids[0], eids[1]);
            if self.boundary[&e0].kind != self.boundary[&e1].kind
                || self.boundary[&e0].value_id != self.boundary[&e1].value_id
            {
                corners.insert(v);
                continue;
            }
            // consecutive facets of one analytic arc are a smooth boundary,
            // not a corner, however coarse the polygonal approximation
            if let (Some(a0), Some(a1)) = (self.curves.get(&e0), self.curves.get(&e1)) {
                if a0 == a1 {
                    continue;
                }
            }
            let d0 = self.edge_direction_from(e0, v);
            let d1 = self.edge_direction_from(e1, v);
            // collinear edges have dot(d0, d1) = -1; flag deviations > 20 deg
            if geom::dot(d0, d1) > -(20.0_f64).to_radians().cos() {
                corners.insert(v);
            }
        }
        corners
    }

    fn edge_direction_from(&self, eid: usize, v: usize) -> Pt {
        let e = &self.edges[eid];
        let w = if e.v[0] == v { e.v[1] } else { e.v[0] };
        let d = geom::sub(self.vertices[w], self.vertices[v]);
        let len = geom::norm(d);
        [d[0] / len, d[1] / len]
    }

    /// Conforming local refinement by longest-edge bisection with closure.
    ///
    /// Returns the refined mesh and, for every new cell, the id of its
    /// ancestor in `self`. An empty `marked` set returns an identical mesh.
    pub fn refine(&self, marked: &BTreeSet<usize>) -> Result<(Mesh, Vec<usize>)> {
        let mut soup = RefineSoup::from_mesh(self);
        for &cell in marked {
            if cell >= self.n_cells() {
                return Err(DdError::Mesh(format!("marked cell {cell} out of range")));
            }
        }
        for &cell in marked {
            // a cell already split by closure counts as refined
            if soup.alive[cell] {
                soup.bisect(cell);
            }
        }
        soup.into_mesh(self)
    }
}

/// Mutable triangle soup used while a refinement pass runs.
struct RefineSoup {
    vertices: Vec<Pt>,
    tris: Vec<[usize; 3]>,
    order: Vec<u8>,
    gen: Vec<u32>,
    /// Ancestor cell in the input mesh.
    root: Vec<usize>,
    alive: Vec<bool>,
    edge_cells: HashMap<(usize, usize), Vec<usize>>,
    tags: HashMap<(usize, usize), BoundaryTag>,
    curves: HashMap<(usize, usize), Arc>,
    midpoints: HashMap<(usize, usize), usize>,
}

impl RefineSoup {
    fn from_mesh(mesh: &Mesh) -> Self {
        let mut edge_cells: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (ci, cell) in mesh.cells.iter().enumerate() {
            for le in 0..3 {
                let key = edge_key(cell[(le + 1) % 3], cell[(le + 2) % 3]);
                edge_cells.entry(key).or_default().push(ci);
            }
        }
        let mut tags = HashMap::new();
        let mut curves = HashMap::new();
        for (&eid, tag) in &mesh.boundary {
            let e = &mesh.edges[eid];
            tags.insert((e.v[0], e.v[1]), *tag);
            if let Some(arc) = mesh.curves.get(&eid) {
                curves.insert((e.v[0], e.v[1]), *arc);
            }
        }
        RefineSoup {
            vertices: mesh.vertices.clone(),
            tris: mesh.cells.clone(),
            order: mesh.cell_order.clone(),
            gen: mesh.generation.clone(),
            root: (0..mesh.n_cells()).collect(),
            alive: vec![true; mesh.n_cells()],
            edge_cells,
            tags,
            curves,
            midpoints: HashMap::new(),
        }
    }

    fn longest_edge(&self, t: usize) -> (usize, usize) {
        let tri = self.tris[t];
        let mut best = (0.0, (usize::MAX, usize::MAX));
        for le in 0..3 {
            let key = edge_key(tri[(le + 1) % 3], tri[(le + 2) % 3]);
            let len = geom::dist(self.vertices[key.0], self.vertices[key.1]);
            // deterministic tie-break on the vertex pair
            if len > best.0 + 1e-14 * len.max(best.0)
                || ((len - best.0).abs() <= 1e-14 * len.max(best.0) && key < best.1)
            {
                best = (len, key);
            }
        }
        best.1
    }

    fn neighbor_across(&self, t: usize, key: (usize, usize)) -> Option<usize> {
        self.edge_cells
            .get(&key)?
            .iter()
            .copied()
            .find(|&c| c != t && self.alive[c])
    }

    /// Rivara's recursive longest-edge bisection, with an explicit stack.
    fn bisect(&mut self, start: usize) {
        let mut stack = vec![start];
        while let Some(&t) = stack.last() {
            if !self.alive[t] {
                stack.pop();
                continue;
            }
            let e = self.longest_edge(t);
            match self.neighbor_across(t, e) {
                None => {
                    self.split_pair(t, None, e);
                    stack.pop();
                }
                Some(nb) => {
                    if self.longest_edge(nb) == e {
                        self.split_pair(t, Some(nb), e);
                        stack.pop();
                    } else {
                        stack.push(nb);
                    }
                }
            }
        }
    }

    fn midpoint_of(&mut self, key: (usize, usize)) -> usize {
        if let Some(&m) = self.midpoints.get(&key) {
            return m;
        }
        let mut m = geom::midpoint(self.vertices[key.0], self.vertices[key.1]);
        if let Some(arc) = self.curves.get(&key) {
            let d = geom::sub(m, arc.center);
            let len = geom::norm(d);
            if len > 0.0 {
                m = geom::add(arc.center, geom::scale(d, arc.radius / len));
            }
        }
        self.vertices.push(m);
        let mid = self.vertices.len() - 1;
        self.midpoints.insert(key, mid);
        // split boundary bookkeeping
        if let Some(tag) = self.tags.remove(&key) {
            self.tags.insert(edge_key(key.0, mid), tag);
            self.tags.insert(edge_key(key.1, mid), tag);
        }
        if let Some(arc) = self.curves.remove(&key) {
            self.curves.insert(edge_key(key.0, mid), arc);
            self.curves.insert(edge_key(key.1, mid), arc);
        }
        mid
    }

    fn split_pair(&mut self, t: usize, nb: Option<usize>, key: (usize, usize)) {
        let mid = self.midpoint_of(key);
        self.split_one(t, key, mid);
        if let Some(nb) = nb {
            self.split_one(nb, key, mid);
        }
    }

    fn split_one(&mut self, t: usize, key: (usize, usize), mid: usize) {
        let tri = self.tris[t];
        // rotate so the split edge is (tri[i], tri[j]) with opposite vertex c
        let opp = tri
            .iter()
            .copied()
            .find(|v| *v != key.0 && *v != key.1)
            .expect("split edge not part of cell");
        // keep parent orientation: children follow the parent cyclic order
        let k = tri.iter().position(|&v| v == opp).unwrap();
        let (va, vb) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
        let children = [[va, mid, opp], [mid, vb, opp]];

        self.remove_cell(t);
        for child in children {
            let id = self.tris.len();
            self.tris.push(child);
            self.order.push(self.order[t]);
            self.gen.push(self.gen[t] + 1);
            self.root.push(self.root[t]);
            self.alive.push(true);
            for le in 0..3 {
                let k = edge_key(child[(le + 1) % 3], child[(le + 2) % 3]);
                self.edge_cells.entry(k).or_default().push(id);
            }
        }
    }

    fn remove_cell(&mut self, t: usize) {
        self.alive[t] = false;
        let tri = self.tris[t];
        for le in 0..3 {
            let k = edge_key(tri[(le + 1) % 3], tri[(le + 2) % 3]);
            if let Some(v) = self.edge_cells.get_mut(&k) {
                v.retain(|&c| c != t);
            }
        }
    }

    fn into_mesh(self, original: &Mesh) -> Result<(Mesh, Vec<usize>)> {
        let mut cells = Vec::new();
        let mut order = Vec::new();
        let mut gen = Vec::new();
        let mut parents = Vec::new();
        for t in 0..self.tris.len() {
            if self.alive[t] {
                cells.push(self.tris[t]);
                order.push(self.order[t]);
                gen.push(self.gen[t]);
                parents.push(self.root[t]);
            }
        }
        let _ = original;
        let mesh = Mesh::new(self.vertices, cells, order, gen, &self.tags, &self.curves)?;
        Ok((mesh, parents))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom;

    fn two_triangle_square() -> Mesh {
        // unit square split along the diagonal (0,0)-(1,1)
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let cells = vec![[0, 1, 2], [0, 2, 3]];
        let mut tags = HashMap::new();
        for (a, b) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            tags.insert(
                edge_key(a, b),
                BoundaryTag {
                    kind: TagKind::DirichletT,
                    value_id: 0,
                },
            );
        }
        Mesh::new(vertices, cells, vec![1, 1], vec![0, 0], &tags, &HashMap::new()).unwrap()
    }

    #[test]
    fn topology_of_two_triangles() {
        let m = two_triangle_square();
        assert_eq!(m.n_edges(), 5);
        assert_eq!(m.boundary.len(), 4);
        let shared = m.edge_id(0, 2).unwrap();
        assert!(!m.edge(shared).is_boundary());
        assert!((m.domain_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn element_size_is_longest_edge() {
        let vertices = vec![[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]];
        let mut tags = HashMap::new();
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            tags.insert(
                edge_key(a, b),
                BoundaryTag {
                    kind: TagKind::NeumannQ,
                    value_id: 0,
                },
            );
        }
        let m = Mesh::new(vertices, vec![[0, 1, 2]], vec![1], vec![0], &tags, &HashMap::new())
            .unwrap();
        assert!((m.element_size(0) - 5.0).abs() < 1e-14);

        // equilateral: h = side
        let a = 0.7;
        let verts = vec![[0.0, 0.0], [a, 0.0], [a / 2.0, a * 3f64.sqrt() / 2.0]];
        let mut tags = HashMap::new();
        for (x, y) in [(0, 1), (1, 2), (2, 0)] {
            tags.insert(
                edge_key(x, y),
                BoundaryTag {
                    kind: TagKind::NeumannQ,
                    value_id: 0,
                },
            );
        }
        let m = Mesh::new(verts, vec![[0, 1, 2]], vec![1], vec![0], &tags, &HashMap::new())
            .unwrap();
        assert!((m.element_size(0) - a).abs() < 1e-12);
    }

    #[test]
    fn refine_empty_is_identity() {
        let m = two_triangle_square();
        let (r, parents) = m.refine(&BTreeSet::new()).unwrap();
        assert_eq!(r.n_cells(), m.n_cells());
        assert_eq!(parents, vec![0, 1]);
        assert_eq!(r.cells, m.cells);
    }

    #[test]
    fn refine_one_closure_keeps_conformity() {
        let m = two_triangle_square();
        let marked: BTreeSet<usize> = [0].into_iter().collect();
        let (r, parents) = m.refine(&marked).unwrap();
        // both triangles share the diagonal as the longest edge, so one
        // bisection splits both: 4 cells total
        assert_eq!(r.n_cells(), 4);
        assert!(parents.iter().all(|&p| p < 2));
        check_conforming(&r);
        assert!((r.domain_area() - 1.0).abs() < 1e-12);
        for c in 0..r.n_cells() {
            assert!(r.cell_area(c) > 0.0);
            assert!(r.element_size(c) <= m.element_size(parents[c]) + 1e-14);
        }
    }

    #[test]
    fn refine_all_of_eight_cell_mesh() {
        let m = generate_structured_square(2, [[-0.5, -0.5], [0.5, 0.5]], &|_, _| BoundaryTag {
            kind: TagKind::DirichletT,
            value_id: 0,
        })
        .unwrap();
        assert_eq!(m.n_cells(), 8);
        let marked: BTreeSet<usize> = (0..8).collect();
        let (r, _) = m.refine(&marked).unwrap();
        assert!(r.n_cells() >= 16);
        for c in 0..r.n_cells() {
            assert!(r.cell_area(c) > 0.0);
        }
        check_conforming(&r);
        // area preserved
        assert!((r.domain_area() - 1.0).abs() < 1e-12);
        // tag partition preserved
        let nb = r.boundary.len();
        let total_boundary = r.edges().iter().filter(|e| e.is_boundary()).count();
        assert_eq!(nb, total_boundary);
    }

    #[test]
    fn generations_increment_and_orders_inherit() {
        let mut m = generate_structured_square(1, [[0.0, 0.0], [1.0, 1.0]], &|_, _| BoundaryTag {
            kind: TagKind::NeumannQ,
            value_id: 3,
        })
        .unwrap();
        m.cell_order = vec![2, 2];
        for round in 1..=3u32 {
            let marked: BTreeSet<usize> = (0..m.n_cells()).collect();
            let (r, _) = m.refine(&marked).unwrap();
            assert!(r.generation.iter().all(|&g| g >= round));
            assert!(r.cell_order.iter().all(|&p| p == 2));
            for (_, tag) in r.boundary.iter() {
                assert_eq!(tag.value_id, 3);
            }
            m = r;
        }
    }

    fn check_conforming(m: &Mesh) {
        // every interior edge has exactly two incident cells whose endpoints
        // coincide; hanging nodes would show up as edges with one cell that
        // are geometrically interior
        for e in m.edges() {
            let n_inc = if e.is_boundary() { 1 } else { 2 };
            let count = m
                .cells
                .iter()
                .filter(|c| {
                    let has = |v: usize| c.contains(&v);
                    has(e.v[0]) && has(e.v[1])
                })
                .count();
            assert_eq!(count, n_inc, "edge {:?}", e.v);
        }
        // no vertex lies strictly inside another cell's edge
        for (vi, v) in m.vertices.iter().enumerate() {
            for e in m.edges() {
                if e.v.contains(&vi) {
                    continue;
                }
                let a = m.vertices[e.v[0]];
                let b = m.vertices[e.v[1]];
                let ab = geom::sub(b, a);
                let av = geom::sub(*v, a);
                let t = geom::dot(av, ab) / geom::dot(ab, ab);
                if (0.01..0.99).contains(&t) {
                    let proj = geom::add(a, geom::scale(ab, t));
                    assert!(
                        geom::dist(proj, *v) > 1e-9,
                        "vertex {vi} hangs on edge {:?}",
                        e.v
                    );
                }
            }
        }
    }
}
