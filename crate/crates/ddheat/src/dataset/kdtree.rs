//! Exact nearest-neighbor index over low-dimensional points.
//!
//! A balanced k-d tree with per-node bounding boxes. Pruning is strict
//! (`box distance > current best`), so equal-distance candidates are always
//! visited and the lowest point index wins ties deterministically.

#[derive(Debug, Clone)]
struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    // leaf: range into `order`; inner: children indices
    start: usize,
    end: usize,
    left: usize,
    right: usize,
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.left == usize::MAX
    }
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    root: usize,
}

const LEAF_SIZE: usize = 16;

impl KdTree {
    /// Builds the index over `n` points stored row-major in `coords`.
    pub fn build(dim: usize, coords: Vec<f64>) -> KdTree {
        assert!(dim > 0);
        assert_eq!(coords.len() % dim, 0);
        let n = coords.len() / dim;
        let mut tree = KdTree {
            dim,
            coords,
            order: (0..n).collect(),
            nodes: Vec::new(),
            root: usize::MAX,
        };
        if n > 0 {
            tree.root = tree.build_node(0, n);
        }
        tree
    }

    #[allow(dead_code)]
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn bbox(&self, start: usize, end: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for &p in &self.order[start..end] {
            for d in 0..self.dim {
                let v = self.coords[p * self.dim + d];
                lo[d] = lo[d].min(v);
                hi[d] = hi[d].max(v);
            }
        }
        (lo, hi)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let (lo, hi) = self.bbox(start, end);
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            start,
            end,
            left: usize::MAX,
            right: usize::MAX,
        });
        if end - start > LEAF_SIZE {
            // split on the widest axis at the median, deterministic ordering
            let node = &self.nodes[id];
            let axis = (0..self.dim)
                .max_by(|&a, &b| {
                    let wa = node.hi[a] - node.lo[a];
                    let wb = node.hi[b] - node.lo[b];
                    wa.partial_cmp(&wb).unwrap()
                })
                .unwrap();
            let dim = self.dim;
            let coords = &self.coords;
            self.order[start..end].sort_by(|&p, &q| {
                let vp = coords[p * dim + axis];
                let vq = coords[q * dim + axis];
                vp.partial_cmp(&vq).unwrap().then(p.cmp(&q))
            });
            let mid = (start + end) / 2;
            let left = self.build_node(start, mid);
            let right = self.build_node(mid, end);
            self.nodes[id].left = left;
            self.nodes[id].right = right;
        }
        id
    }

    #[inline]
    fn dist2_to(&self, p: usize, query: &[f64]) -> f64 {
        let mut acc = 0.0;
        for d in 0..self.dim {
            let diff = self.coords[p * self.dim + d] - query[d];
            acc += diff * diff;
        }
        acc
    }

    #[inline]
    fn box_dist2(node: &Node, query: &[f64]) -> f64 {
        let mut acc = 0.0;
        for d in 0..query.len() {
            let v = query[d];
            let diff = if v < node.lo[d] {
                node.lo[d] - v
            } else if v > node.hi[d] {
                v - node.hi[d]
            } else {
                0.0
            };
            acc += diff * diff;
        }
        acc
    }

    /// Exact nearest point: minimal distance, ties broken by lowest index.
    pub fn nearest(&self, query: &[f64]) -> Option<(usize, f64)> {
        assert_eq!(query.len(), self.dim);
        if self.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(self.root, query, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    fn search(&self, node_id: usize, query: &[f64], best: &mut (usize, f64)) {
        let node = &self.nodes[node_id];
        if Self::box_dist2(node, query) > best.1 {
            return;
        }
        if node.is_leaf() {
            for &p in &self.order[node.start..node.end] {
                let d2 = self.dist2_to(p, query);
                if d2 < best.1 || (d2 == best.1 && p < best.0) {
                    *best = (p, d2);
                }
            }
            return;
        }
        let (l, r) = (node.left, node.right);
        let dl = Self::box_dist2(&self.nodes[l], query);
        let dr = Self::box_dist2(&self.nodes[r], query);
        // descend into the closer child first; on equal box distance take
        // the left child (lower point indices) first
        if dl <= dr {
            self.search(l, query, best);
            self.search(r, query, best);
        } else {
            self.search(r, query, best);
            self.search(l, query, best);
        }
    }
}
