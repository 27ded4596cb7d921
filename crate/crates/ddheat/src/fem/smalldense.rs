//! Dense LU with partial pivoting for the small systems that appear in
//! element construction (dual-basis Vandermonde, edge projections).

/// Row-major dense matrix.
#[derive(Debug, Clone)]
pub struct DMat {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl DMat {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        DMat {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] += v;
    }
}

/// LU factorization with partial pivoting; factors stored in place.
pub struct DenseLu {
    lu: DMat,
    piv: Vec<usize>,
}

impl DenseLu {
    /// Returns None when a pivot falls below `1e-13 * max |a_ij|`.
    pub fn factor(mut a: DMat) -> Option<DenseLu> {
        assert_eq!(a.n_rows, a.n_cols);
        let n = a.n_rows;
        let scale = a.data.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut best = a.get(k, k).abs();
            for i in (k + 1)..n {
                let v = a.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-13 * scale {
                return None;
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    let t = a.get(k, j);
                    a.set(k, j, a.get(p, j));
                    a.set(p, j, t);
                }
            }
            let inv = 1.0 / a.get(k, k);
            for i in (k + 1)..n {
                let l = a.get(i, k) * inv;
                a.set(i, k, l);
                if l != 0.0 {
                    for j in (k + 1)..n {
                        let v = a.get(i, j) - l * a.get(k, j);
                        a.set(i, j, v);
                    }
                }
            }
        }
        Some(DenseLu { lu: a, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.n_rows;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        // apply all row interchanges before elimination: L is stored in the
        // fully pivoted row order
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        for k in 0..n {
            for i in (k + 1)..n {
                x[i] -= self.lu.get(i, k) * x[k];
            }
        }
        for k in (0..n).rev() {
            for j in (k + 1)..n {
                x[k] -= self.lu.get(k, j) * x[j];
            }
            x[k] /= self.lu.get(k, k);
        }
        x
    }
}
