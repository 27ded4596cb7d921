//! Quadrature rules on the reference triangle and unit interval, plus the
//! regularly spaced evaluation lattice used by the ensemble statistics.

use crate::error::{DdError, Result};

/// Highest polynomial exactness degree served by [`triangle_rule`].
pub const MAX_TRIANGLE_DEGREE: usize = 30;

/// Gauss-Legendre nodes/weights on [0, 1], exact for polynomials of degree
/// 2n - 1. Nodes found by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-based initial guess on [-1, 1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] -> [0,1]; reverse so nodes come out ascending
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Quadrature rule on the reference triangle {x >= 0, y >= 0, x + y <= 1}.
///
/// Points are stored as barycentric triples (l0, l1, l2) with
/// l0 = 1 - x - y; weights sum to the reference area 1/2.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reference (x, y) coordinates of point `i`.
    #[inline]
    pub fn xy(&self, i: usize) -> (f64, f64) {
        (self.points[i][1], self.points[i][2])
    }
}

/// Gauss rule with the stated polynomial exactness, built as a conical
/// product of 1D Gauss-Legendre rules under the Duffy collapse
/// x = s (1 - t), y = t with Jacobian (1 - t).
pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    if degree > MAX_TRIANGLE_DEGREE {
        return Err(DdError::QuadratureDegree {
            requested: degree,
            max: MAX_TRIANGLE_DEGREE,
        });
    }
    // s-integrand has degree <= d, t-integrand degree <= d + 1 after the
    // Jacobian factor; one extra point in t keeps both directions exact.
    let n = degree / 2 + 1;
    let (sn, sw) = gauss_legendre_01(n);
    let (tn, tw) = gauss_legendre_01(n + 1);
    let mut points = Vec::with_capacity(n * (n + 1));
    let mut weights = Vec::with_capacity(n * (n + 1));
    for (ti, twi) in tn.iter().zip(&tw) {
        for (si, swi) in sn.iter().zip(&sw) {
            let x = si * (1.0 - ti);
            let y = *ti;
            points.push([1.0 - x - y, x, y]);
            weights.push(swi * twi * (1.0 - ti));
        }
    }
    Ok(TriangleRule {
        degree,
        points,
        weights,
    })
}

/// Regularly spaced barycentric lattice {(i/n, j/n, k/n) : i+j+k = n} used as
/// evaluation points for ensemble statistics (never for integration).
#[derive(Debug, Clone)]
pub struct EvalLattice {
    pub order: usize,
    pub points: Vec<[f64; 3]>,
}

pub fn newton_cotes_lattice(n_eval: usize) -> EvalLattice {
    assert!(n_eval >= 1, "lattice order must be >= 1");
    let n = n_eval as f64;
    let mut points = Vec::with_capacity((n_eval + 1) * (n_eval + 2) / 2);
    for i in 0..=n_eval {
        for j in 0..=(n_eval - i) {
            let k = n_eval - i - j;
            points.push([k as f64 / n, i as f64 / n, j as f64 / n]);
        }
    }
    EvalLattice {
        order: n_eval,
        points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::poly::tri_monomial_integral;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre_01(n);
            for d in 0..=(2 * n - 1) {
                let num: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(d as i32)).sum();
                assert_relative_eq!(num, 1.0 / (d as f64 + 1.0), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn triangle_rule_exactness() {
        for degree in [0, 1, 2, 3, 4, 5, 8, 12, 20] {
            let rule = triangle_rule(degree).unwrap();
            let wsum: f64 = rule.weights.iter().sum();
            assert_relative_eq!(wsum, 0.5, epsilon = 1e-13);
            for a in 0..=degree {
                for b in 0..=(degree - a) {
                    let num: f64 = (0..rule.len())
                        .map(|i| {
                            let (x, y) = rule.xy(i);
                            rule.weights[i] * x.powi(a as i32) * y.powi(b as i32)
                        })
                        .sum();
                    assert_relative_eq!(
                        num,
                        tri_monomial_integral(a, b),
                        epsilon = 1e-13,
                        max_relative = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn degree_four_rule_on_x2y2() {
        let rule = triangle_rule(4).unwrap();
        let num: f64 = (0..rule.len())
            .map(|i| {
                let (x, y) = rule.xy(i);
                rule.weights[i] * x * x * y * y
            })
            .sum();
        assert_relative_eq!(num, 1.0 / 180.0, epsilon = 1e-15);
    }

    #[test]
    fn degree_overflow_names_max() {
        let err = triangle_rule(MAX_TRIANGLE_DEGREE + 1).unwrap_err();
        match err {
            DdError::QuadratureDegree { requested, max } => {
                assert_eq!(requested, MAX_TRIANGLE_DEGREE + 1);
                assert_eq!(max, MAX_TRIANGLE_DEGREE);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn lattice_counts() {
        assert_eq!(newton_cotes_lattice(1).points.len(), 3);
        assert_eq!(newton_cotes_lattice(2).points.len(), 6);
        assert_eq!(newton_cotes_lattice(4).points.len(), 15);
        for p in &newton_cotes_lattice(3).points {
            assert_relative_eq!(p[0] + p[1] + p[2], 1.0, epsilon = 1e-15);
            assert!(p.iter().all(|&c| (-1e-15..=1.0 + 1e-15).contains(&c)));
        }
        // points are distinct
        let pts = newton_cotes_lattice(4).points;
        for i in 0..pts.len() {
            for j in 0..i {
                let d: f64 = (0..3).map(|k| (pts[i][k] - pts[j][k]).abs()).sum();
                assert!(d > 1e-10);
            }
        }
    }
}
