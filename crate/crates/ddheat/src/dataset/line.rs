//! Closest point on the linear constitutive line q = -k g.
//!
//! Stands in for the search when the dataset is fully saturated: each spatial
//! component projects independently onto the line in its (g_i, q_i) plane.

use super::Scaling;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineProjection {
    pub gradient: [f64; 2],
    pub flux: [f64; 2],
    pub distance: f64,
}

/// Projection in raw coordinates:
/// q*_i = k (k q_i - g_i) / (1 + k^2), g*_i = (g_i - k q_i) / (1 + k^2),
/// per-component distance |q_i + k g_i| / sqrt(1 + k^2).
pub fn line_projection(g: [f64; 2], q: [f64; 2], k: f64) -> LineProjection {
    assert!(k > 0.0, "conductivity must be positive");
    let denom = 1.0 + k * k;
    let mut gradient = [0.0; 2];
    let mut flux = [0.0; 2];
    let mut d2 = 0.0;
    for i in 0..2 {
        flux[i] = k * (k * q[i] - g[i]) / denom;
        gradient[i] = (g[i] - k * q[i]) / denom;
        let di = (q[i] + k * g[i]).abs() / denom.sqrt();
        d2 += di * di;
    }
    LineProjection { gradient, flux, distance: d2.sqrt() }
}

/// Projection under the scaled metric of the dataset search: minimizes
/// S_g (g - g*)^2 + S_q (q - q*)^2 subject to q* = -k g*, so the oracle and
/// the tree search agree when the scaling is not the identity.
pub fn scaled_line_projection(g: [f64; 2], q: [f64; 2], k: f64, scaling: Scaling) -> LineProjection {
    assert!(k > 0.0, "conductivity must be positive");
    let sg = scaling.s_g.sqrt();
    let sq = scaling.s_q.sqrt();
    // in scaled coordinates G = sg g, Q = sq q the line becomes Q = -k' G
    let kp = k * sq / sg;
    let denom = 1.0 + kp * kp;
    let mut gradient = [0.0; 2];
    let mut flux = [0.0; 2];
    let mut d2 = 0.0;
    for i in 0..2 {
        let gs = sg * g[i];
        let qs = sq * q[i];
        let qs_star = kp * (kp * qs - gs) / denom;
        let gs_star = (gs - kp * qs) / denom;
        flux[i] = qs_star / sq;
        gradient[i] = gs_star / sg;
        let di = (qs + kp * gs).abs() / denom.sqrt();
        d2 += di * di;
    }
    LineProjection { gradient, flux, distance: d2.sqrt() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Brute-force oracle: sample the line densely and return the closest
    /// point in the scaled metric.
    fn brute_force(g: [f64; 2], q: [f64; 2], k: f64, scaling: Scaling) -> ([f64; 2], [f64; 2], f64) {
        let n = 2_000_000;
        let range = 40.0;
        // the minimization is separable, so scan each component's line
        let mut g_star = [0.0; 2];
        let mut q_star = [0.0; 2];
        let mut total = 0.0;
        for c in 0..2 {
            let mut best = (f64::INFINITY, [0.0; 2]);
            for i in 0..=n {
                let gs = -range + 2.0 * range * i as f64 / n as f64;
                let qs = -k * gs;
                let d2 = scaling.s_g * (g[c] - gs).powi(2) + scaling.s_q * (q[c] - qs).powi(2);
                if d2 < best.0 {
                    best = (d2, [gs, qs]);
                }
            }
            g_star[c] = best.1[0];
            q_star[c] = best.1[1];
            total += best.0;
        }
        (g_star, q_star, total.sqrt())
    }

    #[test]
    fn projection_lands_on_line_and_is_orthogonal() {
        for (g, q, k) in [
            ([1.0, -0.3], [0.2, 0.8], 1.0),
            ([3.0, 2.0], [-1.0, 4.0], 2.5),
            ([0.0, 0.0], [1.0, -1.0], 0.7),
        ] {
            let pr = line_projection(g, q, k);
            for i in 0..2 {
                assert_relative_eq!(pr.flux[i] + k * pr.gradient[i], 0.0, epsilon = 1e-12);
                // residual orthogonal to the line direction (1, -k)
                let rg = g[i] - pr.gradient[i];
                let rq = q[i] - pr.flux[i];
                assert!((rg * 1.0 + rq * (-k)).abs() < 1e-12, "not orthogonal");
            }
        }
    }

    #[test]
    fn fixed_point_on_the_line() {
        let pr = line_projection([2.0, 2.0], [-2.0, -2.0], 1.0);
        assert_relative_eq!(pr.gradient[0], 2.0, epsilon = 1e-13);
        assert_relative_eq!(pr.flux[0], -2.0, epsilon = 1e-13);
        assert!(pr.distance < 1e-13);
    }

    #[test]
    fn unit_diagonal_case() {
        // (g, q) = (1, 1) in each component, k = 1: closest point is the
        // origin, per-component distance sqrt(2), total 2
        let pr = line_projection([1.0, 1.0], [1.0, 1.0], 1.0);
        assert_relative_eq!(pr.gradient[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(pr.flux[0], 0.0, epsilon = 1e-14);
        let (bg, bq, bd) = brute_force([1.0, 1.0], [1.0, 1.0], 1.0, Scaling::UNIT);
        assert_relative_eq!(pr.distance, bd, epsilon = 1e-5);
        assert!(bg[0].abs() < 1e-4 && bq[0].abs() < 1e-4);
        assert_relative_eq!(pr.distance, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn off_line_point_single_component() {
        // k = 1, (g, q) = (0, 1): g* = -0.5, q* = 0.5, distance 1/sqrt(2)
        let pr = line_projection([0.0, 0.0], [1.0, 0.0], 1.0);
        assert_relative_eq!(pr.gradient[0], -0.5, epsilon = 1e-13);
        assert_relative_eq!(pr.flux[0], 0.5, epsilon = 1e-13);
        assert_relative_eq!(pr.distance, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        let (bg, bq, bd) = brute_force([0.0, 0.0], [1.0, 0.0], 1.0, Scaling::UNIT);
        assert_relative_eq!(bg[0], -0.5, epsilon = 1e-4);
        assert_relative_eq!(bq[0], 0.5, epsilon = 1e-4);
        assert_relative_eq!(pr.distance, bd, epsilon = 1e-6);
    }

    #[test]
    fn scaled_projection_matches_brute_force() {
        let scaling = Scaling { s_t: 1.0, s_g: 0.25, s_q: 4.0 };
        let g = [1.3, -2.0];
        let q = [0.4, 1.1];
        let k = 1.7;
        let pr = scaled_line_projection(g, q, k, scaling);
        let (bg, bq, bd) = brute_force(g, q, k, scaling);
        for i in 0..2 {
            assert_relative_eq!(pr.gradient[i], bg[i], epsilon = 1e-4);
            assert_relative_eq!(pr.flux[i], bq[i], epsilon = 1e-4);
            assert_relative_eq!(pr.flux[i] + k * pr.gradient[i], 0.0, epsilon = 1e-12);
        }
        assert_relative_eq!(pr.distance, bd, epsilon = 1e-6);
    }

    #[test]
    fn scaled_reduces_to_plain_at_unit_scaling() {
        let g = [0.7, -0.2];
        let q = [0.5, 0.9];
        let a = line_projection(g, q, 1.3);
        let b = scaled_line_projection(g, q, 1.3, Scaling::UNIT);
        for i in 0..2 {
            assert_relative_eq!(a.gradient[i], b.gradient[i], epsilon = 1e-14);
            assert_relative_eq!(a.flux[i], b.flux[i], epsilon = 1e-14);
        }
        assert_relative_eq!(a.distance, b.distance, epsilon = 1e-14);
    }
}
