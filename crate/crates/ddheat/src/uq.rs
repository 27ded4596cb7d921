//! Quantification of solution non-uniqueness: a perturb-and-resolve ensemble
//! over the converged data-driven state.
//!
//! Each iteration re-solves the fixed system from perturbed initial fields,
//! evaluates the fields at a regularly spaced lattice per element, and
//! updates running mean/variance (Welford). Noise in the dataset shows up as
//! nonzero pointwise standard deviation; with perfect data the ensemble
//! collapses.

use crate::fem::quadrature::newton_cotes_lattice;
use crate::geom::Pt;
use crate::solvers::weaker::WeakerDd;
use crate::solvers::{
    dd_iterate, search_fields, DdState, FieldCoeffs, InitMode, MaterialSource, StopRule,
};
use rand::SeedableRng;
use rand_distr::Distribution;

/// Tracked field components at every lattice point.
pub const N_TRACKED: usize = 6;
pub const TRACKED_NAMES: [&str; N_TRACKED] = ["T", "gx", "gy", "qx", "qy", "qmag"];

/// Ensemble configuration.
#[derive(Debug, Clone)]
pub struct PerturbSpec {
    /// Base perturbation standard deviation in the unitless search metric;
    /// each field uses kappa / sqrt(S_field) in its own units.
    pub kappa: f64,
    pub seed: u64,
    pub n_iter: usize,
    /// Optional early stop: relative change of the mean pointwise std.
    pub early_stop_tol: Option<f64>,
    /// Newton-Cotes lattice order of the evaluation points.
    pub n_eval: usize,
    /// Keep all samples (debug; enables the two-pass variance oracle).
    pub store_samples: bool,
}

impl Default for PerturbSpec {
    fn default() -> Self {
        PerturbSpec {
            kappa: 1e4,
            seed: 0,
            n_iter: 100,
            early_stop_tol: Some(1e-3),
            n_eval: 2,
            store_samples: false,
        }
    }
}

/// Running per-point statistics of the ensemble.
#[derive(Debug, Clone)]
pub struct McmcStats {
    /// Lattice point cells and positions, fixed across iterations.
    pub cells: Vec<u32>,
    pub positions: Vec<Pt>,
    pub mean: Vec<[f64; N_TRACKED]>,
    m2: Vec<[f64; N_TRACKED]>,
    pub count: usize,
    pub samples: Option<Vec<Vec<[f64; N_TRACKED]>>>,
    /// True when the run ended early because a solve failed.
    pub aborted: bool,
}

impl McmcStats {
    fn new(cells: Vec<u32>, positions: Vec<Pt>, store: bool) -> McmcStats {
        let n = positions.len();
        McmcStats {
            cells,
            positions,
            mean: vec![[0.0; N_TRACKED]; n],
            m2: vec![[0.0; N_TRACKED]; n],
            count: 0,
            samples: store.then(Vec::new),
            aborted: false,
        }
    }

    fn update(&mut self, values: Vec<[f64; N_TRACKED]>) {
        self.count += 1;
        let n = self.count as f64;
        for (i, v) in values.iter().enumerate() {
            for f in 0..N_TRACKED {
                let delta = v[f] - self.mean[i][f];
                self.mean[i][f] += delta / n;
                self.m2[i][f] += delta * (v[f] - self.mean[i][f]);
            }
        }
        if let Some(samples) = &mut self.samples {
            samples.push(values);
        }
    }

    /// Population variance of each tracked component per point.
    pub fn variance(&self, point: usize, field: usize) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.m2[point][field] / self.count as f64
    }

    pub fn std(&self, point: usize, field: usize) -> f64 {
        self.variance(point, field).sqrt()
    }

    /// Mean pointwise std over all points and tracked fields.
    pub fn mean_std(&self) -> f64 {
        let n = self.positions.len() * N_TRACKED;
        let mut acc = 0.0;
        for i in 0..self.positions.len() {
            for f in 0..N_TRACKED {
                acc += self.std(i, f);
            }
        }
        acc / n as f64
    }
}

/// Adds independent Gaussian increments to every free coefficient of T, g
/// and q; constrained dofs and the multipliers stay untouched.
pub fn perturb(
    dd: &WeakerDd,
    coeffs: &FieldCoeffs,
    kappa: f64,
    rng: &mut rand_chacha::ChaCha12Rng,
) -> FieldCoeffs {
    let mut out = coeffs.clone();
    if kappa == 0.0 {
        return out;
    }
    let scaling = dd.scaling();
    let kappa_t = kappa / scaling.s_t.sqrt();
    let kappa_g = kappa / scaling.s_g.sqrt();
    let kappa_q = kappa / scaling.s_q.sqrt();
    let mut apply = |values: &mut [f64], constrained: &[Option<f64>], sd: f64| {
        let normal = rand_distr::Normal::new(0.0, sd).unwrap();
        for (v, c) in values.iter_mut().zip(constrained) {
            if c.is_none() {
                *v += normal.sample(rng);
            }
        }
    };
    apply(&mut out.t, &dd.t_map().constrained, kappa_t);
    apply(&mut out.g, &dd.g_map().constrained, kappa_g);
    apply(&mut out.q, &dd.q_map().constrained, kappa_q);
    out
}

/// Field values at the lattice points of every cell.
fn evaluate_lattice(dd: &WeakerDd, coeffs: &FieldCoeffs, n_eval: usize) -> Vec<[f64; N_TRACKED]> {
    let lattice = newton_cotes_lattice(n_eval);
    let mut out = Vec::with_capacity(dd.mesh.n_cells() * lattice.points.len());
    for c in 0..dd.mesh.n_cells() {
        let ev = dd.eval_cell(coeffs, c, &lattice.points);
        for k in 0..lattice.points.len() {
            let qmag = (ev.q[k][0] * ev.q[k][0] + ev.q[k][1] * ev.q[k][1]).sqrt();
            out.push([ev.t[k], ev.g[k][0], ev.g[k][1], ev.q[k][0], ev.q[k][1], qmag]);
        }
    }
    out
}

/// Runs the ensemble from a converged state; the mesh, orders and
/// factorization stay fixed across iterations.
pub fn mcmc(
    dd: &WeakerDd,
    source: &MaterialSource,
    start: &DdState,
    spec: &PerturbSpec,
    stop: &StopRule,
) -> McmcStats {
    let lattice = newton_cotes_lattice(spec.n_eval);
    let mut cells = Vec::new();
    let mut positions = Vec::new();
    for c in 0..dd.mesh.n_cells() {
        let geom = &dd.cell_quad(c).geom;
        for &b in &lattice.points {
            cells.push(c as u32);
            positions.push(geom.to_physical(b));
        }
    }
    let mut stats = McmcStats::new(cells, positions, spec.store_samples);
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(spec.seed);

    let mut state = start.clone();
    let mut prev_mean_std = f64::NAN;
    for iter in 1..=spec.n_iter {
        if iter > 1 {
            let perturbed = perturb(dd, &state.coeffs, spec.kappa, &mut rng);
            let assignment = search_fields(dd, source, &perturbed);
            let (next, _) = dd_iterate(dd, source, InitMode::Assignment(assignment), stop);
            state = next;
        }
        stats.update(evaluate_lattice(dd, &state.coeffs, spec.n_eval));
        if let Some(tol) = spec.early_stop_tol {
            let ms = stats.mean_std();
            if iter >= 3 && prev_mean_std.is_finite() {
                let denom = ms.abs().max(1e-300);
                if ((ms - prev_mean_std).abs() / denom) < tol {
                    break;
                }
            }
            prev_mean_std = ms;
        }
    }
    stats
}

/// Per-element mean of the pointwise std for each tracked field.
pub fn summarize(stats: &McmcStats, n_cells: usize) -> Vec<[f64; N_TRACKED]> {
    let mut acc = vec![[0.0; N_TRACKED]; n_cells];
    let mut counts = vec![0usize; n_cells];
    for (i, &c) in stats.cells.iter().enumerate() {
        for f in 0..N_TRACKED {
            acc[c as usize][f] += stats.std(i, f);
        }
        counts[c as usize] += 1;
    }
    for (a, n) in acc.iter_mut().zip(&counts) {
        if *n > 0 {
            for f in a.iter_mut() {
                *f /= *n as f64;
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Scaling;
    use crate::solvers::problems::exphat_square;
    use crate::solvers::exphat;
    use approx::assert_relative_eq;

    fn solved() -> (WeakerDd, DdState, MaterialSource) {
        let (mesh, bt) = exphat_square(3, 1).unwrap();
        let dd = WeakerDd::new(mesh, &bt, &exphat::source, Scaling::UNIT, false).unwrap();
        let source = MaterialSource::LineOracle { k: 1.0, scaling: Scaling::UNIT };
        let (state, _) = dd_iterate(&dd, &source, InitMode::Zero, &StopRule::default());
        (dd, state, source)
    }

    #[test]
    fn zero_kappa_is_identity() {
        let (dd, state, _) = solved();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let out = perturb(&dd, &state.coeffs, 0.0, &mut rng);
        assert_eq!(out, state.coeffs);
    }

    #[test]
    fn perturbation_deterministic_and_respects_constraints() {
        let (dd, state, _) = solved();
        let mut r1 = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let mut r2 = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let a = perturb(&dd, &state.coeffs, 0.5, &mut r1);
        let b = perturb(&dd, &state.coeffs, 0.5, &mut r2);
        assert_eq!(a, b);
        // essential q dofs untouched
        for (d, c) in dd.q_map().constrained.iter().enumerate() {
            if c.is_some() {
                assert_eq!(a.q[d], state.coeffs.q[d]);
            }
        }
        // multipliers untouched
        assert_eq!(a.lam, state.coeffs.lam);
        assert_eq!(a.tau, state.coeffs.tau);
    }

    #[test]
    fn perturbation_mean_is_near_zero() {
        // mean of many draws within 3 sigma / sqrt(n) of zero
        let (dd, state, _) = solved();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let n = 10_000usize;
        let mut acc = 0.0;
        let kappa = 1.0;
        for _ in 0..n {
            let out = perturb(&dd, &state.coeffs, kappa, &mut rng);
            acc += out.t[0] - state.coeffs.t[0];
        }
        let mean = acc / n as f64;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "draw mean {mean}");
    }

    #[test]
    fn single_iteration_has_zero_variance() {
        let (dd, state, source) = solved();
        let spec = PerturbSpec { n_iter: 1, kappa: 0.1, ..Default::default() };
        let stats = mcmc(&dd, &source, &state, &spec, &StopRule::default());
        assert_eq!(stats.count, 1);
        for i in 0..stats.positions.len() {
            for f in 0..N_TRACKED {
                assert_eq!(stats.variance(i, f), 0.0);
            }
        }
    }

    #[test]
    fn welford_matches_two_pass() {
        let (dd, state, source) = solved();
        let spec = PerturbSpec {
            n_iter: 8,
            kappa: 0.3,
            early_stop_tol: None,
            store_samples: true,
            ..Default::default()
        };
        let stats = mcmc(&dd, &source, &state, &spec, &StopRule::default());
        let samples = stats.samples.as_ref().unwrap();
        assert_eq!(samples.len(), stats.count);
        for i in (0..stats.positions.len()).step_by(7) {
            for f in 0..N_TRACKED {
                let vals: Vec<f64> = samples.iter().map(|s| s[i][f]).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / vals.len() as f64;
                // relative to the magnitude of the data, with a floor for
                // numerically zero variances
                let scale = (var + mean * mean).max(1e-30);
                assert!(
                    (stats.variance(i, f) - var).abs() / scale < 1e-10,
                    "welford vs two-pass at point {i} field {f}: {} vs {var}",
                    stats.variance(i, f)
                );
                assert_relative_eq!(stats.mean[i][f], mean, epsilon = 1e-10, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn summary_of_uniform_std() {
        let (dd, state, source) = solved();
        let spec = PerturbSpec {
            n_iter: 5,
            kappa: 0.2,
            early_stop_tol: None,
            ..Default::default()
        };
        let stats = mcmc(&dd, &source, &state, &spec, &StopRule::default());
        let summary = summarize(&stats, dd.mesh.n_cells());
        // per-element summary is the mean of its lattice stds
        let lattice_per_cell = stats.positions.len() / dd.mesh.n_cells();
        let mut manual = 0.0;
        for i in 0..lattice_per_cell {
            manual += stats.std(i, 0);
        }
        manual /= lattice_per_cell as f64;
        assert_relative_eq!(summary[0][0], manual, epsilon = 1e-13);
    }
}
