//! The data-driven fixed-point driver: alternate between solving the linear
//! system for the current material assignment and searching for the closest
//! material states at every integration point.

use super::common::{FieldCoeffs, FieldSample};
use super::{DdOperator, MaterialSource, PointAssignment};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

/// How the first assignment is produced.
#[derive(Debug, Clone)]
pub enum InitMode {
    /// Zero material states everywhere (zero initial fields).
    Zero,
    /// Each Gauss point draws a uniformly random dataset point (for the line
    /// oracle: a random point on the line with components in [-1, 1]).
    RandomAssignment { seed: u64 },
    /// Externally provided assignment, e.g. re-seeded by a nearest search on
    /// transferred fields.
    Assignment(Vec<PointAssignment>),
}

/// Stopping rule of the iteration.
#[derive(Debug, Clone, Copy)]
pub struct StopRule {
    /// Terminate when |eps_d(i) - eps_d(i-1)| <= tol_eps_rel * d_RMS.
    pub tol_eps_rel: f64,
    pub max_iter: usize,
    /// Terminate when the assignment repeats exactly (dataset sources).
    pub same_assignment: bool,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { tol_eps_rel: 1e-8, max_iter: 100, same_assignment: true }
    }
}

/// Converged (or final) state of the iteration.
#[derive(Debug, Clone)]
pub struct DdState {
    pub coeffs: FieldCoeffs,
    pub samples: Vec<FieldSample>,
    pub assignment: Vec<PointAssignment>,
    pub eps_history: Vec<f64>,
    pub converged: bool,
    pub same_assignment_fired: bool,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_eps: f64,
    pub wall_time_s: f64,
    /// iterations x Gauss points: one search per point per iteration.
    pub query_count: u64,
    pub factorization_reused: bool,
}

/// Searches the material source at every Gauss point of the given fields.
pub fn search_fields(
    dd: &dyn DdOperator,
    source: &MaterialSource,
    coeffs: &FieldCoeffs,
) -> Vec<PointAssignment> {
    let samples = dd.evaluate(coeffs);
    samples.par_iter().map(|s| source.assign(s)).collect()
}

fn rms_distance(dd: &dyn DdOperator, assign: &[PointAssignment]) -> f64 {
    let mut acc = 0.0;
    for (gp, a) in dd.gauss().iter().zip(assign) {
        acc += gp.weight * a.distance * a.distance;
    }
    (acc / dd.domain_area()).sqrt()
}

/// Comparative RMS of the field values in the search metric (temperature
/// included only for 5D searches).
pub fn comparative_rms_of_samples(dd: &dyn DdOperator, samples: &[FieldSample]) -> f64 {
    let s = dd.search_scaling();
    let mut acc = 0.0;
    for (gp, smp) in dd.gauss().iter().zip(samples) {
        let mut v = s.s_g * (smp.g[0] * smp.g[0] + smp.g[1] * smp.g[1])
            + s.s_q * (smp.q[0] * smp.q[0] + smp.q[1] * smp.q[1]);
        if dd.search_uses_temperature() {
            v += s.s_t * smp.t * smp.t;
        }
        acc += gp.weight * v;
    }
    (acc / dd.domain_area()).sqrt()
}

fn initial_assignment(
    dd: &dyn DdOperator,
    source: &MaterialSource,
    init: InitMode,
) -> Vec<PointAssignment> {
    match init {
        InitMode::Zero => vec![PointAssignment::ZERO; dd.gauss().len()],
        InitMode::Assignment(assign) => {
            assert_eq!(assign.len(), dd.gauss().len());
            assign
        }
        InitMode::RandomAssignment { seed } => {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            match source {
                MaterialSource::Dataset(ds) => (0..dd.gauss().len())
                    .map(|_| {
                        let idx = rng.gen_range(0..ds.len());
                        let p = ds.point(idx);
                        PointAssignment {
                            index: Some(idx as u32),
                            t_star: p.temperature.unwrap_or(0.0),
                            g_star: p.gradient,
                            q_star: p.flux,
                            distance: 0.0,
                        }
                    })
                    .collect(),
                MaterialSource::LineOracle { k, .. } => (0..dd.gauss().len())
                    .map(|_| {
                        let g = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                        PointAssignment {
                            index: None,
                            t_star: 0.0,
                            g_star: g,
                            q_star: [-k * g[0], -k * g[1]],
                            distance: 0.0,
                        }
                    })
                    .collect(),
            }
        }
    }
}

/// Runs the two-step iteration against a factored operator.
///
/// Each iteration resolves the system for the current assignment and then
/// searches the source at every Gauss point (`query_count` counts exactly
/// these searches). The iteration stops when the assignment repeats, when
/// the RMS distance stalls, or at `max_iter` (flagged, not an error).
pub fn dd_iterate(
    dd: &dyn DdOperator,
    source: &MaterialSource,
    init: InitMode,
    stop: &StopRule,
) -> (DdState, SolveReport) {
    let t0 = std::time::Instant::now();
    let factored_before = dd.system().is_factored();
    let factor_count_before = dd.system().factor_count.load(std::sync::atomic::Ordering::Relaxed);

    let mut assignment = initial_assignment(dd, source, init);
    let mut eps_history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut same_fired = false;
    let mut coeffs = FieldCoeffs::default();
    let mut samples: Vec<FieldSample> = Vec::new();
    let mut iterations = 0;

    for iter in 1..=stop.max_iter {
        iterations = iter;
        coeffs = dd.solve(&assignment);
        samples = dd.evaluate(&coeffs);
        let new_assign: Vec<PointAssignment> =
            samples.par_iter().map(|s| source.assign(s)).collect();
        let eps = rms_distance(dd, &new_assign);
        eps_history.push(eps);

        let same = stop.same_assignment
            && source.is_dataset()
            && new_assign
                .iter()
                .zip(&assignment)
                .all(|(a, b)| a.index.is_some() && a.index == b.index);
        assignment = new_assign;
        if same {
            converged = true;
            same_fired = true;
            break;
        }
        if iter >= 2 {
            let d_rms = comparative_rms_of_samples(dd, &samples);
            let delta = (eps_history[iter - 1] - eps_history[iter - 2]).abs();
            if d_rms == 0.0 || delta <= stop.tol_eps_rel * d_rms {
                converged = true;
                break;
            }
        }
    }

    let factor_count_after = dd.system().factor_count.load(std::sync::atomic::Ordering::Relaxed);
    let report = SolveReport {
        iterations,
        final_eps: eps_history.last().copied().unwrap_or(f64::NAN),
        wall_time_s: t0.elapsed().as_secs_f64(),
        query_count: (iterations * dd.gauss().len()) as u64,
        factorization_reused: factored_before && factor_count_after == factor_count_before,
    };
    (
        DdState {
            coeffs,
            samples,
            assignment,
            eps_history,
            converged,
            same_assignment_fired: same_fired,
        },
        report,
    )
}
