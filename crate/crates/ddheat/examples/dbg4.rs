// Criterion-7 probe: artexp dataset -> tweaks -> brick adapt -> MCMC.
use ddheat::adaptivity::{adapt_loop, Thresholds};
use ddheat::dataset::artexp::generate_artexp;
use ddheat::dataset::Dimension;
use ddheat::mesh::HoleSpec;
use ddheat::solvers::problems::{annulus_problem, brick_problem};
use ddheat::solvers::reference::NewtonParams;
use ddheat::solvers::weaker::WeakerDd;
use ddheat::solvers::{dd_iterate, DdOperator, InitMode, KCoeffs, MaterialSource, StopRule};
use ddheat::uq::{mcmc, summarize, PerturbSpec};
use std::sync::Arc;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let (annulus, _) = annulus_problem(0.05, 0.15, 0.02, 2, 0.0, 0.0).unwrap();
    println!("annulus: {} cells", annulus.n_cells());
    let ds = generate_artexp([400.0, 1100.0], 10, &annulus, KCoeffs::GRAPHITE, &NewtonParams::default()).unwrap();
    println!("artexp dataset: {} points in {:.1}s, scaling {:?}", ds.len(), t0.elapsed().as_secs_f64(), ds.scaling);
    let gx_min = ds.points().iter().map(|p| p.gradient[0]).fold(f64::INFINITY, f64::min);
    let gx_max = ds.points().iter().map(|p| p.gradient[0]).fold(f64::NEG_INFINITY, f64::max);
    println!("gx range: [{gx_min:.3e}, {gx_max:.3e}]");
    let ds = ds.remove_range(Dimension::Gx, [-9e3, -6e3]).unwrap();
    println!("after removal: {}", ds.len());
    let ds = ds.add_conditional_noise(1e6, 2e3, 42).unwrap();

    let holes = [
        HoleSpec { center: [0.175, 0.08], radius: 0.02 },
        HoleSpec { center: [0.08, 0.175], radius: 0.02 },
    ];
    let (brick, bt) = brick_problem(0.13, 0.23, &holes, 0.0095, 1, 1000.0, 500.0).unwrap();
    println!("brick: {} cells", brick.n_cells());
    let source = MaterialSource::Dataset(Arc::new(ds));
    let t1 = Instant::now();
    let thresholds = Thresholds { n_rounds: 3, ..Default::default() };
    let rounds = adapt_loop(
        brick, &bt, &|_| 0.0, &source, &thresholds,
        &StopRule::default(), InitMode::Zero, true,
    )
    .unwrap();
    for (i, r) in rounds.iter().enumerate() {
        println!(
            "round {i}: cells={} dofs={} mu_g={:.3e} eps={:.3e} iters={} marks p/h={}/{} ({:.1}s)",
            r.mesh.n_cells(), r.n_free_dofs, r.report.mu_global, r.report.eps_d,
            r.solve_report.iterations, r.marks.p_marks.len(), r.marks.h_marks.len(),
            t1.elapsed().as_secs_f64()
        );
    }
    let last = rounds.last().unwrap();
    let dd = WeakerDd::new(last.mesh.clone(), &bt, &|_| 0.0, source.scaling(), true).unwrap();
    let assignment = ddheat::solvers::search_fields(&dd, &source, &last.state.coeffs);
    let (start, _) = dd_iterate(&dd, &source, InitMode::Assignment(assignment), &StopRule::default());
    let t2 = Instant::now();
    let spec = PerturbSpec { kappa: 1e4, seed: 7, n_iter: 20, early_stop_tol: None, n_eval: 2, store_samples: false };
    let stats = mcmc(&dd, &source, &start, &spec, &StopRule::default());
    println!("mcmc 20 iters in {:.1}s, mean std {:.3e}", t2.elapsed().as_secs_f64(), stats.mean_std());
    // noise-condition elements: assigned |g*| < 2e3
    let summary = summarize(&stats, dd.mesh.n_cells());
    let mut noisy_cells = std::collections::BTreeSet::new();
    for (gp, a) in dd.gauss().iter().zip(&start.assignment) {
        let gmag = (a.g_star[0].powi(2) + a.g_star[1].powi(2)).sqrt();
        if gmag < 2e3 { noisy_cells.insert(gp.cell as usize); }
    }
    println!("cells with noise-condition states: {}", noisy_cells.len());
    let (mut sx, mut sy) = (0.0, 0.0);
    for &c in &noisy_cells {
        sx += summary[c][3];
        sy += summary[c][4];
    }
    println!("mean std qx = {:.4e}, qy = {:.4e}, ratio = {:.2}", sx / noisy_cells.len() as f64, sy / noisy_cells.len() as f64, sy / sx);
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
}
