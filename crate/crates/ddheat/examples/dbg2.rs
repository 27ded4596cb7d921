// Convergence experiment: weaker + stronger formulations with the saturated
// line oracle on the manufactured problem.
use ddheat::dataset::Scaling;
use ddheat::solvers::problems::{exphat_square, loglog_slope};
use ddheat::solvers::{
    dd_iterate, exphat, InitMode, MaterialSource, StopRule, StrongerDd, WeakerDd,
};

fn main() {
    let source = MaterialSource::LineOracle { k: 1.0, scaling: Scaling::UNIT };
    let hs = [0.2, 0.1, 0.05];
    let ns = [5usize, 10, 20];
    let stop = StopRule { tol_eps_rel: 1e-10, ..StopRule::default() };
    println!("== weaker ==");
    for p in [0u8, 1, 2] {
        let mut errs_t = Vec::new();
        let mut errs_q = Vec::new();
        for &n in &ns {
            let (mesh, bt) = exphat_square(n, p).unwrap();
            let dd = WeakerDd::new(mesh, &bt, &exphat::source, Scaling::UNIT, false).unwrap();
            let (state, rep) = dd_iterate(&dd, &source, InitMode::Zero, &stop);
            let (et, eq) = dd.l2_errors(&state.coeffs, &exphat::temperature, &exphat::flux);
            println!("p={p} n={n}: iters={} eps={:.3e} errT={et:.4e} errQ={eq:.4e} conv={}", rep.iterations, rep.final_eps, state.converged);
            errs_t.push(et);
            errs_q.push(eq);
        }
        println!("p={p}: slope T = {:.2} (want {}), slope q = {:.2} (want {})",
            loglog_slope(&hs, &errs_t), p + 1, loglog_slope(&hs, &errs_q), p + 2);
    }
    println!("== stronger ==");
    for p in [1u8, 2] {
        let mut errs_t = Vec::new();
        let mut errs_q = Vec::new();
        for &n in &ns {
            let (mesh, bt) = exphat_square(n, p).unwrap();
            let dd = StrongerDd::new(mesh, &bt, &exphat::source, Scaling::UNIT, false).unwrap();
            let (state, rep) = dd_iterate(&dd, &source, InitMode::Zero, &stop);
            let (et, eq) = dd.l2_errors(&state.coeffs, &exphat::temperature, &exphat::flux);
            println!("p={p} n={n}: iters={} errT={et:.4e} errQ={eq:.4e} conv={}", rep.iterations, state.converged);
            errs_t.push(et);
            errs_q.push(eq);
        }
        println!("p={p}: slope T = {:.2} (want {}), slope q = {:.2} (want {})",
            loglog_slope(&hs, &errs_t), p + 1, loglog_slope(&hs, &errs_q), p);
    }
}
