//! Command-line front end: dataset generation and tweaks, single solves,
//! convergence studies, adaptive runs and the non-uniqueness ensemble.
//!
//! Every run writes a resolved-config snapshot into its output directory, so
//! re-running from that directory reproduces the artifacts byte for byte.

use crate::adaptivity::{adapt_loop, Thresholds};
use crate::config::RunConfig;
use crate::dataset::{
    self, artexp::generate_artexp, read_dataset_csv, write_dataset_csv, Dimension, Scaling,
};
use crate::error::{DdError, Result};
use crate::indicators::compute_report;
use crate::io::report::{
    write_adapt_summary_csv, write_convergence_csv, write_eps_history_csv, write_indicator_csv,
    write_mcmc_manifest, write_mcmc_summary_csv, write_solve_report_csv, ConvergenceRow,
};
use crate::io::vtk::{write_cell_data_vtk, write_fields_vtk, VtkPointData};
use crate::mesh::{read_mesh, Mesh};
use crate::solvers::problems::{annulus_problem, brick_problem, exphat_square, loglog_slope};
use crate::solvers::reference::{
    solve_reference_linear, solve_reference_nonlinear, NewtonParams, ReferenceSolution,
};
use crate::solvers::weaker::WeakerDd;
use crate::solvers::{
    dd_iterate, exphat, BoundaryTable, BoundaryValue, DdState, InitMode, KCoeffs, MaterialSource,
    StopRule, StrongerDd,
};
use crate::uq::{mcmc, summarize, PerturbSpec};
use std::path::Path;
use std::sync::Arc;

const USAGE: &str = "usage: ddheat [--threads N] <command> <config.toml>
commands:
  gen-dataset regular <config>     grid dataset from the linear law
  gen-dataset artexp <config>      synthetic-experiment dataset (5D)
  tweak-dataset remove-range <config>
  tweak-dataset add-noise <config>
  solve <config>                   one solve of the configured formulation
  study convergence <config>       mesh-refinement error table and slopes
  adapt <config>                   adaptive hp-refinement rounds
  mcmc <config>                    adaptive run + non-uniqueness ensemble";

/// Entry point of the binary; returns the process exit code.
pub fn run<I: IntoIterator<Item = String>>(argv: I) -> i32 {
    let mut args: Vec<String> = argv.into_iter().skip(1).collect();
    // --threads N caps the worker pool
    if let Some(pos) = args.iter().position(|a| a == "--threads") {
        if pos + 1 >= args.len() {
            eprintln!("--threads needs a value\n{USAGE}");
            return 1;
        }
        let Ok(n) = args[pos + 1].parse::<usize>() else {
            eprintln!("--threads needs an integer\n{USAGE}");
            return 1;
        };
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        args.drain(pos..=pos + 1);
    }
    match dispatch(&args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                DdError::Config(_) | DdError::Io(_) | DdError::UnboundBoundaryValue(_) => 1,
                _ => 2,
            }
        }
    }
}

fn dispatch(args: &[String]) -> Result<()> {
    let words: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    match words.as_slice() {
        ["gen-dataset", kind @ ("regular" | "artexp"), config] => {
            cmd_gen_dataset(kind, Path::new(config))
        }
        ["tweak-dataset", tweak @ ("remove-range" | "add-noise"), config] => {
            cmd_tweak_dataset(tweak, Path::new(config))
        }
        ["solve", config] => cmd_solve(Path::new(config)),
        ["study", "convergence", config] => cmd_study(Path::new(config)),
        ["adapt", config] => cmd_adapt(Path::new(config)),
        ["mcmc", config] => cmd_mcmc(Path::new(config)),
        _ => Err(DdError::Config(format!(
            "unrecognized command {:?}\n{USAGE}",
            words.join(" ")
        ))),
    }
}

fn build_mesh(cfg: &RunConfig) -> Result<(Arc<Mesh>, BoundaryTable)> {
    match cfg.mesh.kind.as_str() {
        "exphat" => exphat_square(cfg.mesh.n, cfg.mesh.order),
        "quarter_annulus" => annulus_problem(
            cfg.mesh.r_in,
            cfg.mesh.r_out,
            cfg.mesh.resolution,
            cfg.mesh.order,
            cfg.problem.t_in,
            cfg.problem.t_out,
        ),
        "quarter_brick" => {
            let holes: Vec<crate::mesh::HoleSpec> = cfg
                .mesh
                .holes
                .iter()
                .map(|h| crate::mesh::HoleSpec { center: [h[0], h[1]], radius: h[2] })
                .collect();
            brick_problem(
                cfg.mesh.r_bore,
                cfg.mesh.outer_half_width,
                &holes,
                cfg.mesh.resolution,
                cfg.mesh.order,
                cfg.problem.t_in,
                cfg.problem.t_out,
            )
        }
        "file" => {
            if cfg.mesh.path.is_empty() {
                return Err(DdError::Config("mesh.path is required for mesh.kind = \"file\"".into()));
            }
            let file = std::fs::File::open(&cfg.mesh.path)
                .map_err(|e| DdError::Config(format!("mesh.path {}: {e}", cfg.mesh.path)))?;
            let mesh = read_mesh(std::io::BufReader::new(file))?;
            // file meshes bind constant boundary data by convention
            let mut bt = BoundaryTable::new();
            bt.insert(crate::mesh::VAL_T_IN, BoundaryValue::Const(cfg.problem.t_in));
            bt.insert(crate::mesh::VAL_T_OUT, BoundaryValue::Const(cfg.problem.t_out));
            bt.insert(crate::mesh::VAL_Q_ZERO, BoundaryValue::Const(0.0));
            Ok((Arc::new(mesh), bt))
        }
        other => Err(DdError::Config(format!("unknown mesh.kind {other:?}"))),
    }
}

fn scaling_override(cfg: &RunConfig, base: Scaling) -> Scaling {
    Scaling {
        s_t: if cfg.scaling.s_t > 0.0 { cfg.scaling.s_t } else { base.s_t },
        s_g: if cfg.scaling.s_g > 0.0 { cfg.scaling.s_g } else { base.s_g },
        s_q: if cfg.scaling.s_q > 0.0 { cfg.scaling.s_q } else { base.s_q },
    }
}

fn build_source(cfg: &RunConfig) -> Result<(MaterialSource, bool)> {
    match cfg.dataset.source.as_str() {
        "oracle" => {
            let scaling = scaling_override(cfg, Scaling::UNIT);
            Ok((MaterialSource::LineOracle { k: cfg.dataset.oracle_k, scaling }, false))
        }
        "csv" => {
            if cfg.dataset.path.is_empty() {
                return Err(DdError::Config(
                    "dataset.path is required for dataset.source = \"csv\"".into(),
                ));
            }
            let ds = read_dataset_csv(Path::new(&cfg.dataset.path))?;
            let scaling = scaling_override(cfg, ds.scaling);
            let ds = if scaling != ds.scaling { ds.with_scaling(scaling)? } else { ds };
            let five = ds.dim == dataset::DatasetDim::Five;
            Ok((MaterialSource::Dataset(Arc::new(ds)), five))
        }
        other => Err(DdError::Config(format!("unknown dataset.source {other:?}"))),
    }
}

fn stop_rule(cfg: &RunConfig) -> StopRule {
    StopRule {
        tol_eps_rel: cfg.dd.tol_eps_rel,
        max_iter: cfg.dd.max_iter,
        same_assignment: cfg.dd.same_assignment,
    }
}

fn init_mode(cfg: &RunConfig) -> Result<InitMode> {
    match cfg.dd.init.as_str() {
        "zero" => Ok(InitMode::Zero),
        "random" => Ok(InitMode::RandomAssignment { seed: cfg.require_seed()? }),
        other => Err(DdError::Config(format!("unknown dd.init {other:?}"))),
    }
}

fn source_term(cfg: &RunConfig) -> Box<dyn Fn(crate::geom::Pt) -> f64 + Sync> {
    if cfg.mesh.kind == "exphat" {
        Box::new(exphat::source)
    } else {
        Box::new(|_| 0.0)
    }
}

fn cmd_gen_dataset(kind: &str, config: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let out = Path::new(&cfg.dataset.out);
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let ds = match kind {
        "regular" => dataset::generate_regular(cfg.dataset.a, cfg.dataset.count_g, cfg.dataset.k)?,
        "artexp" => {
            let (mesh, _) = annulus_problem(
                cfg.mesh.r_in,
                cfg.mesh.r_out,
                cfg.mesh.resolution,
                cfg.mesh.order.max(1),
                0.0,
                0.0,
            )?;
            let kc = KCoeffs {
                c0: cfg.problem.k_coeffs[0],
                c1: cfg.problem.k_coeffs[1],
                c2: cfg.problem.k_coeffs[2],
            };
            let newton = NewtonParams { tol: cfg.problem.newton_tol, max_iter: cfg.problem.newton_max_iter };
            generate_artexp(
                [cfg.dataset.t_min, cfg.dataset.t_max],
                cfg.dataset.n_levels,
                &mesh,
                kc,
                &newton,
            )?
        }
        _ => unreachable!(),
    };
    write_dataset_csv(&ds, out)?;
    println!("wrote {} points to {}", ds.len(), out.display());
    Ok(())
}

fn cmd_tweak_dataset(tweak: &str, config: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    if cfg.dataset.path.is_empty() {
        return Err(DdError::Config("dataset.path (input) is required".into()));
    }
    let ds = read_dataset_csv(Path::new(&cfg.dataset.path))?;
    let tweaked = match tweak {
        "remove-range" => {
            let dim = Dimension::parse(&cfg.dataset.dimension)?;
            ds.remove_range(dim, cfg.dataset.interval)?
        }
        "add-noise" => {
            let seed = cfg.require_seed()?;
            ds.add_conditional_noise(cfg.dataset.sigma, cfg.dataset.threshold, seed)?
        }
        _ => unreachable!(),
    };
    let out = Path::new(&cfg.dataset.out);
    write_dataset_csv(&tweaked, out)?;
    println!("wrote {} points to {}", tweaked.len(), out.display());
    Ok(())
}

fn weaker_vtk(
    dir: &Path,
    name: &str,
    cfg: &RunConfig,
    dd: &WeakerDd,
    state: &DdState,
) -> Result<()> {
    write_fields_vtk(
        &dir.join(name),
        &dd.mesh,
        "ddheat weaker fields",
        cfg.output.vtk_subdivision.max(1),
        &|cell, pts| {
            let ev = dd.eval_cell(&state.coeffs, cell, pts);
            (0..pts.len())
                .map(|k| VtkPointData { t: ev.t[k], g: ev.g[k], q: ev.q[k] })
                .collect()
        },
    )
}

fn cmd_solve(config: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let dir = cfg.prepare_output()?;
    let (mesh, bt) = build_mesh(&cfg)?;
    let f = source_term(&cfg);

    match cfg.problem.formulation.as_str() {
        "dd_weaker" | "dd_stronger" => {
            let (source, uses_t) = build_source(&cfg)?;
            let scaling = match &source {
                MaterialSource::Dataset(ds) => ds.scaling,
                MaterialSource::LineOracle { scaling, .. } => *scaling,
            };
            let init = init_mode(&cfg)?;
            let stop = stop_rule(&cfg);
            if cfg.problem.formulation == "dd_weaker" {
                let dd = WeakerDd::new(mesh.clone(), &bt, f.as_ref(), scaling, uses_t)?;
                let (state, report) = dd_iterate(&dd, &source, init, &stop);
                println!(
                    "weaker solve: {} iterations, eps_d = {:.6e}, converged = {}",
                    report.iterations, report.final_eps, state.converged
                );
                weaker_vtk(&dir, "fields.vtk", &cfg, &dd, &state)?;
                let ind = compute_report(&dd, &state, &|p| f(p), cfg.thresholds.c_d, None);
                write_indicator_csv(&dir.join("indicators.csv"), &mesh, &ind)?;
                write_eps_history_csv(&dir.join("eps_history.csv"), &state.eps_history)?;
                write_solve_report_csv(&dir.join("solve_report.csv"), &report)?;
            } else {
                let dd = StrongerDd::new(mesh.clone(), &bt, f.as_ref(), scaling, uses_t)?;
                let (state, report) = dd_iterate(&dd, &source, init, &stop);
                println!(
                    "stronger solve: {} iterations, eps_d = {:.6e}, converged = {}",
                    report.iterations, report.final_eps, state.converged
                );
                write_fields_vtk(
                    &dir.join("fields.vtk"),
                    &mesh,
                    "ddheat stronger fields",
                    cfg.output.vtk_subdivision.max(1),
                    &|cell, pts| {
                        let (tv, gv, qv) = dd.eval_cell(&state.coeffs, cell, pts);
                        (0..pts.len())
                            .map(|k| VtkPointData { t: tv[k], g: gv[k], q: qv[k] })
                            .collect()
                    },
                )?;
                write_eps_history_csv(&dir.join("eps_history.csv"), &state.eps_history)?;
                write_solve_report_csv(&dir.join("solve_report.csv"), &report)?;
            }
        }
        "reference_linear" | "reference_nonlinear" => {
            let sol: ReferenceSolution = if cfg.problem.formulation == "reference_linear" {
                solve_reference_linear(&mesh, &bt, f.as_ref(), cfg.problem.k)?
            } else {
                let kc = KCoeffs {
                    c0: cfg.problem.k_coeffs[0],
                    c1: cfg.problem.k_coeffs[1],
                    c2: cfg.problem.k_coeffs[2],
                };
                solve_reference_nonlinear(
                    &mesh,
                    &bt,
                    f.as_ref(),
                    kc,
                    &NewtonParams { tol: cfg.problem.newton_tol, max_iter: cfg.problem.newton_max_iter },
                )?
            };
            println!(
                "reference solve: {} residual evaluations, final residual {:.3e}",
                sol.residual_history.len(),
                sol.residual_history.last().copied().unwrap_or(f64::NAN)
            );
            write_fields_vtk(
                &dir.join("fields.vtk"),
                &mesh,
                "ddheat reference fields",
                cfg.output.vtk_subdivision.max(1),
                &|cell, pts| {
                    let (tv, gv) = sol.eval_cell(cell, pts);
                    (0..pts.len())
                        .map(|k| VtkPointData {
                            t: tv[k],
                            g: gv[k],
                            q: sol.flux_at(tv[k], gv[k]),
                        })
                        .collect()
                },
            )?;
        }
        other => return Err(DdError::Config(format!("unknown formulation {other:?}"))),
    }
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_study(config: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    if cfg.mesh.kind != "exphat" {
        return Err(DdError::Config(
            "study convergence runs on the manufactured problem (mesh.kind = \"exphat\")".into(),
        ));
    }
    let dir = cfg.prepare_output()?;
    let (source, uses_t) = build_source(&cfg)?;
    let stop = stop_rule(&cfg);
    let weaker = cfg.problem.formulation != "dd_stronger";

    for &p in &cfg.study.orders {
        if !weaker && p == 0 {
            continue;
        }
        let mut rows = Vec::new();
        for &n in &cfg.study.ns {
            let (mesh, bt) = exphat_square(n, p)?;
            let h = 1.0 / n as f64;
            let (err_t, err_q) = if weaker {
                let dd = WeakerDd::new(mesh, &bt, &exphat::source, source.scaling(), uses_t)?;
                let (state, _) = dd_iterate(&dd, &source, InitMode::Zero, &stop);
                dd.l2_errors(&state.coeffs, &exphat::temperature, &exphat::flux)
            } else {
                let dd = StrongerDd::new(mesh, &bt, &exphat::source, source.scaling(), uses_t)?;
                let (state, _) = dd_iterate(&dd, &source, InitMode::Zero, &stop);
                dd.l2_errors(&state.coeffs, &exphat::temperature, &exphat::flux)
            };
            println!("p={p} n={n}: errT={err_t:.6e} errQ={err_q:.6e}");
            rows.push(ConvergenceRow { h, p, err_t, err_q });
        }
        let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let et: Vec<f64> = rows.iter().map(|r| r.err_t).collect();
        let eq: Vec<f64> = rows.iter().map(|r| r.err_q).collect();
        let (st, sq) = (loglog_slope(&hs, &et), loglog_slope(&hs, &eq));
        println!("p={p}: slope T = {st:.3}, slope q = {sq:.3}");
        write_convergence_csv(&dir.join(format!("convergence_p{p}.csv")), &rows, st, sq)?;
    }
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_adapt(config: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let dir = cfg.prepare_output()?;
    let (mesh, bt) = build_mesh(&cfg)?;
    let f = source_term(&cfg);
    let (source, uses_t) = build_source(&cfg)?;
    let thresholds = Thresholds {
        c_p: cfg.thresholds.c_p,
        c_d: cfg.thresholds.c_d,
        c_s: cfg.thresholds.c_s,
        c_sa: cfg.thresholds.c_sa,
        c_h: cfg.thresholds.c_h,
        n_rounds: cfg.thresholds.n_rounds,
    };
    let rounds = adapt_loop(
        mesh,
        &bt,
        f.as_ref(),
        &source,
        &thresholds,
        &stop_rule(&cfg),
        init_mode(&cfg)?,
        uses_t,
    )?;
    let mut summary = Vec::new();
    for (i, round) in rounds.iter().enumerate() {
        println!(
            "round {i}: {} cells, {} free dofs, mu_g = {:.4e}, eps_d = {:.4e}, marks p/h = {}/{}",
            round.mesh.n_cells(),
            round.n_free_dofs,
            round.report.mu_global,
            round.report.eps_d,
            round.marks.p_marks.len(),
            round.marks.h_marks.len()
        );
        let dd = WeakerDd::new(round.mesh.clone(), &bt, f.as_ref(), source.scaling(), uses_t)?;
        weaker_vtk(&dir, &format!("round_{i}_fields.vtk"), &cfg, &dd, &round.state)?;
        write_indicator_csv(&dir.join(format!("round_{i}_indicators.csv")), &round.mesh, &round.report)?;
        write_cell_data_vtk(
            &dir.join(format!("round_{i}_indicators.vtk")),
            &round.mesh,
            "ddheat indicators",
            &[
                ("mu", &round.report.mu),
                ("eta", &round.report.eta),
                ("nu", &round.report.nu),
                ("gamma", &round.report.gamma),
                ("d_ave", &round.report.d_ave),
                ("d_std", &round.report.d_std),
                (
                    "order",
                    &round.mesh.cell_order.iter().map(|&p| p as f64).collect::<Vec<_>>(),
                ),
            ],
        )?;
        summary.push((
            i,
            round.mesh.n_cells(),
            round.n_free_dofs,
            round.report.mu_global,
            round.report.eps_d,
            round.marks.p_marks.len(),
            round.marks.h_marks.len(),
        ));
    }
    write_adapt_summary_csv(&dir.join("adapt_summary.csv"), &summary)?;
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_mcmc(config: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let dir = cfg.prepare_output()?;
    let seed = cfg.require_seed()?;
    let (mesh, bt) = build_mesh(&cfg)?;
    let f = source_term(&cfg);
    let (source, uses_t) = build_source(&cfg)?;
    let thresholds = Thresholds {
        c_p: cfg.thresholds.c_p,
        c_d: cfg.thresholds.c_d,
        c_s: cfg.thresholds.c_s,
        c_sa: cfg.thresholds.c_sa,
        c_h: cfg.thresholds.c_h,
        n_rounds: cfg.thresholds.n_rounds,
    };
    let stop = stop_rule(&cfg);
    let rounds = adapt_loop(
        mesh,
        &bt,
        f.as_ref(),
        &source,
        &thresholds,
        &stop,
        init_mode(&cfg)?,
        uses_t,
    )?;
    let last = rounds.last().expect("at least one adapt round");
    println!(
        "adapted: {} rounds, final mesh {} cells",
        rounds.len(),
        last.mesh.n_cells()
    );

    // the ensemble reuses the final round's factorization
    let dd = WeakerDd::new(last.mesh.clone(), &bt, f.as_ref(), source.scaling(), uses_t)?;
    let assignment = crate::solvers::search_fields(&dd, &source, &last.state.coeffs);
    let (start, _) = dd_iterate(&dd, &source, InitMode::Assignment(assignment), &stop);

    let spec = PerturbSpec {
        kappa: cfg.mcmc.kappa,
        seed,
        n_iter: cfg.mcmc.n_iter,
        early_stop_tol: (cfg.mcmc.early_stop_tol > 0.0).then_some(cfg.mcmc.early_stop_tol),
        n_eval: cfg.mcmc.n_eval.max(1),
        store_samples: false,
    };
    let stats = mcmc(&dd, &source, &start, &spec, &stop);
    println!(
        "ensemble: {} iterations, mean pointwise std = {:.4e}",
        stats.count,
        stats.mean_std()
    );
    let summary = summarize(&stats, last.mesh.n_cells());
    write_mcmc_summary_csv(&dir.join("mcmc_summary.csv"), &summary)?;
    write_mcmc_manifest(
        &dir.join("mcmc_manifest.txt"),
        seed,
        cfg.mcmc.kappa,
        cfg.mcmc.n_iter,
        stats.count,
        &stats,
    )?;
    let std_fields: Vec<(String, Vec<f64>)> = (0..crate::uq::N_TRACKED)
        .map(|fld| {
            (
                format!("std_{}", crate::uq::TRACKED_NAMES[fld]),
                summary.iter().map(|row| row[fld]).collect(),
            )
        })
        .collect();
    let refs: Vec<(&str, &[f64])> = std_fields
        .iter()
        .map(|(n, v)| (n.as_str(), v.as_slice()))
        .collect();
    write_cell_data_vtk(&dir.join("mcmc_std.vtk"), &last.mesh, "ensemble std", &refs)?;
    weaker_vtk(&dir, "mean_fields.vtk", &cfg, &dd, &start)?;
    println!("artifacts in {}", dir.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_words(words: &[&str]) -> i32 {
        run(std::iter::once("ddheat".to_string()).chain(words.iter().map(|s| s.to_string())))
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_words(&[]), 1);
        assert_eq!(run_words(&["frobnicate", "x.toml"]), 1);
        // missing dataset path: named in the message, exit 1
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        std::fs::write(&cfg, "[dataset]\nsource = \"csv\"\n").unwrap();
        assert_eq!(run_words(&["solve", cfg.to_str().unwrap()]), 1);
    }

    #[test]
    fn gen_and_tweak_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("reg.csv");
        let cfg = dir.path().join("gen.toml");
        std::fs::write(
            &cfg,
            format!(
                "[dataset]\nkind = \"regular\"\na = 2.0\ncount_g = 5\nk = 1.0\nout = {:?}\n",
                out.to_str().unwrap()
            ),
        )
        .unwrap();
        assert_eq!(run_words(&["gen-dataset", "regular", cfg.to_str().unwrap()]), 0);
        let ds = read_dataset_csv(&out).unwrap();
        assert_eq!(ds.len(), 25);

        let out2 = dir.path().join("tweaked.csv");
        let cfg2 = dir.path().join("tweak.toml");
        std::fs::write(
            &cfg2,
            format!(
                "[dataset]\npath = {:?}\nout = {:?}\ndimension = \"gx\"\ninterval = [-2.0, -1.0]\n",
                out.to_str().unwrap(),
                out2.to_str().unwrap()
            ),
        )
        .unwrap();
        assert_eq!(run_words(&["tweak-dataset", "remove-range", cfg2.to_str().unwrap()]), 0);
        let ds2 = read_dataset_csv(&out2).unwrap();
        assert!(ds2.len() < 25);
    }

    #[test]
    fn solve_writes_artifacts_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let out_dir = dir.path().join("run");
        let cfg_path = dir.path().join("solve.toml");
        std::fs::write(
            &cfg_path,
            format!(
                "[mesh]\nkind = \"exphat\"\nn = 3\norder = 1\n\
                 [problem]\nformulation = \"dd_weaker\"\n\
                 [dataset]\nsource = \"oracle\"\noracle_k = 1.0\n\
                 [dd]\nseed = 7\ninit = \"random\"\n\
                 [output]\ndir = {:?}\n",
                out_dir.to_str().unwrap()
            ),
        )
        .unwrap();
        assert_eq!(run_words(&["solve", cfg_path.to_str().unwrap()]), 0);
        for name in ["fields.vtk", "indicators.csv", "eps_history.csv", "resolved-config.toml"] {
            assert!(out_dir.join(name).exists(), "{name} missing");
        }
        let first = std::fs::read(out_dir.join("eps_history.csv")).unwrap();
        let first_vtk = std::fs::read(out_dir.join("fields.vtk")).unwrap();
        assert_eq!(run_words(&["solve", cfg_path.to_str().unwrap()]), 0);
        assert_eq!(first, std::fs::read(out_dir.join("eps_history.csv")).unwrap());
        assert_eq!(first_vtk, std::fs::read(out_dir.join("fields.vtk")).unwrap());
    }
}
