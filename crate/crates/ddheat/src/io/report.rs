//! CSV reports: indicators, iteration history, convergence tables, solver
//! statistics and ensemble summaries.

use crate::error::Result;
use crate::indicators::IndicatorReport;
use crate::mesh::Mesh;
use crate::solvers::SolveReport;
use crate::uq::{McmcStats, N_TRACKED, TRACKED_NAMES};
use std::io::{BufWriter, Write};
use std::path::Path;

pub fn write_indicator_csv(path: &Path, mesh: &Mesh, report: &IndicatorReport) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    let with_err = report.e_tot.is_some();
    write!(out, "cell,p,eta,nu,gamma,mu,d_ave,d_std,excluded")?;
    if with_err {
        write!(out, ",e_tot")?;
    }
    writeln!(out)?;
    for c in 0..mesh.n_cells() {
        write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            c,
            mesh.cell_order[c],
            report.eta[c],
            report.nu[c],
            report.gamma[c],
            report.mu[c],
            report.d_ave[c],
            report.d_std[c],
            report.excluded[c] as u8
        )?;
        if let Some(e) = &report.e_tot {
            write!(out, ",{}", e[c])?;
        }
        writeln!(out)?;
    }
    writeln!(
        out,
        "# global,mu_g={},mu_avg={},mu_avg_bounded={},d_rms={},eps_d={}",
        report.mu_global, report.mu_avg, report.mu_avg_bounded, report.d_rms, report.eps_d
    )?;
    out.flush()?;
    Ok(())
}

pub fn write_eps_history_csv(path: &Path, eps: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "iteration,eps_d")?;
    for (i, e) in eps.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, e)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_solve_report_csv(path: &Path, report: &SolveReport) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "iterations,final_eps,wall_time_s,query_count,factorization_reused")?;
    writeln!(
        out,
        "{},{},{},{},{}",
        report.iterations,
        report.final_eps,
        report.wall_time_s,
        report.query_count,
        report.factorization_reused as u8
    )?;
    out.flush()?;
    Ok(())
}

/// One row of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub h: f64,
    pub p: u8,
    pub err_t: f64,
    pub err_q: f64,
}

pub fn write_convergence_csv(
    path: &Path,
    rows: &[ConvergenceRow],
    slope_t: f64,
    slope_q: f64,
) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "h,p,err_t_l2,err_q_l2")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.h, r.p, r.err_t, r.err_q)?;
    }
    writeln!(out, "# slopes,T={slope_t},q={slope_q}")?;
    out.flush()?;
    Ok(())
}

/// Per-round summary of an adaptive run.
pub fn write_adapt_summary_csv(
    path: &Path,
    rows: &[(usize, usize, usize, f64, f64, usize, usize)],
) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "round,cells,free_dofs,mu_global,eps_d,p_marks,h_marks")?;
    for (round, cells, dofs, mu_g, eps, pm, hm) in rows {
        writeln!(out, "{round},{cells},{dofs},{mu_g},{eps},{pm},{hm}")?;
    }
    out.flush()?;
    Ok(())
}

/// Per-element ensemble summary: mean pointwise std of each tracked field.
pub fn write_mcmc_summary_csv(
    path: &Path,
    summary: &[[f64; N_TRACKED]],
) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    write!(out, "cell")?;
    for name in TRACKED_NAMES {
        write!(out, ",std_{name}")?;
    }
    writeln!(out)?;
    for (c, row) in summary.iter().enumerate() {
        write!(out, "{c}")?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Reproducibility manifest of an ensemble run.
pub fn write_mcmc_manifest(
    path: &Path,
    seed: u64,
    kappa: f64,
    n_iter: usize,
    completed: usize,
    stats: &McmcStats,
) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "seed: {seed}")?;
    writeln!(out, "kappa: {kappa}")?;
    writeln!(out, "n_iter: {n_iter}")?;
    writeln!(out, "completed: {completed}")?;
    writeln!(out, "evaluation_points: {}", stats.positions.len())?;
    writeln!(out, "aborted: {}", stats.aborted)?;
    out.flush()?;
    Ok(())
}
