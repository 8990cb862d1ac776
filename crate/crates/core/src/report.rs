//! CSV and text output. Every table is long-format, one value per row, and
//! floats are written with their shortest round-trip representation so that
//! identical results give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::model::ModelSpec;
use crate::oracle::{EquivalenceReport, GapRow, SaddleReport};
use crate::sim::{self, TrajectoryRecord};
use crate::synthesis::{RiccatiSolution, StrategyGains};

/// γ as it appears in file names.
pub fn gamma_label(gamma: f64) -> String {
    format!("{gamma}")
}

fn num(x: &f64) -> String {
    (x + 0.0).to_string()
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn series_name(base: &str, k: usize, dim: usize) -> String {
    if dim == 1 {
        base.to_string()
    } else {
        format!("{base}_{k}")
    }
}

fn write_vec(
    w: &mut csv::Writer<std::fs::File>,
    run: usize,
    t: usize,
    base: &str,
    agent: &str,
    v: &DVector<f64>,
) -> Result<()> {
    for (k, x) in v.iter().enumerate() {
        w.write_record([
            run.to_string(),
            t.to_string(),
            series_name(base, k, v.len()),
            agent.to_string(),
            num(x),
        ])?;
    }
    Ok(())
}

/// `run,t,series,agent,value`. Series: `x0`, `xbar`, `mhat`, `u0`, `ubar`,
/// `d0`, `dbar`, `xi` (retained runs only) and `cost_stage`. Vector-valued
/// series get a `_k` component suffix.
pub fn write_trajectories(path: &Path, model: &ModelSpec, records: &[TrajectoryRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["run", "t", "series", "agent", "value"])?;
    for rec in records {
        let costs = sim::stage_costs(model, rec).ok();
        for (k, x0) in rec.x0.iter().enumerate() {
            let t = k + 1;
            write_vec(&mut w, rec.run, t, "x0", "0", x0)?;
            write_vec(&mut w, rec.run, t, "xbar", "", &rec.x_bar[k])?;
            if k < rec.u0.len() {
                write_vec(&mut w, rec.run, t, "mhat", "", &rec.m_hat[k])?;
                write_vec(&mut w, rec.run, t, "u0", "0", &rec.u0[k])?;
                write_vec(&mut w, rec.run, t, "ubar", "", &rec.u_bar[k])?;
                write_vec(&mut w, rec.run, t, "d0", "0", &rec.d0[k])?;
                write_vec(&mut w, rec.run, t, "dbar", "", &rec.d_bar[k])?;
            }
            if let Some(tr) = &rec.followers {
                for (i, xi) in tr.x[k].iter().enumerate() {
                    write_vec(&mut w, rec.run, t, "xi", &(i + 1).to_string(), xi)?;
                }
            }
            if let Some(c) = costs.as_ref().and_then(|c| c.get(k)) {
                w.write_record([rec.run.to_string(), t.to_string(), "cost_stage".into(), String::new(), num(c)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_matrix_rows(
    w: &mut csv::Writer<std::fs::File>,
    t: usize,
    name: &str,
    m: &DMatrix<f64>,
) -> Result<()> {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            w.write_record([t.to_string(), name.to_string(), r.to_string(), c.to_string(), num(&m[(r, c)])])?;
        }
    }
    Ok(())
}

/// `t,matrix,row,col,value` for `M̆`, `M̄`, the noise constants, the margins
/// and, when given, the gains.
pub fn write_riccati(path: &Path, ric: &RiccatiSolution, gains: Option<&StrategyGains>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "matrix", "row", "col", "value"])?;
    for (k, (mb, ma)) in ric.m_brev.iter().zip(&ric.m_bar).enumerate() {
        let t = k + 1;
        write_matrix_rows(&mut w, t, "M_brev", mb)?;
        write_matrix_rows(&mut w, t, "M_bar", ma)?;
        write_matrix_rows(&mut w, t, "c_brev", &DMatrix::from_element(1, 1, ric.c_brev[k]))?;
        write_matrix_rows(&mut w, t, "c_bar", &DMatrix::from_element(1, 1, ric.c_bar[k]))?;
        if k < ric.horizon() {
            write_matrix_rows(&mut w, t, "margin_brev", &DMatrix::from_element(1, 1, ric.margin_brev[k]))?;
            write_matrix_rows(&mut w, t, "margin_bar", &DMatrix::from_element(1, 1, ric.margin_bar[k]))?;
        }
        if let Some(g) = gains.filter(|g| k < g.horizon()) {
            write_matrix_rows(&mut w, t, "L_brev", &g.l_brev[k])?;
            write_matrix_rows(&mut w, t, "L_bar", &g.l_bar[k])?;
            write_matrix_rows(&mut w, t, "K_brev", &g.k_brev[k])?;
            write_matrix_rows(&mut w, t, "K_bar", &g.k_bar[k])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per γ in a summary table.
#[derive(Debug, Clone, Default)]
pub struct SummaryRow {
    pub gamma: f64,
    pub feasible: bool,
    pub min_margin: f64,
    pub first_violation: Option<usize>,
    pub optimal_value: Option<f64>,
    pub runs: usize,
    pub failed_runs: usize,
    pub cost_mean: Option<f64>,
    pub cost_stderr: Option<f64>,
    pub final_leader: Option<f64>,
    pub final_mean_field: Option<f64>,
    pub detrended_rms: Option<f64>,
    pub time_to_band: Option<f64>,
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "gamma",
        "feasible",
        "min_margin",
        "first_violation",
        "optimal_value",
        "runs",
        "failed_runs",
        "cost_mean",
        "cost_stderr",
        "final_leader",
        "final_mean_field",
        "detrended_rms",
        "time_to_band",
    ])?;
    for r in rows {
        w.write_record([
            r.gamma.to_string(),
            r.feasible.to_string(),
            r.min_margin.to_string(),
            opt(r.first_violation),
            opt(r.optimal_value),
            r.runs.to_string(),
            r.failed_runs.to_string(),
            opt(r.cost_mean),
            opt(r.cost_stderr),
            opt(r.final_leader),
            opt(r.final_mean_field),
            opt(r.detrended_rms),
            opt(r.time_to_band),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_text(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    for r in rows {
        if r.feasible {
            let _ = writeln!(
                s,
                "gamma {}: feasible, min margin {:.6e}, value {}, MC cost {} ± {} ({} runs)",
                r.gamma,
                r.min_margin,
                opt(r.optimal_value),
                opt(r.cost_mean),
                opt(r.cost_stderr),
                r.runs
            );
        } else {
            let _ = writeln!(
                s,
                "gamma {}: INFEASIBLE at t={} (margin {:.6e})",
                r.gamma,
                opt(r.first_violation),
                r.min_margin
            );
        }
    }
    s
}

pub fn write_saddle_report(path: &Path, rep: &SaddleReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["side", "direction", "step", "delta", "expected_sign", "ok"])?;
    for p in &rep.perturbations {
        let sign = match p.side {
            crate::oracle::Side::Control => ">=0",
            crate::oracle::Side::Disturbance => "<=0",
        };
        w.write_record([
            p.side.name().to_string(),
            p.direction.to_string(),
            p.step.to_string(),
            p.delta.to_string(),
            sign.to_string(),
            p.ok(rep.tolerance).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn saddle_text(rep: &SaddleReport, eq: &EquivalenceReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "n = {}, gamma = {}", rep.n, rep.gamma);
    let _ = writeln!(
        s,
        "feasible: synthesis {}, oracle {}",
        rep.synthesis_feasible, rep.oracle_feasible
    );
    let _ = writeln!(s, "oracle value      {}", rep.oracle_value);
    let _ = writeln!(s, "decomposed value  {}", rep.decomposed_value);
    let _ = writeln!(s, "rollout cost      {}", rep.rollout_cost);
    let _ = writeln!(s, "value gap         {:e}", rep.value_gap);
    let _ = writeln!(s, "max gain gap      {:e}", rep.max_gain_discrepancy);
    let _ = writeln!(s, "trajectory gap    {:e} (relative)", eq.trajectory_rel_gap);
    let _ = writeln!(
        s,
        "min control delta {:e} ({})",
        rep.min_control_delta(),
        if rep.control_ok() { "ok" } else { "VIOLATED" }
    );
    let _ = writeln!(
        s,
        "max disturbance delta {:e} ({})",
        rep.max_disturbance_delta(),
        if rep.disturbance_ok() { "ok" } else { "VIOLATED" }
    );
    s
}

pub fn write_gap_table(path: &Path, rows: &[GapRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n", "mfs_cost", "imfs_cost", "gap", "stderr", "gap_times_n"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.mfs_cost.to_string(),
            r.imfs_cost.to_string(),
            r.gap.to_string(),
            r.stderr.to_string(),
            r.gap_times_n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
