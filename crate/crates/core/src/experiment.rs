//! Experiment drivers behind the command-line tool.
//!
//! Every driver returns CSV text; floats are written as `{:.16e}` so a
//! value survives a write/read cycle bit for bit.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::thread;
use std::time::Instant;

use serde::Serialize;

use crate::config::ResolvedExperiment;
use crate::data_prep::build_compatible;
use crate::design::{design_proportional, design_two_outgoing, roundtrip_error, ProportionalTarget, TwoOutTarget};
use crate::error::{Error, Result};
use crate::hyperbolic::{l1_distance, node_trace_l1, node_trace_l1_on, solve_exact};
use crate::network::{CouplingMatrix, StarNetwork};
use crate::parabolic::{solve_parabolic, Grid, HRule, SolverConfig};
use crate::piecewise::PiecewiseConstant;
use crate::transmission::compute_gamma;

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Builds CSV text from a header and string records.
pub fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn float_row(values: &[f64]) -> Vec<String> {
    values.iter().map(|&v| fmt_float(v)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub h: f64,
    pub dt: f64,
    pub l1_error_final_time: f64,
    pub node_trace_l1_error: f64,
    /// Same, outgoing arcs only; incoming node values carry a layer.
    pub outgoing_trace_l1_error: f64,
    pub flux_residual_max: f64,
    pub min_value: f64,
    pub wall_time: f64,
    pub status: RowStatus,
}

impl ConvergenceRow {
    fn failed(epsilon: f64, reason: String, wall_time: f64) -> Self {
        Self {
            epsilon,
            h: f64::NAN,
            dt: f64::NAN,
            l1_error_final_time: f64::NAN,
            node_trace_l1_error: f64::NAN,
            outgoing_trace_l1_error: f64::NAN,
            flux_residual_max: f64::NAN,
            min_value: f64::NAN,
            wall_time,
            status: RowStatus::Failed(reason),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// Sorted by `ε` descending.
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> Result<String> {
        csv_text(
            &[
                "epsilon",
                "h",
                "dt",
                "l1_error_final_time",
                "node_trace_l1_error",
                "flux_residual_max",
                "min_value",
                "outgoing_trace_l1_error",
                "status",
            ],
            self.rows.iter().map(|r| {
                let mut rec = float_row(&[
                    r.epsilon,
                    r.h,
                    r.dt,
                    r.l1_error_final_time,
                    r.node_trace_l1_error,
                    r.flux_residual_max,
                    r.min_value,
                    r.outgoing_trace_l1_error,
                ]);
                rec.push(match &r.status {
                    RowStatus::Ok => "ok".to_string(),
                    RowStatus::Failed(why) => format!("failed: {why}"),
                });
                rec
            }),
        )
    }

    /// Wall times live apart from the numbers so those stay reproducible.
    pub fn timing_csv(&self) -> Result<String> {
        csv_text(
            &["epsilon", "wall_time"],
            self.rows.iter().map(|r| float_row(&[r.epsilon, r.wall_time])),
        )
    }
}

/// Inputs shared by every row of a sweep.
#[derive(Debug, Clone)]
pub struct SweepInputs {
    pub net: StarNetwork,
    pub k: CouplingMatrix,
    pub u0: Vec<PiecewiseConstant>,
    pub b: Vec<f64>,
    pub theta: f64,
    pub horizon: f64,
    pub h_ratio: f64,
    pub dt: Option<f64>,
}

impl SweepInputs {
    pub fn from_resolved(exp: &ResolvedExperiment) -> Result<Self> {
        let (net, k) = exp.network.build()?;
        let (u0, b) = exp.data.build(&net)?;
        Ok(Self {
            net,
            k,
            u0,
            b,
            theta: exp.theta,
            horizon: exp.horizon,
            h_ratio: exp.h_ratio,
            dt: exp.dt,
        })
    }
}

/// One row: compatible data, viscous run, exact limit, and the errors.
pub fn convergence_row(inp: &SweepInputs, epsilon: f64) -> Result<ConvergenceRow> {
    let start = Instant::now();
    let mut cfg = SolverConfig::new(epsilon, inp.horizon).with_h_rule(HRule::Ratio(inp.h_ratio));
    if let Some(dt) = inp.dt {
        cfg = cfg.with_dt(dt);
    }
    let grid = Grid::for_config(&inp.net, &cfg)?;
    let data = build_compatible(&inp.net, &inp.k, &inp.u0, &inp.b, epsilon, inp.theta)?;
    let traj = solve_parabolic(&inp.net, &inp.k, &grid, &data.sample(&grid)?, &inp.b, &cfg)?;
    let ts = compute_gamma(&inp.net, &inp.k)?;
    let sol = solve_exact(&inp.net, ts.gamma(), &inp.u0, &inp.b, inp.horizon)?;
    let exact = sol.field_at(inp.horizon)?;
    Ok(ConvergenceRow {
        epsilon,
        h: grid.max_h(),
        dt: traj.dt,
        l1_error_final_time: l1_distance(&exact, &traj.final_state.values)?,
        node_trace_l1_error: node_trace_l1(&sol, &traj.node_times, &traj.node_values)?,
        outgoing_trace_l1_error: node_trace_l1_on(&sol, &traj.node_times, &traj.node_values, inp.net.outgoing())?,
        flux_residual_max: traj.max_flux_residual(),
        min_value: traj.min_value(),
        wall_time: start.elapsed().as_secs_f64(),
        status: RowStatus::Ok,
    })
}

fn isolated_row(inp: &SweepInputs, epsilon: f64) -> ConvergenceRow {
    let start = Instant::now();
    match catch_unwind(AssertUnwindSafe(|| convergence_row(inp, epsilon))) {
        Ok(Ok(row)) => row,
        Ok(Err(e)) => ConvergenceRow::failed(epsilon, e.to_string(), start.elapsed().as_secs_f64()),
        Err(p) => {
            let why = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "worker panicked".into());
            ConvergenceRow::failed(epsilon, format!("panic: {why}"), start.elapsed().as_secs_f64())
        }
    }
}

pub fn default_workers() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs every `ε` on a pool of at most `workers` threads. Worker `w` takes
/// rows `w, w + W, …` and sends finished rows back over a channel.
pub fn run_convergence(inp: &SweepInputs, epsilons: &[f64], workers: usize) -> ConvergenceReport {
    let workers = workers.clamp(1, epsilons.len().max(1));
    let (tx, rx) = mpsc::channel::<(usize, ConvergenceRow)>();
    thread::scope(|s| {
        for w in 0..workers {
            let tx = tx.clone();
            s.spawn(move || {
                for idx in (w..epsilons.len()).step_by(workers) {
                    if tx.send((idx, isolated_row(inp, epsilons[idx]))).is_err() {
                        return;
                    }
                }
            });
        }
    });
    drop(tx);
    let mut rows: Vec<(usize, ConvergenceRow)> = rx.into_iter().collect();
    rows.sort_by_key(|(i, _)| *i);
    let mut rows: Vec<ConvergenceRow> = rows.into_iter().map(|(_, r)| r).collect();
    rows.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    ConvergenceReport { rows }
}

/// `γ` as CSV (rows outgoing, columns incoming) and a certificate line.
pub fn run_gamma(net: &StarNetwork, k: &CouplingMatrix) -> Result<(String, String)> {
    let ts = compute_gamma(net, k)?;
    let header: Vec<String> = std::iter::once("outgoing".to_string())
        .chain(net.incoming().iter().map(|j| format!("in_{j}")))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let g = ts.gamma();
    let csv = csv_text(
        &header,
        net.outgoing().iter().enumerate().map(|(r, &i)| {
            let mut rec = vec![format!("out_{i}")];
            rec.extend((0..net.incoming().len()).map(|c| fmt_float(g[(r, c)])));
            rec
        }),
    )?;
    let c = ts.certificates();
    let max_dev = ts.column_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    let summary = format!(
        "certificates: irreducible={} gershgorin={} m_matrix={} det_q={} max_column_sum_deviation={} condition_indicator={}",
        c.irreducible,
        c.gershgorin_ok,
        c.m_matrix_ok,
        fmt_float(ts.det_q()),
        fmt_float(max_dev),
        fmt_float(ts.condition_indicator())
    );
    Ok((csv, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignMode {
    Proportional,
    TwoOut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOutput {
    pub coupling: CouplingMatrix,
    pub roundtrip_error: f64,
    pub csv: String,
}

pub fn run_design(net: &StarNetwork, gamma: &[f64], mode: DesignMode) -> Result<DesignOutput> {
    let (coupling, target) = match mode {
        DesignMode::Proportional => {
            let t = ProportionalTarget::new(gamma.to_vec())?;
            (design_proportional(net, &t)?, t.gamma_matrix(net.incoming().len()))
        }
        DesignMode::TwoOut => {
            let t = TwoOutTarget::new(gamma.to_vec())?;
            (design_two_outgoing(net, &t, 1.0)?.coupling, t.gamma_matrix())
        }
    };
    let err = roundtrip_error(net, &coupling, &target)?;
    let header: Vec<String> = (0..net.len()).map(|j| format!("k_{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let csv = csv_text(&header, coupling.to_rows().iter().map(|r| float_row(r)))?;
    Ok(DesignOutput {
        coupling,
        roundtrip_error: err,
        csv,
    })
}

/// Norms of the lifted data for `ε_n = 2^{-n}`, `n ∈ [n_lo, n_hi]`.
pub fn run_approx(
    net: &StarNetwork,
    k: &CouplingMatrix,
    u0: &[PiecewiseConstant],
    b: &[f64],
    n_range: (u32, u32),
    theta: f64,
) -> Result<String> {
    if n_range.0 > n_range.1 || n_range.1 > 60 {
        return Err(Error::InvalidConfig(format!("bad n range {}:{}", n_range.0, n_range.1)));
    }
    let rows = (n_range.0..=n_range.1)
        .map(|n| {
            let eps = 0.5f64.powi(n as i32);
            let r = build_compatible(net, k, u0, b, eps, theta)?.report(net, k, u0);
            let mut rec = vec![n.to_string()];
            rec.extend(float_row(&[
                eps,
                r.l1_error,
                r.derivative_l1,
                r.scaled_w21,
                r.membership_residual,
            ]));
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    csv_text(
        &["n", "epsilon_n", "l1_error", "tv_norm", "scaled_w21", "membership_residual"],
        rows,
    )
}

/// Samples of the exact limit at `nx + 1` points per arc and `nt + 1` times.
pub fn simulate_hyperbolic(
    net: &StarNetwork,
    k: &CouplingMatrix,
    u0: &[PiecewiseConstant],
    b: &[f64],
    horizon: f64,
    nx: usize,
    nt: usize,
) -> Result<String> {
    if nx == 0 || nt == 0 {
        return Err(Error::InvalidConfig("sample counts must be positive".into()));
    }
    let ts = compute_gamma(net, k)?;
    let sol = solve_exact(net, ts.gamma(), u0, b, horizon)?;
    let mut rows = Vec::with_capacity(net.len() * (nx + 1) * (nt + 1));
    for j in 0..=nt {
        let t = horizon * j as f64 / nt as f64;
        for a in net.arcs() {
            for q in 0..=nx {
                let x = a.length * q as f64 / nx as f64;
                let mut rec = vec![a.id.to_string()];
                rec.extend(float_row(&[x, t, sol.value(a.id, x, t)]));
                rows.push(rec);
            }
        }
    }
    csv_text(&["arc_id", "x", "t", "u"], rows)
}

/// Viscous run from lifted data: snapshot CSV and per-step diagnostics CSV.
#[allow(clippy::too_many_arguments)]
pub fn simulate_parabolic(
    net: &StarNetwork,
    k: &CouplingMatrix,
    u0: &[PiecewiseConstant],
    b: &[f64],
    epsilon: f64,
    horizon: f64,
    theta: f64,
    snapshots: usize,
) -> Result<(String, String)> {
    let cfg = SolverConfig::new(epsilon, horizon);
    let grid = Grid::for_config(net, &cfg)?;
    let (n_steps, _) = cfg.time_steps(&grid, net);
    let cfg = cfg.with_snapshots((n_steps / snapshots.max(1)).max(1));
    let data = build_compatible(net, k, u0, b, epsilon, theta)?;
    let traj = solve_parabolic(net, k, &grid, &data.sample(&grid)?, b, &cfg)?;
    let mut rows = Vec::new();
    for s in &traj.snapshots {
        for (i, v) in s.values.iter().enumerate() {
            for (q, u) in v.iter().enumerate() {
                let mut rec = vec![i.to_string()];
                rec.extend(float_row(&[grid.x(i, q), s.t, *u]));
                rows.push(rec);
            }
        }
    }
    let fields = csv_text(&["arc_id", "x", "t", "u"], rows)?;
    let diag = csv_text(
        &["t", "l1_norm", "min_value", "flux_residual"],
        traj.diagnostics
            .iter()
            .map(|d| float_row(&[d.t, d.l1_norm, d.min_value, d.flux_residual])),
    )?;
    Ok((fields, diag))
}
