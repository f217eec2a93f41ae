//! Exact solution of the limit transport problem by characteristics.
//!
//! On every arc `u_t + λ_i u_x = 0`. Incoming arcs carry the constant inflow
//! value `B_i` at `x = 0`; outgoing arcs receive at `x = 0` the value
//! `(1/λ_i) Σ_j γ_ij λ_j u_j(L_j, t)`. With piecewise-constant initial data
//! every quantity stays piecewise constant, so the solution is represented
//! exactly.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::network::StarNetwork;
use crate::piecewise::PiecewiseConstant;

/// Column-sum tolerance accepted for user-supplied `γ`.
pub const GAMMA_SUM_TOLERANCE: f64 = 1e-8;

/// `λ_i u_i(L_i, t)` on `[0, T]` for an incoming arc.
pub fn incoming_trace(length: f64, speed: f64, u0: &PiecewiseConstant, b: f64, horizon: f64) -> Result<PiecewiseConstant> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidConfig(format!("horizon {horizon} must be positive")));
    }
    let pieces: Vec<(f64, f64, f64)> = u0.pieces().collect();
    let mut segments = Vec::with_capacity(pieces.len() + 1);
    // Initial data leaves through x = L from right to left.
    for &(a, _, v) in pieces.iter().rev() {
        segments.push(((length - a) / speed, speed * v));
    }
    segments.push((f64::INFINITY, speed * b));
    PiecewiseConstant::from_segments(horizon, &segments)
}

fn check_gamma(net: &StarNetwork, gamma: &DenseMatrix) -> Result<()> {
    let (m_out, m_in) = (net.outgoing().len(), net.incoming().len());
    if gamma.n_rows() != m_out || gamma.n_cols() != m_in {
        return Err(Error::InvalidGamma(format!(
            "expected a {m_out}x{m_in} matrix, got {}x{}",
            gamma.n_rows(),
            gamma.n_cols()
        )));
    }
    for j in 0..m_in {
        let mut s = 0.0;
        for i in 0..m_out {
            let g = gamma[(i, j)];
            if !(g >= 0.0) || !g.is_finite() {
                return Err(Error::InvalidGamma(format!("gamma[{i}][{j}] = {g} is negative")));
            }
            s += g;
        }
        if !((s - 1.0).abs() <= GAMMA_SUM_TOLERANCE) {
            return Err(Error::InvalidGamma(format!("column {j} sums to {s}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicSolution {
    net: StarNetwork,
    gamma: DenseMatrix,
    u0: Vec<PiecewiseConstant>,
    /// Indexed by arc id; only meaningful on incoming arcs.
    boundary: Vec<f64>,
    horizon: f64,
    /// Node-side trace of every arc on `[0, T]`: `u_i(L_i, t)` for incoming,
    /// `u_i(0, t)` for outgoing.
    node_traces: Vec<PiecewiseConstant>,
    /// Incoming fluxes `λ_j u_j(L_j, t)`, by incoming position.
    fluxes: Vec<PiecewiseConstant>,
}

/// Validates `γ` and builds the exact solution up to time `horizon`.
///
/// `u0` is indexed by arc id, `b` by position in `StarNetwork::incoming()`.
pub fn solve_exact(
    net: &StarNetwork,
    gamma: &DenseMatrix,
    u0: &[PiecewiseConstant],
    b: &[f64],
    horizon: f64,
) -> Result<HyperbolicSolution> {
    check_gamma(net, gamma)?;
    solve_unchecked(net, gamma, u0, b, horizon)
}

/// Same as [`solve_exact`] without the `γ` checks; for probing defects.
pub fn solve_unchecked(
    net: &StarNetwork,
    gamma: &DenseMatrix,
    u0: &[PiecewiseConstant],
    b: &[f64],
    horizon: f64,
) -> Result<HyperbolicSolution> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidConfig(format!("horizon {horizon} must be positive")));
    }
    if u0.len() != net.len() {
        return Err(Error::DimensionMismatch {
            context: "initial data arcs",
            expected: net.len(),
            found: u0.len(),
        });
    }
    if b.len() != net.incoming().len() {
        return Err(Error::DimensionMismatch {
            context: "boundary values",
            expected: net.incoming().len(),
            found: b.len(),
        });
    }
    for (arc, f) in net.arcs().iter().zip(u0) {
        if (f.length() - arc.length).abs() > 1e-12 * arc.length {
            return Err(Error::InvalidField(format!(
                "data on arc {} has length {}, arc has {}",
                arc.id,
                f.length(),
                arc.length
            )));
        }
    }
    let mut boundary = vec![0.0; net.len()];
    let mut fluxes = Vec::with_capacity(b.len());
    for (&i, &bi) in net.incoming().iter().zip(b) {
        boundary[i] = bi;
        let a = net.arc(i);
        fluxes.push(incoming_trace(a.length, a.speed, &u0[i], bi, horizon)?);
    }
    let mut node_traces: Vec<Option<PiecewiseConstant>> = vec![None; net.len()];
    for (&i, g) in net.incoming().iter().zip(&fluxes) {
        let lam = net.arc(i).speed;
        node_traces[i] = Some(PiecewiseConstant::combine(&[g], |v| v[0] / lam)?);
    }
    let refs: Vec<&PiecewiseConstant> = fluxes.iter().collect();
    for (row, &i) in net.outgoing().iter().enumerate() {
        let lam = net.arc(i).speed;
        let w = PiecewiseConstant::combine(&refs, |v| {
            v.iter().enumerate().map(|(j, g)| gamma[(row, j)] * g).sum::<f64>() / lam
        })?;
        node_traces[i] = Some(w);
    }
    Ok(HyperbolicSolution {
        net: net.clone(),
        gamma: gamma.clone(),
        u0: u0.to_vec(),
        boundary,
        horizon,
        node_traces: node_traces.into_iter().map(|t| t.expect("every arc traced")).collect(),
        fluxes,
    })
}

impl HyperbolicSolution {
    pub fn network(&self) -> &StarNetwork {
        &self.net
    }

    pub fn gamma(&self) -> &DenseMatrix {
        &self.gamma
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial_data(&self) -> &[PiecewiseConstant] {
        &self.u0
    }

    /// Node-side trace of arc `id` as a function of time.
    pub fn node_trace(&self, id: usize) -> &PiecewiseConstant {
        &self.node_traces[id]
    }

    /// `λ_j u_j(L_j, t)` for incoming position `j`.
    pub fn incoming_flux(&self, j: usize) -> &PiecewiseConstant {
        &self.fluxes[j]
    }

    /// Point value `u_i(x, t)`.
    pub fn value(&self, id: usize, x: f64, t: f64) -> f64 {
        let arc = self.net.arc(id);
        let front = arc.speed * t;
        if x > front {
            self.u0[id].eval(x - front)
        } else if arc.is_incoming() {
            self.boundary[id]
        } else {
            self.node_traces[id].eval(t - x / arc.speed)
        }
    }

    /// Exact field on arc `id` at time `t ∈ [0, T]`.
    pub fn arc_field_at(&self, id: usize, t: f64) -> Result<PiecewiseConstant> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::InvalidConfig(format!(
                "time {t} outside [0, {}]",
                self.horizon
            )));
        }
        let arc = self.net.arc(id);
        let front = arc.speed * t;
        let mut segments = Vec::new();
        if front > 0.0 {
            if arc.is_incoming() {
                segments.push((front, self.boundary[id]));
            } else {
                // x ∈ (0, λt) carries the node value emitted at s = t − x/λ.
                let trace = &self.node_traces[id];
                let pieces: Vec<(f64, f64, f64)> = trace.pieces().filter(|p| p.0 < t).collect();
                for &(a, _, v) in pieces.iter().rev() {
                    segments.push((arc.speed * (t - a), v));
                }
            }
        }
        for (_, b, v) in self.u0[id].pieces() {
            segments.push((b + front, v));
        }
        PiecewiseConstant::from_segments(arc.length, &segments)
    }

    pub fn field_at(&self, t: f64) -> Result<Vec<PiecewiseConstant>> {
        (0..self.net.len()).map(|i| self.arc_field_at(i, t)).collect()
    }

    /// `max_t |Σ_I λ u(L, t) − Σ_O λ u(0, t)|` over the given samples.
    pub fn check_flux_conservation(&self, times: &[f64]) -> f64 {
        times
            .iter()
            .map(|&t| {
                let inflow: f64 = self.fluxes.iter().map(|g| g.eval(t)).sum();
                let outflow: f64 = self
                    .net
                    .outgoing()
                    .iter()
                    .map(|&i| self.net.arc(i).speed * self.node_traces[i].eval(t))
                    .sum();
                (inflow - outflow).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Composite-midpoint `Σ_i ∫ |a_i − b_i| dx`, where `b_i` holds values at the
/// uniform nodes `x_k = k L_i / N_i`, `k = 0..=N_i`. On each cell the discrete
/// state is represented by the average of its two end values.
pub fn l1_distance(a: &[PiecewiseConstant], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "arc count in L1 distance",
            expected: a.len(),
            found: b.len(),
        });
    }
    let mut total = 0.0;
    for (f, u) in a.iter().zip(b) {
        if u.len() < 2 {
            return Err(Error::DimensionMismatch {
                context: "grid values per arc",
                expected: 2,
                found: u.len(),
            });
        }
        let n = u.len() - 1;
        let h = f.length() / n as f64;
        let mut s = 0.0;
        for k in 0..n {
            let mid = (k as f64 + 0.5) * h;
            s += (f.eval(mid) - 0.5 * (u[k] + u[k + 1])).abs();
        }
        total += h * s;
    }
    Ok(total)
}

/// Exact `Σ_i ∫ |a_i − b_i| dx` between two piecewise-constant fields.
pub fn l1_distance_exact(a: &[PiecewiseConstant], b: &[PiecewiseConstant]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "arc count in L1 distance",
            expected: a.len(),
            found: b.len(),
        });
    }
    a.iter().zip(b).map(|(f, g)| f.l1_distance(g)).sum()
}

/// Space-time node-trace error `Σ_i ∫_0^T |u^h_i(N,t) − u_i(N,t)| dt`,
/// midpoint in time. `times[n]` and `values[n]` are the sample times and the
/// per-arc node values, `n = 0..=steps`.
pub fn node_trace_l1(sol: &HyperbolicSolution, times: &[f64], values: &[Vec<f64>]) -> Result<f64> {
    let all: Vec<usize> = (0..sol.net.len()).collect();
    node_trace_l1_on(sol, times, values, &all)
}

/// [`node_trace_l1`] restricted to the listed arcs.
pub fn node_trace_l1_on(sol: &HyperbolicSolution, times: &[f64], values: &[Vec<f64>], arcs: &[usize]) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            context: "node trace samples",
            expected: times.len(),
            found: values.len(),
        });
    }
    let m = sol.net.len();
    let mut total = 0.0;
    for n in 1..times.len() {
        let (t0, t1) = (times[n - 1], times[n]);
        let mid = 0.5 * (t0 + t1);
        if values[n].len() != m || values[n - 1].len() != m {
            return Err(Error::DimensionMismatch {
                context: "node trace arcs",
                expected: m,
                found: values[n].len(),
            });
        }
        for &i in arcs {
            let discrete = 0.5 * (values[n - 1][i] + values[n][i]);
            total += (t1 - t0) * (discrete - sol.node_traces[i].eval(mid)).abs();
        }
    }
    Ok(total)
}
