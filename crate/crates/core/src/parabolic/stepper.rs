//! Implicit Euler / upwind finite volumes for the viscous problem.
//!
//! Every row is the mass balance of a control volume. Interior volumes have
//! width `h`; the volume at the inner node has width `h/2` and its node face
//! carries the Kedem–Katchalsky flux `Σ_j α_ij u_j(N)`. The resulting matrix has nonpositive off-diagonal
//! entries and column sums `w_k/dt > 0`, so it is a nonsingular M-matrix:
//! steps preserve nonnegativity and contract the weighted `L¹` norm.
//!
//! The solve eliminates each arc's interior chain with the Thomas algorithm
//! and leaves an `m × m` system for the node values.

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Lu, Tridiagonal};
use crate::network::{alpha_from_k, validate_assumptions, AssumptionReport, CouplingMatrix, StarNetwork};
use crate::piecewise::PiecewiseConstant;

use super::grid::{DiscreteState, Grid, SolverConfig};

/// One-sided node residual above which initial data counts as incompatible.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// `h > ε/2`: the outflow boundary layer is not resolved.
    UnstableConfig { h: f64, epsilon: f64 },
    /// Initial data violate the discrete node conditions by this much.
    CompatibilityResidual(f64),
    /// The outer value of an incoming arc was reset to its boundary value.
    BoundaryOverwritten { arc: usize, from: f64, to: f64 },
}

#[derive(Debug, Clone)]
struct ArcRows {
    incoming: bool,
    n: usize,
    h: f64,
    lambda: f64,
    /// Interior stencil: `lo·u_{k-1} + di·u_k + up·u_{k+1}`.
    lo: f64,
    di: f64,
    up: f64,
    /// Node row: `d0·u_node + cn·u_adjacent + Σ_{j≠i} α_ij u_j(N)`.
    d0: f64,
    cn: f64,
    chain: Tridiagonal,
    /// Interior response to a unit node value.
    b: Vec<f64>,
    /// `(1/θ) ∫ f` over each control volume, when relaxed.
    forcing: Option<Vec<f64>>,
}

impl ArcRows {
    fn node(&self) -> usize {
        if self.incoming {
            self.n
        } else {
            0
        }
    }

    fn adjacent(&self) -> usize {
        if self.incoming {
            self.n - 1
        } else {
            1
        }
    }

    fn outer(&self) -> usize {
        if self.incoming {
            0
        } else {
            self.n
        }
    }

    /// Chain position of grid node `k` (interior nodes only).
    fn local(k: usize) -> usize {
        k - 1
    }
}

#[derive(Debug, Clone)]
pub struct StepOperator {
    arcs: Vec<ArcRows>,
    alpha: DenseMatrix,
    schur: Lu,
    epsilon: f64,
    dt: f64,
    n_steps: usize,
    theta: Option<f64>,
    grid: Grid,
    assumptions: AssumptionReport,
    warnings: Vec<Warning>,
}

/// Assembles the implicit step for `cfg` on `grid`.
pub fn assemble_step_operator(net: &StarNetwork, k: &CouplingMatrix, cfg: &SolverConfig, grid: &Grid) -> Result<StepOperator> {
    assemble(net, k, cfg, grid, None)
}

/// Step operator for `u_t = εu_xx − λu_x + (f − u)/θ`, whose steady state
/// solves the resolvent equation `v − θ(εv'' − λv') = f`.
pub fn assemble_relaxed_operator(
    net: &StarNetwork,
    k: &CouplingMatrix,
    cfg: &SolverConfig,
    grid: &Grid,
    theta: f64,
    f: &[PiecewiseConstant],
) -> Result<StepOperator> {
    if !(theta > 0.0) {
        return Err(Error::InvalidConfig(format!("theta = {theta} must be positive")));
    }
    if f.len() != net.len() {
        return Err(Error::DimensionMismatch {
            context: "forcing arcs",
            expected: net.len(),
            found: f.len(),
        });
    }
    assemble(net, k, cfg, grid, Some((theta, f)))
}

fn assemble(
    net: &StarNetwork,
    k: &CouplingMatrix,
    cfg: &SolverConfig,
    grid: &Grid,
    relax: Option<(f64, &[PiecewiseConstant])>,
) -> Result<StepOperator> {
    cfg.validate()?;
    let assumptions = validate_assumptions(net, k)?;
    if !assumptions.holds_17 {
        return Err(Error::AssumptionViolated("K must be symmetric and nonnegative".into()));
    }
    if grid.n_arcs() != net.len() {
        return Err(Error::DimensionMismatch {
            context: "grid arcs",
            expected: net.len(),
            found: grid.n_arcs(),
        });
    }
    let eps = cfg.epsilon;
    let (n_steps, dt) = cfg.time_steps(grid, net);
    let alpha = alpha_from_k(k).matrix().clone();
    let mut warnings = Vec::new();
    if grid.max_h() > 0.5 * eps {
        warnings.push(Warning::UnstableConfig {
            h: grid.max_h(),
            epsilon: eps,
        });
    }
    let inv_theta = relax.map_or(0.0, |(t, _)| 1.0 / t);

    let mut arcs = Vec::with_capacity(net.len());
    for arc in net.arcs() {
        let (n, h, lam) = (grid.cells(arc.id), grid.h(arc.id), arc.speed);
        let d = eps / h;
        let lo = -(lam + d);
        let up = -d;
        let di = h / dt + lam + 2.0 * d + h * inv_theta;
        let half = 0.5 * h / dt + 0.5 * h * inv_theta;
        let aii = alpha[(arc.id, arc.id)];
        let (d0, cn) = if arc.is_incoming() {
            (half + d + aii, -(lam + d))
        } else {
            (half + lam + d + aii, -d)
        };
        let len = n - 1;
        let chain = Tridiagonal::factor(&vec![lo; len], &vec![di; len], &vec![up; len])?;
        let mut b = vec![0.0; len];
        if arc.is_incoming() {
            b[len - 1] = -up;
        } else {
            b[0] = -lo;
        }
        chain.solve_in_place(&mut b);
        let forcing = relax.map(|(_, f)| {
            let f = &f[arc.id];
            (0..=n)
                .map(|kk| {
                    let x = kk as f64 * h;
                    let a = (x - 0.5 * h).max(0.0);
                    let bnd = (x + 0.5 * h).min(arc.length);
                    inv_theta * f.integral_over(a, bnd)
                })
                .collect()
        });
        arcs.push(ArcRows {
            incoming: arc.is_incoming(),
            n,
            h,
            lambda: lam,
            lo,
            di,
            up,
            d0,
            cn,
            chain,
            b,
            forcing,
        });
    }

    let m = net.len();
    let schur_matrix = DenseMatrix::from_fn(m, m, |i, j| {
        if i == j {
            let a = &arcs[i];
            a.d0 + a.cn * a.b[ArcRows::local(a.adjacent())]
        } else {
            alpha[(i, j)]
        }
    });
    let schur = Lu::factor(&schur_matrix).map_err(|e| Error::LinearSolveFailure(format!("node system: {e}")))?;

    Ok(StepOperator {
        arcs,
        alpha,
        schur,
        epsilon: eps,
        dt,
        n_steps,
        theta: relax.map(|(t, _)| t),
        grid: grid.clone(),
        assumptions,
        warnings,
    })
}

/// Per-step record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub t: f64,
    pub l1_norm: f64,
    pub min_value: f64,
    pub flux_residual: f64,
    /// `‖(u^{n+1} − u^n)/dt‖₁`.
    pub ut_l1: f64,
}

impl StepOperator {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn assumptions(&self) -> AssumptionReport {
        self.assumptions
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    fn check_state(&self, state: &DiscreteState) -> Result<()> {
        if state.values.len() != self.arcs.len()
            || state.values.iter().zip(&self.arcs).any(|(v, a)| v.len() != a.n + 1)
        {
            return Err(Error::DimensionMismatch {
                context: "state vs step operator",
                expected: self.grid.total_nodes(),
                found: state.values.iter().map(Vec::len).sum(),
            });
        }
        Ok(())
    }

    /// One implicit step. Outer values are held fixed.
    pub fn step(&self, state: &DiscreteState) -> Result<DiscreteState> {
        self.check_state(state)?;
        let m = self.arcs.len();
        let mut chains = Vec::with_capacity(m);
        let mut g = vec![0.0; m];
        for (i, (a, u)) in self.arcs.iter().zip(&state.values).enumerate() {
            let mass = a.h / self.dt;
            let mut rhs: Vec<f64> = (1..a.n).map(|kk| mass * u[kk]).collect();
            if let Some(f) = &a.forcing {
                for (r, fk) in rhs.iter_mut().zip(&f[1..a.n]) {
                    *r += fk;
                }
            }
            let len = a.n - 1;
            if a.incoming {
                rhs[0] -= a.lo * u[0];
            } else {
                rhs[len - 1] -= a.up * u[a.n];
            }
            a.chain.solve_in_place(&mut rhs);
            let node = a.node();
            let mut gi = 0.5 * mass * u[node];
            if let Some(f) = &a.forcing {
                gi += f[node];
            }
            g[i] = gi - a.cn * rhs[ArcRows::local(a.adjacent())];
            chains.push(rhs);
        }
        let s = self
            .schur
            .solve(&g)
            .map_err(|e| Error::LinearSolveFailure(format!("node system: {e}")))?;
        let mut values = Vec::with_capacity(m);
        for ((a, u), (chain, si)) in self.arcs.iter().zip(&state.values).zip(chains.into_iter().zip(&s)) {
            let mut v = vec![0.0; a.n + 1];
            for kk in 1..a.n {
                let c = ArcRows::local(kk);
                v[kk] = chain[c] + a.b[c] * si;
            }
            v[a.node()] = *si;
            v[a.outer()] = u[a.outer()];
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::LinearSolveFailure("step produced non-finite values".into()));
            }
            values.push(v);
        }
        Ok(DiscreteState {
            t: state.t + self.dt,
            values,
        })
    }

    /// Discrete node fluxes of the step `prev → next`: for incoming arcs the
    /// flux leaving the arc into the node, for outgoing arcs the flux
    /// entering the arc from the node.
    pub fn node_fluxes(&self, prev: &DiscreteState, next: &DiscreteState) -> Vec<f64> {
        self.arcs
            .iter()
            .zip(prev.values.iter().zip(&next.values))
            .map(|(a, (u0, u1))| {
                let d = self.epsilon / a.h;
                let half = 0.5 * a.h / self.dt;
                if a.incoming {
                    let n = a.n;
                    a.lambda * u1[n - 1] + d * (u1[n - 1] - u1[n]) - half * (u1[n] - u0[n])
                } else {
                    a.lambda * u1[0] + d * (u1[0] - u1[1]) + half * (u1[0] - u0[0])
                }
            })
            .collect()
    }

    /// `|Σ_I F_i − Σ_O F_i|` for the step `prev → next`.
    pub fn flux_residual(&self, prev: &DiscreteState, next: &DiscreteState) -> f64 {
        let (mut inflow, mut outflow) = (0.0, 0.0);
        for (a, f) in self.arcs.iter().zip(self.node_fluxes(prev, next)) {
            if a.incoming {
                inflow += f;
            } else {
                outflow += f;
            }
        }
        (inflow - outflow).abs()
    }

    fn node_coupling(&self, i: usize, state: &DiscreteState) -> f64 {
        self.arcs
            .iter()
            .enumerate()
            .map(|(j, a)| self.alpha[(i, j)] * state.values[j][a.node()])
            .sum()
    }

    /// Largest defect of the one-sided node conditions
    /// `β_i(λ_i u_i(N) − ε u_i'(N)) = Σ_j α_ij u_j(N)`.
    pub fn compatibility_residual(&self, state: &DiscreteState) -> f64 {
        self.arcs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let u = &state.values[i];
                let d = self.epsilon / a.h;
                let lhs = if a.incoming {
                    a.lambda * u[a.n] - d * (u[a.n] - u[a.n - 1])
                } else {
                    -(a.lambda * u[0] - d * (u[1] - u[0]))
                };
                (lhs - self.node_coupling(i, state)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Spatial part `A u` of every non-Dirichlet row (zero on outer rows);
    /// the step is `(W/dt + A) u^{n+1} = W u^n / dt`.
    pub fn apply_spatial(&self, state: &DiscreteState) -> Vec<Vec<f64>> {
        self.arcs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let u = &state.values[i];
                let mass = a.h / self.dt;
                let diag_shift = mass;
                let mut r = vec![0.0; a.n + 1];
                for kk in 1..a.n {
                    r[kk] = a.lo * u[kk - 1] + (a.di - diag_shift) * u[kk] + a.up * u[kk + 1];
                }
                let node = a.node();
                r[node] = (a.d0 - 0.5 * mass) * u[node]
                    + a.cn * u[a.adjacent()]
                    + self.node_coupling(i, state)
                    - self.alpha[(i, i)] * u[node];
                r
            })
            .collect()
    }

    /// `Σ |A u|`: the weighted `L¹` norm of the discrete generator applied
    /// to `state`, which bounds every later `‖u_t‖₁`.
    pub fn generator_l1(&self, state: &DiscreteState) -> f64 {
        self.apply_spatial(state).iter().flatten().map(|x| x.abs()).sum()
    }

    /// Global offsets of each arc's first node in the dense layout.
    fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.arcs.len());
        let mut acc = 0;
        for a in &self.arcs {
            off.push(acc);
            acc += a.n + 1;
        }
        off
    }

    /// The full step matrix, arcs in id order and nodes `k = 0..=N_i`
    /// within each arc; outer rows are identities.
    pub fn to_dense(&self) -> DenseMatrix {
        let off = self.offsets();
        let total = self.grid.total_nodes();
        let mut mat = DenseMatrix::zeros(total, total);
        for (i, a) in self.arcs.iter().enumerate() {
            let o = off[i];
            let outer = o + a.outer();
            mat[(outer, outer)] = 1.0;
            for kk in 1..a.n {
                mat[(o + kk, o + kk - 1)] = a.lo;
                mat[(o + kk, o + kk)] = a.di;
                mat[(o + kk, o + kk + 1)] = a.up;
            }
            let row = o + a.node();
            mat[(row, row)] = a.d0;
            mat[(row, o + a.adjacent())] = a.cn;
            for (j, b) in self.arcs.iter().enumerate() {
                if j != i {
                    mat[(row, off[j] + b.node())] = self.alpha[(i, j)];
                }
            }
        }
        mat
    }

    /// Right-hand side matching [`to_dense`](Self::to_dense).
    pub fn dense_rhs(&self, state: &DiscreteState) -> Vec<f64> {
        let mut rhs = Vec::with_capacity(self.grid.total_nodes());
        for (a, u) in self.arcs.iter().zip(&state.values) {
            let mass = a.h / self.dt;
            for kk in 0..=a.n {
                let mut r = if kk == a.outer() {
                    u[kk]
                } else if kk == a.node() {
                    0.5 * mass * u[kk]
                } else {
                    mass * u[kk]
                };
                if kk != a.outer() {
                    if let Some(f) = &a.forcing {
                        r += f[kk];
                    }
                }
                rhs.push(r);
            }
        }
        rhs
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub final_state: DiscreteState,
    pub snapshots: Vec<DiscreteState>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Node-side value of every arc at `t = 0, dt, …, T`.
    pub node_times: Vec<f64>,
    pub node_values: Vec<Vec<f64>>,
    pub initial_l1: f64,
    pub initial_generator_l1: f64,
    pub warnings: Vec<Warning>,
    pub h: Vec<f64>,
    pub dt: f64,
}

impl Trajectory {
    pub fn max_flux_residual(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.flux_residual).fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.min_value)
            .fold(f64::INFINITY, f64::min)
    }
}

fn node_snapshot(op: &StepOperator, s: &DiscreteState) -> Vec<f64> {
    op.arcs.iter().zip(&s.values).map(|(a, v)| v[a.node()]).collect()
}

/// Sets the outer value of every incoming arc to its boundary value and
/// returns the warnings raised.
fn impose_boundary(net: &StarNetwork, state: &mut DiscreteState, b: &[f64]) -> Result<Vec<Warning>> {
    if b.len() != net.incoming().len() {
        return Err(Error::DimensionMismatch {
            context: "boundary values",
            expected: net.incoming().len(),
            found: b.len(),
        });
    }
    let mut warnings = Vec::new();
    for (&i, &bi) in net.incoming().iter().zip(b) {
        let from = state.values[i][0];
        if (from - bi).abs() > 1e-12 * (1.0 + bi.abs()) {
            warnings.push(Warning::BoundaryOverwritten { arc: i, from, to: bi });
        }
        state.values[i][0] = bi;
    }
    Ok(warnings)
}

/// Marches `u0` to `cfg.horizon`, recording per-step diagnostics.
pub fn solve_parabolic(
    net: &StarNetwork,
    k: &CouplingMatrix,
    grid: &Grid,
    u0: &DiscreteState,
    b: &[f64],
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    let op = assemble_step_operator(net, k, cfg, grid)?;
    run(&op, net, u0, b, cfg.snapshot_every)
}

/// Marches with an already assembled operator.
pub fn run(op: &StepOperator, net: &StarNetwork, u0: &DiscreteState, b: &[f64], snapshot_every: usize) -> Result<Trajectory> {
    op.check_state(u0)?;
    let mut state = u0.clone();
    let mut warnings = op.warnings.clone();
    warnings.extend(impose_boundary(net, &mut state, b)?);
    let compat = op.compatibility_residual(&state);
    if compat > COMPATIBILITY_TOLERANCE {
        warnings.push(Warning::CompatibilityResidual(compat));
    }
    let grid = &op.grid;
    let initial_l1 = state.l1_norm(grid);
    let initial_generator_l1 = op.generator_l1(&state);
    let mut diagnostics = Vec::with_capacity(op.n_steps);
    let mut snapshots = Vec::new();
    let mut node_times = vec![state.t];
    let mut node_values = vec![node_snapshot(op, &state)];
    if snapshot_every > 0 {
        snapshots.push(state.clone());
    }
    for n in 1..=op.n_steps {
        let mut next = op.step(&state)?;
        if n == op.n_steps {
            next.t = u0.t + op.n_steps as f64 * op.dt;
        }
        let ut_l1 = next.l1_distance(&state, grid) / op.dt;
        diagnostics.push(StepDiagnostics {
            t: next.t,
            l1_norm: next.l1_norm(grid),
            min_value: next.min_value(),
            flux_residual: op.flux_residual(&state, &next),
            ut_l1,
        });
        node_times.push(next.t);
        node_values.push(node_snapshot(op, &next));
        if snapshot_every > 0 && n % snapshot_every == 0 {
            snapshots.push(next.clone());
        }
        state = next;
    }
    Ok(Trajectory {
        final_state: state,
        snapshots,
        diagnostics,
        node_times,
        node_values,
        initial_l1,
        initial_generator_l1,
        warnings,
        h: (0..grid.n_arcs()).map(|i| grid.h(i)).collect(),
        dt: op.dt,
    })
}

/// Steps until `‖u_t‖₁ < tol` or `max_steps` is reached; returns the state
/// and the number of steps taken.
pub fn march_to_steady(op: &StepOperator, u0: &DiscreteState, tol: f64, max_steps: usize) -> Result<(DiscreteState, usize)> {
    let mut state = u0.clone();
    for n in 1..=max_steps {
        let next = op.step(&state)?;
        let ut = next.l1_distance(&state, &op.grid) / op.dt;
        state = next;
        if ut < tol {
            return Ok((state, n));
        }
    }
    Err(Error::NoConvergence(format!(
        "no steady state within {max_steps} steps"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Report {
    /// Largest step-to-step increase of `‖u‖₁` (negative if always decreasing).
    pub max_growth: f64,
    pub initial_ut_l1: f64,
    pub max_ut_l1: f64,
    /// `‖A u⁰‖₁`, the discrete analog of `‖εu0'' − λu0'‖₁`.
    pub generator_bound: f64,
}

impl L1Report {
    pub fn non_increasing(&self, tol: f64) -> bool {
        self.max_growth <= tol
    }

    pub fn ut_bounded(&self, factor: f64) -> bool {
        self.max_ut_l1 <= factor * self.generator_bound
    }
}

pub fn l1_probe(traj: &Trajectory) -> L1Report {
    let mut prev = traj.initial_l1;
    let mut max_growth = f64::NEG_INFINITY;
    for d in &traj.diagnostics {
        max_growth = max_growth.max(d.l1_norm - prev);
        prev = d.l1_norm;
    }
    L1Report {
        max_growth,
        initial_ut_l1: traj.diagnostics.first().map_or(0.0, |d| d.ut_l1),
        max_ut_l1: traj.diagnostics.iter().map(|d| d.ut_l1).fold(0.0, f64::max),
        generator_bound: traj.initial_generator_l1,
    }
}
