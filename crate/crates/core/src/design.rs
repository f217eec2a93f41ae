//! Coupling coefficients realizing prescribed transmission coefficients.
//!
//! Two families are covered: proportional splitting, where every incoming
//! flux is split among the outgoing arcs with the same fractions `γ_i`, and
//! networks with exactly two outgoing arcs `h1, h2` and arbitrary fractions
//! `γ_{h1 j}` per incoming arc.

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Lu};
use crate::network::{CouplingMatrix, StarNetwork};
use crate::transmission::compute_gamma;

/// Tolerance on `Σ γ_i = 1` for proportional targets.
pub const TARGET_SUM_TOLERANCE: f64 = 1e-12;
/// Below this coupling scale the two-outgoing search gives up.
pub const K_UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct ProportionalTarget {
    gamma: Vec<f64>,
}

impl ProportionalTarget {
    /// Fractions indexed by `StarNetwork::outgoing()`. Each must lie in
    /// `(0, 1)`; with a single outgoing arc the only admissible target is `[1]`.
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::InvalidTarget("no outgoing fractions given".into()));
        }
        let sum: f64 = gamma.iter().sum();
        if !((sum - 1.0).abs() <= TARGET_SUM_TOLERANCE) {
            return Err(Error::InvalidTarget(format!("fractions sum to {sum:.17e}, not 1")));
        }
        if gamma.len() > 1 {
            if let Some((i, g)) = gamma.iter().enumerate().find(|(_, &g)| !(g > 0.0 && g < 1.0)) {
                return Err(Error::InvalidTarget(format!("gamma[{i}] = {g} is outside (0, 1)")));
            }
        }
        Ok(Self { gamma })
    }

    pub fn values(&self) -> &[f64] {
        &self.gamma
    }

    /// Full `m_O × m_I` matrix with every column equal to the fractions.
    pub fn gamma_matrix(&self, m_in: usize) -> DenseMatrix {
        DenseMatrix::from_fn(self.gamma.len(), m_in, |i, _| self.gamma[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoOutTarget {
    gamma_h1: Vec<f64>,
}

impl TwoOutTarget {
    /// `γ_{h1 j}` indexed by `StarNetwork::incoming()`; `γ_{h2 j} = 1 − γ_{h1 j}`.
    pub fn new(gamma_h1: Vec<f64>) -> Result<Self> {
        if gamma_h1.is_empty() {
            return Err(Error::InvalidTarget("no incoming fractions given".into()));
        }
        if let Some((j, g)) = gamma_h1.iter().enumerate().find(|(_, &g)| !(g > 0.0 && g < 1.0)) {
            return Err(Error::InvalidTarget(format!("gamma_h1[{j}] = {g} is outside (0, 1)")));
        }
        Ok(Self { gamma_h1 })
    }

    pub fn values(&self) -> &[f64] {
        &self.gamma_h1
    }

    pub fn gamma_matrix(&self) -> DenseMatrix {
        let g = &self.gamma_h1;
        DenseMatrix::from_fn(2, g.len(), |i, j| if i == 0 { g[j] } else { 1.0 - g[j] })
    }
}

/// The `θ` used by the proportional design: half the feasible bound.
pub fn proportional_theta(net: &StarNetwork, target: &ProportionalTarget) -> f64 {
    let m_in = net.incoming().len() as f64;
    0.5 * net
        .outgoing()
        .iter()
        .zip(target.values())
        .map(|(&i, &g)| net.arc(i).speed / (m_in * g))
        .fold(f64::INFINITY, f64::min)
}

pub fn design_proportional(net: &StarNetwork, target: &ProportionalTarget) -> Result<CouplingMatrix> {
    let out = net.outgoing();
    if target.values().len() != out.len() {
        return Err(Error::DimensionMismatch {
            context: "proportional target vs outgoing arcs",
            expected: out.len(),
            found: target.values().len(),
        });
    }
    let m_in = net.incoming().len() as f64;
    let theta = proportional_theta(net, target);
    let mut pairs = Vec::with_capacity(out.len() * net.incoming().len());
    for (&o, &g) in out.iter().zip(target.values()) {
        let lam = net.arc(o).speed;
        let denom = lam - m_in * theta * g;
        if !(denom > 0.0) {
            return Err(Error::InfeasibleTheta(denom));
        }
        let k_o = lam * theta * g / denom;
        for &i in net.incoming() {
            pairs.push((i, o, k_o));
        }
    }
    CouplingMatrix::from_pairs(net.len(), &pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoOutDesign {
    pub coupling: CouplingMatrix,
    /// Coupling `K_{i h2}` shared by every incoming arc.
    pub k: f64,
    /// Solution of the reduced linear system, `X_i = K_{i h1} / (k + K_{i h1})`.
    pub x: Vec<f64>,
    pub halvings: u32,
}

fn two_out_arcs(net: &StarNetwork, target: &TwoOutTarget) -> Result<(usize, usize)> {
    if net.outgoing().len() != 2 {
        return Err(Error::InvalidTarget(format!(
            "two-outgoing design needs exactly two outgoing arcs, network has {}",
            net.outgoing().len()
        )));
    }
    if target.values().len() != net.incoming().len() {
        return Err(Error::DimensionMismatch {
            context: "two-outgoing target vs incoming arcs",
            expected: net.incoming().len(),
            found: target.values().len(),
        });
    }
    Ok((net.outgoing()[0], net.outgoing()[1]))
}

/// `A X = b` with `A_ij = k c_i + δ_ij λ1 λ2`, `c_i = λ1 − γ_i (λ1 + λ2)`, `b_i = γ_i λ1 λ2`.
fn reduced_system(l1: f64, l2: f64, gamma: &[f64], k: f64) -> (DenseMatrix, Vec<f64>) {
    let n = gamma.len();
    let c: Vec<f64> = gamma.iter().map(|g| l1 - g * (l1 + l2)).collect();
    let a = DenseMatrix::from_fn(n, n, |i, j| k * c[i] + if i == j { l1 * l2 } else { 0.0 });
    let b = gamma.iter().map(|g| g * l1 * l2).collect();
    (a, b)
}

/// Max residual of the reduced system at `(k, x)`.
pub fn reduced_system_residual(net: &StarNetwork, target: &TwoOutTarget, k: f64, x: &[f64]) -> Result<f64> {
    let (h1, h2) = two_out_arcs(net, target)?;
    let (a, b) = reduced_system(net.arc(h1).speed, net.arc(h2).speed, target.values(), k);
    let ax = a.mul_vec(x)?;
    Ok(ax.iter().zip(&b).map(|(l, r)| (l - r).abs()).fold(0.0, f64::max))
}

pub fn design_two_outgoing(net: &StarNetwork, target: &TwoOutTarget, k_init: f64) -> Result<TwoOutDesign> {
    if !(k_init > 0.0) || !k_init.is_finite() {
        return Err(Error::InvalidTarget(format!("k_init = {k_init} must be positive")));
    }
    let (h1, h2) = two_out_arcs(net, target)?;
    let (l1, l2) = (net.arc(h1).speed, net.arc(h2).speed);
    let mut k = k_init;
    let mut halvings = 0;
    while k >= K_UNDERFLOW {
        let (a, b) = reduced_system(l1, l2, target.values(), k);
        if let Ok(x) = Lu::factor(&a).and_then(|lu| lu.solve(&b)) {
            if x.iter().all(|&xi| xi > 0.0 && xi < 1.0) {
                let mut pairs = Vec::with_capacity(2 * x.len());
                for (&i, &xi) in net.incoming().iter().zip(&x) {
                    pairs.push((i, h1, k * xi / (1.0 - xi)));
                    pairs.push((i, h2, k));
                }
                return Ok(TwoOutDesign {
                    coupling: CouplingMatrix::from_pairs(net.len(), &pairs)?,
                    k,
                    x,
                    halvings,
                });
            }
        }
        k *= 0.5;
        halvings += 1;
    }
    Err(Error::NoConvergence(format!(
        "no k in [{K_UNDERFLOW:e}, {k_init}] gives 0 < X < 1"
    )))
}

/// `max |γ(K) − γ_target|` over all entries.
pub fn roundtrip_error(net: &StarNetwork, k: &CouplingMatrix, target_gamma: &DenseMatrix) -> Result<f64> {
    let ts = compute_gamma(net, k)?;
    let g = ts.gamma();
    if g.n_rows() != target_gamma.n_rows() || g.n_cols() != target_gamma.n_cols() {
        return Err(Error::DimensionMismatch {
            context: "target gamma shape",
            expected: g.n_rows() * g.n_cols(),
            found: target_gamma.n_rows() * target_gamma.n_cols(),
        });
    }
    let mut worst: f64 = 0.0;
    for i in 0..g.n_rows() {
        for j in 0..g.n_cols() {
            worst = worst.max((g[(i, j)] - target_gamma[(i, j)]).abs());
        }
    }
    Ok(worst)
}
