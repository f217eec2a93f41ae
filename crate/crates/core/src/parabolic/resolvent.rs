//! Closed-form solution of the resolvent problem
//!
//! ```text
//! v_i − θ(ε v_i'' − λ_i v_i') = f_i   on (0, L_i)
//! v_i(outer) = b_i,   β_i(λ_i v_i(N) − ε v_i'(N)) = Σ_j α_ij v_j(N)
//! ```
//!
//! for piecewise-constant `f`. On each arc `v = A e^{a1 x} + C e^{a2 (x−L)} + p`
//! with `a1 < 0 < a2` the roots of `a² − (λ/ε) a − 1/(θε) = 0`; both
//! exponentials are bounded by one on the arc. The particular solution `p`
//! uses the decaying Green's kernel in both directions, integrated exactly
//! per constant piece.

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Lu, PIVOT_TOLERANCE};
use crate::network::{alpha_from_k, CouplingMatrix, StarNetwork};
use crate::piecewise::PiecewiseConstant;

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventProblem {
    pub theta: f64,
    /// Right-hand side per arc id.
    pub f: Vec<PiecewiseConstant>,
    /// Outer value per arc id: `v(0)` on incoming arcs, `v(L)` on outgoing arcs.
    pub boundary: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArcResolvent {
    pub length: f64,
    pub speed: f64,
    pub a1: f64,
    pub a2: f64,
    pub coef_a: f64,
    pub coef_c: f64,
    g: PiecewiseConstant,
    theta: f64,
    epsilon: f64,
    f: PiecewiseConstant,
}

/// `(P1, P2)` with `P1 = ∫_0^x e^{a1(x−y)} g dy`, `P2 = ∫_x^L e^{a2(x−y)} g dy`.
fn kernel_integrals(g: &PiecewiseConstant, a1: f64, a2: f64, x: f64) -> (f64, f64) {
    let (mut p1, mut p2) = (0.0, 0.0);
    for (y0, y1, c) in g.pieces() {
        if c == 0.0 {
            continue;
        }
        if y1 <= x {
            p1 += c * (a1 * (x - y1)).exp() * (a1 * (y1 - y0)).exp_m1() / a1;
        } else if y0 >= x {
            p2 += c * (a2 * (x - y0)).exp() * -(-a2 * (y1 - y0)).exp_m1() / a2;
        } else {
            p1 += c * (a1 * (x - y0)).exp_m1() / a1;
            p2 += c * -(a2 * (x - y1)).exp_m1() / a2;
        }
    }
    (p1, p2)
}

impl ArcResolvent {
    /// `(p, p', p'')` at `x`.
    pub fn particular(&self, x: f64) -> (f64, f64, f64) {
        let (a1, a2) = (self.a1, self.a2);
        let (p1, p2) = kernel_integrals(&self.g, a1, a2, x);
        let s = a2 - a1;
        (
            -(p1 + p2) / s,
            -(a1 * p1 + a2 * p2) / s,
            self.g.eval(x) - (a1 * a1 * p1 + a2 * a2 * p2) / s,
        )
    }

    fn homogeneous(&self, x: f64) -> (f64, f64, f64) {
        let e1 = self.coef_a * (self.a1 * x).exp();
        let e2 = self.coef_c * (self.a2 * (x - self.length)).exp();
        (
            e1 + e2,
            self.a1 * e1 + self.a2 * e2,
            self.a1 * self.a1 * e1 + self.a2 * self.a2 * e2,
        )
    }

    /// `(v, v', v'')` at `x`.
    pub fn eval_all(&self, x: f64) -> (f64, f64, f64) {
        let (h0, h1, h2) = self.homogeneous(x);
        let (p0, p1, p2) = self.particular(x);
        (h0 + p0, h1 + p1, h2 + p2)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_all(x).0
    }

    /// `|v − θ(εv'' − λv') − f|` at `x` and the magnitude of the largest term.
    pub fn residual(&self, x: f64) -> (f64, f64) {
        let (v, d1, d2) = self.eval_all(x);
        let diff = self.theta * self.epsilon * d2;
        let adv = self.theta * self.speed * d1;
        let f = self.f.eval(x);
        let scale = v.abs().max(diff.abs()).max(adv.abs()).max(f.abs());
        ((v - diff + adv - f).abs(), scale)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventSolution {
    pub arcs: Vec<ArcResolvent>,
    /// Reduced node system; column-scaled and sign-adjusted relative to the
    /// classical `H`, so its diagonal dominance is by columns.
    pub h_matrix: DenseMatrix,
    pub node_values: Vec<f64>,
}

impl ResolventSolution {
    pub fn eval(&self, arc: usize, x: f64) -> f64 {
        self.arcs[arc].eval(x)
    }

    /// Smallest `(diag − Σ_{i≠j} |H_ij|) / diag` over columns; positive means
    /// strict column dominance.
    pub fn column_dominance_margin(&self) -> f64 {
        let h = &self.h_matrix;
        let n = h.n_rows();
        (0..n)
            .map(|j| {
                let off: f64 = (0..n).filter(|&i| i != j).map(|i| h[(i, j)].abs()).sum();
                (h[(j, j)] - off) / h[(j, j)].abs()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Max of `residual / scale` over `samples` interior points per piece of
    /// the right-hand side.
    pub fn max_relative_residual(&self, samples: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for a in &self.arcs {
            for (l, r, _) in a.f.pieces() {
                for s in 0..samples {
                    let x = l + (r - l) * (s as f64 + 0.5) / samples as f64;
                    let (res, scale) = a.residual(x);
                    worst = worst.max(res / scale.max(f64::MIN_POSITIVE));
                }
            }
        }
        worst
    }

    /// Largest defect of the node conditions.
    pub fn node_defect(&self, net: &StarNetwork, k: &CouplingMatrix) -> f64 {
        let alpha = alpha_from_k(k);
        let m = net.len();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            let arc = net.arc(i);
            let a = &self.arcs[i];
            let xn = if arc.is_incoming() { arc.length } else { 0.0 };
            let (v, d1, _) = a.eval_all(xn);
            let lhs = arc.orientation.beta() * (arc.speed * v - a.epsilon * d1);
            let rhs: f64 = (0..m).map(|j| alpha.get(i, j) * self.node_values[j]).sum();
            worst = worst.max((lhs - rhs).abs());
        }
        worst
    }
}

pub fn solve_resolvent(
    net: &StarNetwork,
    k: &CouplingMatrix,
    epsilon: f64,
    prob: &ResolventProblem,
) -> Result<ResolventSolution> {
    let m = net.len();
    if !(prob.theta > 0.0) || !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "theta = {} and epsilon = {epsilon} must be positive",
            prob.theta
        )));
    }
    if prob.f.len() != m || prob.boundary.len() != m {
        return Err(Error::DimensionMismatch {
            context: "resolvent data arcs",
            expected: m,
            found: prob.f.len().min(prob.boundary.len()),
        });
    }
    if k.dim() != m {
        return Err(Error::DimensionMismatch {
            context: "coupling matrix vs network",
            expected: m,
            found: k.dim(),
        });
    }
    let alpha = alpha_from_k(k);
    let theta = prob.theta;

    struct Partial {
        arc: ArcResolvent,
        v0: f64,
        d0: f64,
        g: f64,
        gp: f64,
    }
    let mut parts = Vec::with_capacity(m);
    for arc in net.arcs() {
        let (lam, len) = (arc.speed, arc.length);
        let f = &prob.f[arc.id];
        if (f.length() - len).abs() > 1e-12 * len {
            return Err(Error::InvalidField(format!(
                "right-hand side on arc {} has length {}, arc has {len}",
                arc.id,
                f.length()
            )));
        }
        let r = lam / epsilon;
        let a2 = 0.5 * (r + (r * r + 4.0 / (theta * epsilon)).sqrt());
        let a1 = -1.0 / (theta * epsilon * a2);
        let g = PiecewiseConstant::combine(&[f], |v| -v[0] / (theta * epsilon))?;
        let ar = ArcResolvent {
            length: len,
            speed: lam,
            a1,
            a2,
            coef_a: 0.0,
            coef_c: 0.0,
            g,
            theta,
            epsilon,
            f: f.clone(),
        };
        let tau1 = (a1 * len).exp();
        let tau2 = (-a2 * len).exp();
        let b = prob.boundary[arc.id];
        let (p0, dp0, _) = ar.particular(0.0);
        let (pl, dpl, _) = ar.particular(len);
        let gg = 1.0 - tau1 * tau2;
        let (v0, d0, gp) = if arc.is_incoming() {
            ((b - p0) * tau1 + pl, a1 * (b - p0) * tau1 + dpl, a2 - a1 * tau1 * tau2)
        } else {
            ((b - pl) * tau2 + p0, a2 * (b - pl) * tau2 + dp0, a1 - a2 * tau1 * tau2)
        };
        parts.push(Partial {
            arc: ar,
            v0,
            d0,
            g: gg,
            gp,
        });
    }

    let h = DenseMatrix::from_fn(m, m, |i, j| {
        let pj = &parts[j];
        if i == j {
            let beta = net.arc(i).orientation.beta();
            -beta * (pj.arc.speed * pj.g - epsilon * pj.gp) + alpha.get(i, i) * pj.g
        } else {
            alpha.get(i, j) * pj.g
        }
    });
    let rhs: Vec<f64> = (0..m)
        .map(|i| {
            let p = &parts[i];
            let beta = net.arc(i).orientation.beta();
            beta * (p.arc.speed * p.v0 - epsilon * p.d0) - (0..m).map(|j| alpha.get(i, j) * parts[j].v0).sum::<f64>()
        })
        .collect();
    let scale = h.max_abs_diagonal();
    let c = Lu::factor_with_threshold(&h, PIVOT_TOLERANCE * scale)?.solve(&rhs)?;

    let mut arcs = Vec::with_capacity(m);
    let mut node_values = Vec::with_capacity(m);
    for (arc, (mut p, ci)) in net.arcs().iter().zip(parts.into_iter().zip(c)) {
        let b = prob.boundary[arc.id];
        let len = arc.length;
        let tau1 = (p.arc.a1 * len).exp();
        let tau2 = (-p.arc.a2 * len).exp();
        if arc.is_incoming() {
            let (p0, _, _) = p.arc.particular(0.0);
            p.arc.coef_c = ci;
            p.arc.coef_a = b - p0 - ci * tau2;
        } else {
            let (pl, _, _) = p.arc.particular(len);
            p.arc.coef_a = ci;
            p.arc.coef_c = b - pl - ci * tau1;
        }
        node_values.push(p.v0 + ci * p.g);
        arcs.push(p.arc);
    }
    Ok(ResolventSolution {
        arcs,
        h_matrix: h,
        node_values,
    })
}
