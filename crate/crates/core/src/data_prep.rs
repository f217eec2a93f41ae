//! Lifting BV data into the domain of the viscous generator.
//!
//! Given piecewise-constant data `v` and boundary values `B`, builds smooth
//! `v_n` that satisfy the outer conditions `v_n(0) = B_i` on incoming arcs
//! and the viscous node condition exactly, while `v_n → v` in `L¹`.
//!
//! Each arc is a chain of cubic pieces:
//!
//! * jumps become smoothstep transitions `3t² − 2t³` of width `ε_n`;
//! * a Hermite cubic on the node zone of width `δ_n = ε_n^θ` fixes the
//!   slope demanded by the node condition;
//! * on incoming arcs a quadratic on `[0, ε_n]` starts from `B_i`.
//!
//! All norms are computed from the coefficients.

use crate::error::{Error, Result};
use crate::network::{alpha_from_k, AlphaMatrix, CouplingMatrix, StarNetwork};
use crate::parabolic::{DiscreteState, Grid};
use crate::piecewise::PiecewiseConstant;
use crate::poly::Cubic;

pub const DEFAULT_THETA: f64 = 1.5;
/// Value and slope mismatch allowed at piece junctions.
pub const JUNCTION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PieceKind {
    Flat,
    Transition,
    NodeCubic,
    BoundaryQuadratic,
}

/// A cubic on `[start, end]` written in `τ = x − start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub poly: Cubic,
    pub kind: PieceKind,
}

impl Piece {
    fn width(&self) -> f64 {
        self.end - self.start
    }

    fn clip(&self, a: f64, b: f64) -> Option<Piece> {
        let (lo, hi) = (self.start.max(a), self.end.min(b));
        if !(hi > lo) {
            return None;
        }
        Some(Piece {
            start: lo,
            end: hi,
            poly: self.poly.shifted(lo - self.start),
            kind: self.kind,
        })
    }
}

impl Cubic {
    /// `τ ↦ p(τ + s)`.
    pub fn shifted(&self, s: f64) -> Cubic {
        if s == 0.0 {
            return *self;
        }
        let d1 = self.derivative();
        let d2 = d1.derivative();
        Cubic::new(self.eval(s), d1.eval(s), 0.5 * d2.eval(s), self.c[3])
    }
}

/// Smooth function on one arc, as consecutive pieces covering `[0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcPieces {
    length: f64,
    pieces: Vec<Piece>,
}

impl ArcPieces {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    fn locate(&self, x: f64) -> &Piece {
        let k = self.pieces.partition_point(|p| p.end < x);
        &self.pieces[k.min(self.pieces.len() - 1)]
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = self.locate(x);
        p.poly.eval(x - p.start)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let p = self.locate(x);
        p.poly.derivative().eval(x - p.start)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let p = self.locate(x);
        p.poly.derivative().derivative().eval(x - p.start)
    }

    fn norm_of(&self, order: usize, keep: impl Fn(&Piece) -> bool) -> f64 {
        self.pieces
            .iter()
            .filter(|p| keep(p))
            .map(|p| {
                let mut q = p.poly;
                for _ in 0..order {
                    q = q.derivative();
                }
                q.abs_integral(0.0, p.width())
            })
            .sum()
    }

    pub fn l1(&self) -> f64 {
        self.norm_of(0, |_| true)
    }

    pub fn derivative_l1(&self) -> f64 {
        self.norm_of(1, |_| true)
    }

    pub fn second_derivative_l1(&self) -> f64 {
        self.norm_of(2, |_| true)
    }

    pub fn w21(&self) -> f64 {
        self.l1() + self.derivative_l1() + self.second_derivative_l1()
    }

    /// `(‖·‖₁, ‖·′‖₁, ‖·″‖₁)` restricted to pieces of one kind.
    pub fn norms_of_kind(&self, kind: PieceKind) -> [f64; 3] {
        [0, 1, 2].map(|o| self.norm_of(o, |p| p.kind == kind))
    }

    /// Exact `∫|self − v|`.
    pub fn l1_distance(&self, v: &PiecewiseConstant) -> f64 {
        let mut total = 0.0;
        for p in &self.pieces {
            for (a, b, c) in v.pieces() {
                let (lo, hi) = (a.max(p.start), b.min(p.end));
                if hi > lo {
                    total += p.poly.add_constant(-c).abs_integral(lo - p.start, hi - p.start);
                }
            }
        }
        total
    }

    /// Largest value and slope jumps between consecutive pieces.
    pub fn junction_mismatch(&self) -> (f64, f64) {
        self.pieces.windows(2).fold((0.0, 0.0), |(dv, dd), w| {
            let (l, r) = (&w[0], &w[1]);
            let lv = l.poly.eval(l.width());
            let ld = l.poly.derivative().eval(l.width());
            let rv = r.poly.c[0];
            let rd = r.poly.c[1];
            (f64::max(dv, (lv - rv).abs()), f64::max(dd, (ld - rd).abs()))
        })
    }

    /// Replaces everything on `[piece.start, piece.end]` by `piece`.
    fn splice(&mut self, piece: Piece) {
        let mut out: Vec<Piece> = Vec::with_capacity(self.pieces.len() + 2);
        out.extend(self.pieces.iter().filter_map(|p| p.clip(0.0, piece.start)));
        out.push(piece);
        out.extend(self.pieces.iter().filter_map(|p| p.clip(piece.end, self.length)));
        self.pieces = out;
    }
}

/// Replaces every jump of `v` by a smoothstep transition of width up to
/// `epsilon`, kept inside `[lo, hi]` and disjoint from its neighbours.
pub fn smooth_bv(v: &PiecewiseConstant, epsilon: f64, lo: f64, hi: f64, arc: usize) -> Result<ArcPieces> {
    let length = v.length();
    let jumps = v.jumps();
    let mut widths = Vec::with_capacity(jumps.len());
    for (k, &(b, _)) in jumps.iter().enumerate() {
        let mut a = epsilon.min(2.0 * (b - lo)).min(2.0 * (hi - b));
        if k > 0 {
            a = a.min(b - jumps[k - 1].0);
        }
        if k + 1 < jumps.len() {
            a = a.min(jumps[k + 1].0 - b);
        }
        if !(a > 0.0) {
            return Err(Error::WidthOverflow {
                arc,
                reason: format!("jump at {b} leaves no room for a transition inside [{lo}, {hi}]"),
            });
        }
        widths.push(a);
    }
    let mut pieces = Vec::with_capacity(2 * jumps.len() + 1);
    let mut left = 0.0;
    let values = v.values();
    for (k, (&(b, jump), &a)) in jumps.iter().zip(&widths).enumerate() {
        let (s, e) = (b - 0.5 * a, b + 0.5 * a);
        if s > left {
            pieces.push(Piece {
                start: left,
                end: s,
                poly: Cubic::constant(values[k]),
                kind: PieceKind::Flat,
            });
        }
        pieces.push(Piece {
            start: s,
            end: e,
            poly: Cubic::new(values[k], 0.0, 3.0 * jump / (a * a), -2.0 * jump / (a * a * a)),
            kind: PieceKind::Transition,
        });
        left = e;
    }
    if length > left {
        pieces.push(Piece {
            start: left,
            end: length,
            poly: Cubic::constant(*values.last().expect("nonempty")),
            kind: PieceKind::Flat,
        });
    }
    Ok(ArcPieces { length, pieces })
}

/// Interval `[lo, hi]` left free for transitions on an arc.
pub fn transition_zone(net: &StarNetwork, arc: usize, epsilon: f64, theta: f64) -> Result<(f64, f64)> {
    let a = net.arc(arc);
    let delta = epsilon.powf(theta);
    let (lo, hi) = if a.is_incoming() {
        (epsilon, a.length - delta)
    } else {
        (delta, a.length)
    };
    if !(hi > lo) {
        return Err(Error::WidthOverflow {
            arc,
            reason: format!("arc of length {} cannot hold the boundary and node zones", a.length),
        });
    }
    Ok((lo, hi))
}

/// Value of `w` at the inner node.
fn node_value(net: &StarNetwork, w: &ArcPieces, arc: usize) -> f64 {
    if net.arc(arc).is_incoming() {
        w.eval(w.length())
    } else {
        w.eval(0.0)
    }
}

/// Hermite cubic on the node zone of `arc`. It matches `w` at the inner
/// joint and takes the slope `ε p′(0) = Σ α_ij w_j(N) + λ_i w_i(0)` on
/// outgoing arcs, `ε p′(L) = −Σ α_ij w_j(N) + λ_i w_i(L)` on incoming ones.
pub fn fit_node_polynomial(
    net: &StarNetwork,
    alpha: &AlphaMatrix,
    cores: &[ArcPieces],
    arc: usize,
    epsilon: f64,
    theta: f64,
) -> Result<Piece> {
    if !(theta > 1.0) || !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "node polynomial needs theta > 1 and epsilon > 0, got {theta} and {epsilon}"
        )));
    }
    let a = net.arc(arc);
    let delta = epsilon.powf(theta);
    if !(delta < a.length) {
        return Err(Error::WidthOverflow {
            arc,
            reason: format!("node zone {delta} exceeds the arc length {}", a.length),
        });
    }
    let coupling: f64 = (0..net.len()).map(|j| alpha.get(arc, j) * node_value(net, &cores[j], j)).sum();
    let w = &cores[arc];
    let wn = node_value(net, w, arc);
    let poly = if a.is_incoming() {
        let x = a.length - delta;
        let slope = (a.speed * wn - coupling) / epsilon;
        Cubic::hermite(delta, w.eval(x), w.derivative(x), wn, slope)
    } else {
        let slope = (coupling + a.speed * wn) / epsilon;
        Cubic::hermite(delta, wn, slope, w.eval(delta), w.derivative(delta))
    };
    let start = if a.is_incoming() { a.length - delta } else { 0.0 };
    Ok(Piece {
        start,
        end: start + delta,
        poly,
        kind: PieceKind::NodeCubic,
    })
}

/// `r(x) = μx² + νx + ρ` on `[0, ε]` with `r(0) = B`, `r(ε) = w(ε)`,
/// `r′(ε) = w′(ε)`.
pub fn fit_boundary_quadratic(w: &ArcPieces, boundary: f64, epsilon: f64) -> Piece {
    let (we, dwe) = (w.eval(epsilon), w.derivative(epsilon));
    let mu = (boundary + dwe * epsilon - we) / (epsilon * epsilon);
    let nu = (2.0 * we - 2.0 * boundary - dwe * epsilon) / epsilon;
    Piece {
        start: 0.0,
        end: epsilon,
        poly: Cubic::new(boundary, nu, mu, 0.0),
        kind: PieceKind::BoundaryQuadratic,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibleData {
    pub epsilon: f64,
    pub theta: f64,
    pub delta: f64,
    pub arcs: Vec<ArcPieces>,
    /// `B_i` by incoming position.
    pub boundary: Vec<f64>,
}

/// Summary norms for one `ε_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxReport {
    pub epsilon: f64,
    pub delta: f64,
    pub l1_error: f64,
    pub derivative_l1: f64,
    pub total_variation: f64,
    /// `‖v_n′‖₁ − TV(v)`, summed over arcs.
    pub bv_excess: f64,
    pub scaled_w21: f64,
    pub membership_residual: f64,
    pub boundary_residual: f64,
    pub junction_value: f64,
    pub junction_slope: f64,
    /// `Σ ‖p_n‖_{W^{1,1}}` over the node cubics.
    pub node_w11: f64,
    pub boundary_l1: f64,
    pub boundary_derivative_l1: f64,
}

pub fn build_compatible(
    net: &StarNetwork,
    k: &CouplingMatrix,
    v: &[PiecewiseConstant],
    b: &[f64],
    epsilon: f64,
    theta: f64,
) -> Result<CompatibleData> {
    if v.len() != net.len() {
        return Err(Error::DimensionMismatch {
            context: "data fields per arc",
            expected: net.len(),
            found: v.len(),
        });
    }
    if b.len() != net.incoming().len() {
        return Err(Error::DimensionMismatch {
            context: "boundary values per incoming arc",
            expected: net.incoming().len(),
            found: b.len(),
        });
    }
    if k.dim() != net.len() {
        return Err(Error::DimensionMismatch {
            context: "coupling matrix",
            expected: net.len(),
            found: k.dim(),
        });
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) || !(theta > 1.0 && theta.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "need epsilon > 0 and theta > 1, got {epsilon} and {theta}"
        )));
    }
    for (i, (f, a)) in v.iter().zip(net.arcs()).enumerate() {
        if (f.length() - a.length).abs() > 1e-12 * a.length {
            return Err(Error::InvalidField(format!(
                "data on arc {i} has length {}, arc has {}",
                f.length(),
                a.length
            )));
        }
    }
    let alpha = alpha_from_k(k);
    let mut arcs = Vec::with_capacity(net.len());
    for (i, f) in v.iter().enumerate() {
        let (lo, hi) = transition_zone(net, i, epsilon, theta)?;
        arcs.push(smooth_bv(f, epsilon, lo, hi, i)?);
    }
    let nodes: Vec<Piece> = (0..net.len())
        .map(|i| fit_node_polynomial(net, &alpha, &arcs, i, epsilon, theta))
        .collect::<Result<_>>()?;
    for (i, p) in nodes.into_iter().enumerate() {
        if let Some(pos) = net.incoming_position(i) {
            let r = fit_boundary_quadratic(&arcs[i], b[pos], epsilon);
            arcs[i].splice(r);
        }
        arcs[i].splice(p);
    }
    Ok(CompatibleData {
        epsilon,
        theta,
        delta: epsilon.powf(theta),
        arcs,
        boundary: b.to_vec(),
    })
}

impl CompatibleData {
    pub fn eval(&self, arc: usize, x: f64) -> f64 {
        self.arcs[arc].eval(x)
    }

    /// Largest `|β_i(−λ_i v_i + ε v_i′) − Σ_j K_ij (v_j − v_i)|` at the node.
    pub fn membership_residual(&self, net: &StarNetwork, k: &CouplingMatrix) -> f64 {
        let at_node = |i: usize| {
            let a = net.arc(i);
            let x = if a.is_incoming() { a.length } else { 0.0 };
            (self.arcs[i].eval(x), self.arcs[i].derivative(x))
        };
        (0..net.len())
            .map(|i| {
                let a = net.arc(i);
                let (vi, di) = at_node(i);
                let flux = a.orientation.beta() * (-a.speed * vi + self.epsilon * di);
                let exchange: f64 = (0..net.len()).map(|j| k.get(i, j) * (at_node(j).0 - vi)).sum();
                (flux - exchange).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn boundary_residual(&self, net: &StarNetwork) -> f64 {
        net.incoming()
            .iter()
            .zip(&self.boundary)
            .map(|(&i, &b)| (self.arcs[i].eval(0.0) - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn report(&self, net: &StarNetwork, k: &CouplingMatrix, v: &[PiecewiseConstant]) -> ApproxReport {
        let sum = |f: &dyn Fn(&ArcPieces) -> f64| self.arcs.iter().map(f).sum::<f64>();
        let derivative_l1 = sum(&|a| a.derivative_l1());
        let total_variation: f64 = v.iter().map(|f| f.total_variation()).sum();
        let (junction_value, junction_slope) = self
            .arcs
            .iter()
            .map(|a| a.junction_mismatch())
            .fold((0.0, 0.0), |(x, y), (a, b)| (f64::max(x, a), f64::max(y, b)));
        let node = |o: usize| sum(&|a| a.norms_of_kind(PieceKind::NodeCubic)[o]);
        let bq = |o: usize| sum(&|a| a.norms_of_kind(PieceKind::BoundaryQuadratic)[o]);
        ApproxReport {
            epsilon: self.epsilon,
            delta: self.delta,
            l1_error: self.arcs.iter().zip(v).map(|(a, f)| a.l1_distance(f)).sum(),
            derivative_l1,
            total_variation,
            bv_excess: derivative_l1 - total_variation,
            scaled_w21: self.epsilon * sum(&|a| a.w21()),
            membership_residual: self.membership_residual(net, k),
            boundary_residual: self.boundary_residual(net),
            junction_value,
            junction_slope,
            node_w11: node(0) + node(1),
            boundary_l1: bq(0),
            boundary_derivative_l1: bq(1),
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<DiscreteState> {
        DiscreteState::sample(grid, |i, x| self.eval(i, x))
    }
}
