//! Node coefficient matrix `Q`, its certification and inversion, and the
//! hyperbolic transmission coefficients `γ_ij = λ_i z_ij`.
//!
//! Internally the unknowns are ordered with all incoming arcs first and then
//! all outgoing arcs, each side in user order. `γ` is reported as an
//! `m_O × m_I` matrix whose rows follow `StarNetwork::outgoing()` and whose
//! columns follow `StarNetwork::incoming()`.

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Lu, PIVOT_TOLERANCE};
use crate::network::{alpha_from_k, validate_assumptions, AlphaMatrix, CouplingMatrix, StarNetwork};

pub const COLUMN_SUM_TOLERANCE: f64 = 1e-10;
pub const NEGATIVE_CLAMP: f64 = 1e-12;
pub const INVERSE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QMatrix {
    q: DenseMatrix,
    /// `ordering[r]` is the user arc id of internal row `r`.
    ordering: Vec<usize>,
    m_in: usize,
}

impl QMatrix {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    pub fn dim(&self) -> usize {
        self.ordering.len()
    }

    pub fn n_incoming(&self) -> usize {
        self.m_in
    }

    pub fn is_outgoing_row(&self, r: usize) -> bool {
        r >= self.m_in
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.q[(r, c)]
    }

    fn sub(&self, rows: &[usize]) -> QMatrix {
        let mut inc: Vec<usize> = rows.iter().copied().filter(|&r| r < self.m_in).collect();
        let out: Vec<usize> = rows.iter().copied().filter(|&r| r >= self.m_in).collect();
        let m_in = inc.len();
        inc.extend(out);
        QMatrix {
            q: self.q.principal_submatrix(&inc),
            ordering: inc.iter().map(|&r| self.ordering[r]).collect(),
            m_in,
        }
    }
}

pub fn assemble_q(net: &StarNetwork, alpha: &AlphaMatrix) -> Result<QMatrix> {
    let m = net.len();
    if alpha.dim() != m {
        return Err(Error::DimensionMismatch {
            context: "alpha matrix vs network",
            expected: m,
            found: alpha.dim(),
        });
    }
    let mut ordering: Vec<usize> = net.incoming().to_vec();
    ordering.extend_from_slice(net.outgoing());
    let m_in = net.incoming().len();
    let q = DenseMatrix::from_fn(m, m, |r, c| {
        let (i, j) = (ordering[r], ordering[c]);
        let mut v = alpha.get(i, j);
        if r == c && r >= m_in {
            v += net.arc(i).speed;
        }
        v
    });
    Ok(QMatrix { q, ordering, m_in })
}

fn reachable(q: &DenseMatrix, start: usize, transpose: bool) -> Vec<bool> {
    let n = q.n_rows();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for w in 0..n {
            let nz = if transpose { q[(w, v)] } else { q[(v, w)] } != 0.0;
            if w != v && nz && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// Strong connectivity of the digraph with an edge `r → c` whenever `q[r][c] ≠ 0`.
pub fn check_irreducible(q: &QMatrix) -> bool {
    let n = q.dim();
    if n <= 1 {
        return true;
    }
    reachable(&q.q, 0, false).into_iter().all(|b| b) && reachable(&q.q, 0, true).into_iter().all(|b| b)
}

/// Strongly connected components of the nonzero pattern (internal indices,
/// each sorted, components ordered by smallest member).
pub fn strongly_connected_components(q: &QMatrix) -> Vec<Vec<usize>> {
    let n = q.dim();
    let mut assigned = vec![false; n];
    let mut comps = Vec::new();
    for s in 0..n {
        if assigned[s] {
            continue;
        }
        let fwd = reachable(&q.q, s, false);
        let bwd = reachable(&q.q, s, true);
        let comp: Vec<usize> = (0..n).filter(|&v| fwd[v] && bwd[v] && !assigned[v]).collect();
        for &v in &comp {
            assigned[v] = true;
        }
        comps.push(comp);
    }
    comps
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCertificate {
    /// Per-row Gershgorin condition (non-strict on incoming rows, strict on
    /// outgoing rows).
    pub gershgorin_rows: Vec<bool>,
    pub gershgorin_ok: bool,
    pub determinant: f64,
    pub leading_minors: Vec<f64>,
    pub m_matrix_ok: bool,
    pub min_pivot: f64,
}

fn singularity_threshold(a: &DenseMatrix) -> f64 {
    let scale = a.max_abs_diagonal();
    PIVOT_TOLERANCE * if scale > 0.0 { scale } else { a.max_abs() }
}

pub fn certify_m_matrix(q: &QMatrix) -> Result<MCertificate> {
    let n = q.dim();
    let a = &q.q;
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let gershgorin_rows: Vec<bool> = (0..n)
        .map(|r| {
            let off: f64 = (0..n).filter(|&c| c != r).map(|c| a[(r, c)].abs()).sum();
            let margin = a[(r, r)] - off;
            if q.is_outgoing_row(r) {
                margin > 0.0
            } else {
                margin >= -1e-14 * scale * n as f64
            }
        })
        .collect();
    let threshold = singularity_threshold(a);
    let lu = Lu::factor_with_threshold(a, threshold)?;
    let leading_minors: Vec<f64> = (1..=n)
        .map(|k| {
            let idx: Vec<usize> = (0..k).collect();
            let sub = a.principal_submatrix(&idx);
            Lu::factor_with_threshold(&sub, threshold)
                .map(|f| f.determinant())
                .unwrap_or(0.0)
        })
        .collect();
    let off_diag_nonpositive = (0..n).all(|r| (0..n).all(|c| r == c || a[(r, c)] <= 0.0));
    Ok(MCertificate {
        gershgorin_ok: gershgorin_rows.iter().all(|&b| b),
        gershgorin_rows,
        determinant: lu.determinant(),
        m_matrix_ok: off_diag_nonpositive && leading_minors.iter().all(|&d| d > 0.0),
        leading_minors,
        min_pivot: lu.min_pivot(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Certificates {
    pub irreducible: bool,
    pub gershgorin_ok: bool,
    pub m_matrix_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionSystem {
    q: QMatrix,
    z: DenseMatrix,
    gamma: DenseMatrix,
    det_q: f64,
    certificates: Certificates,
    /// Components as lists of user arc ids.
    components: Vec<Vec<usize>>,
    speeds: Vec<f64>,
}

impl TransmissionSystem {
    pub fn q(&self) -> &QMatrix {
        &self.q
    }

    /// `Z = Q⁻¹` in internal order.
    pub fn z(&self) -> &DenseMatrix {
        &self.z
    }

    /// `γ`, rows = outgoing arcs, columns = incoming arcs.
    pub fn gamma(&self) -> &DenseMatrix {
        &self.gamma
    }

    pub fn det_q(&self) -> f64 {
        self.det_q
    }

    pub fn certificates(&self) -> Certificates {
        self.certificates
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn n_incoming(&self) -> usize {
        self.q.m_in
    }

    pub fn n_outgoing(&self) -> usize {
        self.q.dim() - self.q.m_in
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.gamma.n_cols())
            .map(|j| (0..self.gamma.n_rows()).map(|i| self.gamma[(i, j)]).sum())
            .collect()
    }

    /// Rough conditioning indicator `max|z|·max|q|`.
    pub fn condition_indicator(&self) -> f64 {
        self.z.max_abs() * self.q.q.max_abs()
    }

    /// Residual `max|ZQ - I|`.
    pub fn inverse_residual(&self) -> f64 {
        inverse_residual(&self.z, &self.q.q)
    }

    pub fn speed_of_internal(&self, r: usize) -> f64 {
        self.speeds[self.q.ordering[r]]
    }
}

fn inverse_residual(z: &DenseMatrix, q: &DenseMatrix) -> f64 {
    let n = q.n_rows();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += z[(r, k)] * q[(k, c)];
            }
            if r == c {
                s -= 1.0;
            }
            worst = worst.max(s.abs());
        }
    }
    worst
}

/// Inverse with one step of iterative refinement.
fn refined_inverse(a: &DenseMatrix, lu: &Lu) -> DenseMatrix {
    let n = a.n_rows();
    let mut z = lu.inverse();
    // R = I - A Z, then Z += Z R.
    let az = a.mul(&z).expect("square");
    let r = DenseMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - az[(i, j)]);
    let zr = z.mul(&r).expect("square");
    for i in 0..n {
        for j in 0..n {
            z[(i, j)] += zr[(i, j)];
        }
    }
    z
}

pub fn compute_gamma(net: &StarNetwork, k: &CouplingMatrix) -> Result<TransmissionSystem> {
    let report = validate_assumptions(net, k)?;
    if !report.holds_17 {
        return Err(Error::AssumptionViolated(
            "K must be symmetric, nonnegative, with zero diagonal".into(),
        ));
    }
    if !report.holds_anz {
        let bad: Vec<usize> = net
            .incoming()
            .iter()
            .copied()
            .filter(|&i| net.outgoing().iter().all(|&j| k.get(i, j) <= 0.0))
            .collect();
        return Err(Error::AssumptionViolated(format!(
            "incoming arcs {bad:?} are not coupled to any outgoing arc"
        )));
    }
    let alpha = alpha_from_k(k);
    let q = assemble_q(net, &alpha)?;
    let m = q.dim();
    let irreducible = check_irreducible(&q);
    let comps = strongly_connected_components(&q);

    let mut z = DenseMatrix::zeros(m, m);
    let mut det_q = 1.0;
    let mut gershgorin_ok = true;
    let mut m_matrix_ok = true;
    let mut components = Vec::with_capacity(comps.len());
    for comp in &comps {
        let sub = q.sub(comp);
        if sub.m_in > 0 && sub.m_in == sub.dim() {
            return Err(Error::AssumptionViolated(format!(
                "component {:?} contains no outgoing arc",
                sub.ordering
            )));
        }
        let cert = certify_m_matrix(&sub)?;
        gershgorin_ok &= cert.gershgorin_ok;
        m_matrix_ok &= cert.m_matrix_ok;
        det_q *= cert.determinant;
        let lu = Lu::factor_with_threshold(&sub.q, singularity_threshold(&sub.q))?;
        let zs = refined_inverse(&sub.q, &lu);
        // Map the component's internal rows back to global internal rows.
        let global: Vec<usize> = sub
            .ordering
            .iter()
            .map(|id| q.ordering.iter().position(|x| x == id).expect("member"))
            .collect();
        for (a, &ga) in global.iter().enumerate() {
            for (b, &gb) in global.iter().enumerate() {
                z[(ga, gb)] = zs[(a, b)];
            }
        }
        let mut ids = sub.ordering.clone();
        ids.sort_unstable();
        components.push(ids);
    }

    let residual = inverse_residual(&z, &q.q);
    if !(residual <= INVERSE_TOLERANCE) {
        return Err(Error::InvariantViolation(format!(
            "max|ZQ - I| = {residual:e} exceeds {INVERSE_TOLERANCE:e}"
        )));
    }

    let m_in = q.m_in;
    let m_out = m - m_in;
    let mut gamma = DenseMatrix::from_fn(m_out, m_in, |i, j| {
        net.arc(q.ordering[m_in + i]).speed * z[(m_in + i, j)]
    });
    for j in 0..m_in {
        let s: f64 = (0..m_out).map(|i| gamma[(i, j)]).sum();
        if !((s - 1.0).abs() <= COLUMN_SUM_TOLERANCE) {
            return Err(Error::InvariantViolation(format!(
                "column {j} of gamma sums to {s:.17e}"
            )));
        }
        for i in 0..m_out {
            let g = gamma[(i, j)];
            if g < -NEGATIVE_CLAMP || !g.is_finite() {
                return Err(Error::InvariantViolation(format!("gamma[{i}][{j}] = {g:e} is negative")));
            }
            if g < 0.0 {
                gamma[(i, j)] = 0.0;
            }
        }
    }

    Ok(TransmissionSystem {
        q,
        z,
        gamma,
        det_q,
        certificates: Certificates {
            irreducible,
            gershgorin_ok,
            m_matrix_ok,
        },
        components,
        speeds: net.speeds(),
    })
}

/// Solves the node system for the incoming fluxes `φ_j = λ_j u_j(L_j)`.
///
/// Returns the outgoing traces `u_i(0)` (in `StarNetwork::outgoing()` order)
/// and the node weights `W^N_j` (in `StarNetwork::incoming()` order).
pub fn hyperbolic_node_traces(ts: &TransmissionSystem, incoming_flux: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m_in = ts.n_incoming();
    if incoming_flux.len() != m_in {
        return Err(Error::DimensionMismatch {
            context: "incoming flux vector",
            expected: m_in,
            found: incoming_flux.len(),
        });
    }
    let m = ts.q.dim();
    let mut rhs = vec![0.0; m];
    rhs[..m_in].copy_from_slice(incoming_flux);
    let x = ts.z.mul_vec(&rhs)?;
    Ok((x[m_in..].to_vec(), x[..m_in].to_vec()))
}
