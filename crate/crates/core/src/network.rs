//! Star-shaped networks and Kedem–Katchalsky coupling coefficients.
//!
//! A network is one inner node joined to `m` outer nodes. Every arc is the
//! interval `(0, L_i)` carrying transport with speed `λ_i > 0`; incoming arcs
//! reach the inner node at `x = L_i`, outgoing arcs leave it at `x = 0`.
//!
//! Coupling coefficients `K_ij` are treated as dimensionless rates. Only
//! their ratios to the speeds matter for the limiting transmission
//! coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Absolute tolerance for the symmetry and zero-diagonal checks on `K`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    #[serde(rename = "in")]
    Incoming,
    #[serde(rename = "out")]
    Outgoing,
}

impl Orientation {
    /// `β_i`: `+1` for incoming arcs, `-1` for outgoing arcs.
    pub fn beta(self) -> f64 {
        match self {
            Orientation::Incoming => 1.0,
            Orientation::Outgoing => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub id: usize,
    pub length: f64,
    pub speed: f64,
    pub orientation: Orientation,
}

impl Arc {
    pub fn is_incoming(&self) -> bool {
        self.orientation == Orientation::Incoming
    }

    /// Time a characteristic needs to cross the arc.
    pub fn transit_time(&self) -> f64 {
        self.length / self.speed
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcSpec {
    pub length: f64,
    pub speed: f64,
    pub orientation: Orientation,
}

impl ArcSpec {
    pub fn new(length: f64, speed: f64, orientation: Orientation) -> Self {
        Self {
            length,
            speed,
            orientation,
        }
    }

    pub fn incoming(length: f64, speed: f64) -> Self {
        Self::new(length, speed, Orientation::Incoming)
    }

    pub fn outgoing(length: f64, speed: f64) -> Self {
        Self::new(length, speed, Orientation::Outgoing)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarNetwork {
    arcs: Vec<Arc>,
    incoming: Vec<usize>,
    outgoing: Vec<usize>,
}

/// Validates arc parameters and builds the network, preserving the given order.
pub fn build_network(specs: &[ArcSpec]) -> Result<StarNetwork> {
    StarNetwork::new(specs)
}

impl StarNetwork {
    pub fn new(specs: &[ArcSpec]) -> Result<Self> {
        let mut arcs = Vec::with_capacity(specs.len());
        for (id, s) in specs.iter().enumerate() {
            if !(s.length > 0.0) || !s.length.is_finite() {
                return Err(Error::NonPositiveParameter {
                    what: "length",
                    arc: id,
                    value: s.length,
                });
            }
            if !(s.speed > 0.0) || !s.speed.is_finite() {
                return Err(Error::NonPositiveParameter {
                    what: "speed",
                    arc: id,
                    value: s.speed,
                });
            }
            arcs.push(Arc {
                id,
                length: s.length,
                speed: s.speed,
                orientation: s.orientation,
            });
        }
        let incoming: Vec<usize> = arcs.iter().filter(|a| a.is_incoming()).map(|a| a.id).collect();
        let outgoing: Vec<usize> = arcs.iter().filter(|a| !a.is_incoming()).map(|a| a.id).collect();
        if incoming.is_empty() {
            return Err(Error::EmptySide { side: "incoming" });
        }
        if outgoing.is_empty() {
            return Err(Error::EmptySide { side: "outgoing" });
        }
        Ok(Self {
            arcs,
            incoming,
            outgoing,
        })
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc(&self, id: usize) -> &Arc {
        &self.arcs[id]
    }

    pub fn incoming(&self) -> &[usize] {
        &self.incoming
    }

    pub fn outgoing(&self) -> &[usize] {
        &self.outgoing
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.arcs.iter().map(|a| a.speed).collect()
    }

    /// Position of arc `id` inside the incoming list, if it is incoming.
    pub fn incoming_position(&self, id: usize) -> Option<usize> {
        self.incoming.iter().position(|&j| j == id)
    }

    pub fn outgoing_position(&self, id: usize) -> Option<usize> {
        self.outgoing.iter().position(|&j| j == id)
    }

    pub fn specs(&self) -> Vec<ArcSpec> {
        self.arcs
            .iter()
            .map(|a| ArcSpec::new(a.length, a.speed, a.orientation))
            .collect()
    }

    /// Same network with every speed multiplied by `c`.
    pub fn with_scaled_speeds(&self, c: f64) -> Result<Self> {
        let specs: Vec<ArcSpec> = self
            .specs()
            .into_iter()
            .map(|s| ArcSpec::new(s.length, s.speed * c, s.orientation))
            .collect();
        Self::new(&specs)
    }
}

/// Symmetric, nonnegative coupling matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    k: DenseMatrix,
}

impl CouplingMatrix {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let k = DenseMatrix::from_rows(rows)?;
        Self::from_matrix(k)
    }

    pub fn from_matrix(k: DenseMatrix) -> Result<Self> {
        if !k.is_square() {
            return Err(Error::InvalidCoupling(format!(
                "K must be square, got {}x{}",
                k.n_rows(),
                k.n_cols()
            )));
        }
        let m = k.n_rows();
        for i in 0..m {
            for j in 0..m {
                let v = k[(i, j)];
                if !v.is_finite() {
                    return Err(Error::InvalidCoupling(format!("K[{i}][{j}] is not finite")));
                }
                if i == j {
                    if v.abs() > SYMMETRY_TOLERANCE {
                        return Err(Error::InvalidCoupling(format!(
                            "diagonal entry K[{i}][{i}] = {v} must be zero"
                        )));
                    }
                } else if v < 0.0 {
                    return Err(Error::InvalidCoupling(format!(
                        "K[{i}][{j}] = {v} is negative"
                    )));
                }
                if (v - k[(j, i)]).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::InvalidCoupling(format!(
                        "K is not symmetric: K[{i}][{j}] = {v} but K[{j}][{i}] = {}",
                        k[(j, i)]
                    )));
                }
            }
        }
        // Symmetrize exactly so downstream cancellations are exact.
        let sym = DenseMatrix::from_fn(m, m, |i, j| {
            if i == j {
                0.0
            } else {
                0.5 * (k[(i, j)] + k[(j, i)])
            }
        });
        Ok(Self { k: sym })
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            k: DenseMatrix::zeros(m, m),
        }
    }

    /// Builds `K` from unordered pairs `(i, j, value)`; each pair sets both
    /// `K[i][j]` and `K[j][i]`.
    pub fn from_pairs(m: usize, pairs: &[(usize, usize, f64)]) -> Result<Self> {
        let mut k = DenseMatrix::zeros(m, m);
        for &(i, j, v) in pairs {
            if i >= m || j >= m {
                return Err(Error::DimensionMismatch {
                    context: "coupling pair index",
                    expected: m,
                    found: i.max(j),
                });
            }
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        Self::from_matrix(k)
    }

    pub fn dim(&self) -> usize {
        self.k.n_rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.k[(i, j)]
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.k
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.k.to_rows()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let m = self.dim();
        Self::from_matrix(DenseMatrix::from_fn(m, m, |i, j| c * self.k[(i, j)]))
    }

    /// `a·self + b·other`, for nonnegative `a`, `b`.
    pub fn combine(&self, a: f64, other: &CouplingMatrix, b: f64) -> Result<Self> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "coupling combination",
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let m = self.dim();
        Self::from_matrix(DenseMatrix::from_fn(m, m, |i, j| {
            a * self.k[(i, j)] + b * other.k[(i, j)]
        }))
    }
}

/// `α_ij = -K_ij` off the diagonal, `α_ii = Σ_{j≠i} K_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatrix {
    alpha: DenseMatrix,
}

impl AlphaMatrix {
    pub fn dim(&self) -> usize {
        self.alpha.n_rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.alpha[(i, j)]
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.alpha
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.alpha.to_rows()
    }

    /// Largest row-sum or column-sum magnitude; zero up to round-off.
    pub fn max_line_sum(&self) -> f64 {
        let m = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            let row: f64 = (0..m).map(|j| self.alpha[(i, j)]).sum();
            let col: f64 = (0..m).map(|j| self.alpha[(j, i)]).sum();
            worst = worst.max(row.abs()).max(col.abs());
        }
        worst
    }
}

pub fn alpha_from_k(k: &CouplingMatrix) -> AlphaMatrix {
    let m = k.dim();
    let mut alpha = DenseMatrix::zeros(m, m);
    for i in 0..m {
        let mut diag = 0.0;
        for j in 0..m {
            if i != j {
                let kij = k.get(i, j);
                alpha[(i, j)] = -kij;
                diag += kij;
            }
        }
        alpha[(i, i)] = diag;
    }
    AlphaMatrix { alpha }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssumptionReport {
    /// Symmetry, nonnegativity and zero diagonal of `K`.
    pub holds_17: bool,
    /// Every incoming arc couples to at least one outgoing arc.
    pub holds_anz: bool,
    /// Every outgoing arc couples to at least one incoming arc.
    pub holds_lc: bool,
}

impl AssumptionReport {
    pub fn all(&self) -> bool {
        self.holds_17 && self.holds_anz && self.holds_lc
    }
}

pub fn validate_assumptions(net: &StarNetwork, k: &CouplingMatrix) -> Result<AssumptionReport> {
    let m = net.len();
    if k.dim() != m {
        return Err(Error::DimensionMismatch {
            context: "coupling matrix vs network",
            expected: m,
            found: k.dim(),
        });
    }
    let holds_17 = (0..m).all(|i| {
        k.get(i, i).abs() <= SYMMETRY_TOLERANCE
            && (0..m).all(|j| k.get(i, j) >= 0.0 && (k.get(i, j) - k.get(j, i)).abs() <= SYMMETRY_TOLERANCE)
    });
    let couples = |from: &[usize], to: &[usize]| {
        from.iter()
            .all(|&i| to.iter().any(|&j| k.get(i, j) > 0.0))
    };
    Ok(AssumptionReport {
        holds_17,
        holds_anz: couples(net.incoming(), net.outgoing()),
        holds_lc: couples(net.outgoing(), net.incoming()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_in_two_out() -> StarNetwork {
        build_network(&[
            ArcSpec::incoming(1.0, 1.0),
            ArcSpec::incoming(1.0, 2.0),
            ArcSpec::outgoing(1.0, 1.0),
            ArcSpec::outgoing(1.0, 2.0),
        ])
        .unwrap()
    }

    #[test]
    fn minimal_network() {
        let net = build_network(&[ArcSpec::incoming(1.0, 1.0), ArcSpec::outgoing(1.0, 2.0)]).unwrap();
        assert_eq!(net.len(), 2);
        assert_eq!(net.incoming(), &[0]);
        assert_eq!(net.outgoing(), &[1]);
    }

    #[test]
    fn network_errors() {
        assert_eq!(
            build_network(&[ArcSpec::incoming(1.0, 1.0)]),
            Err(Error::EmptySide { side: "outgoing" })
        );
        assert!(matches!(
            build_network(&[ArcSpec::outgoing(1.0, 1.0)]),
            Err(Error::EmptySide { side: "incoming" })
        ));
        assert!(matches!(
            build_network(&[ArcSpec::incoming(1.0, 1.0), ArcSpec::outgoing(0.0, 1.0)]),
            Err(Error::NonPositiveParameter { what: "length", arc: 1, .. })
        ));
        assert!(matches!(
            build_network(&[ArcSpec::incoming(1.0, -2.0), ArcSpec::outgoing(1.0, 1.0)]),
            Err(Error::NonPositiveParameter { what: "speed", arc: 0, .. })
        ));
    }

    #[test]
    fn order_is_preserved_for_interleaved_sides() {
        let net = build_network(&[
            ArcSpec::outgoing(1.0, 1.0),
            ArcSpec::incoming(2.0, 1.0),
            ArcSpec::outgoing(3.0, 1.0),
        ])
        .unwrap();
        assert_eq!(net.incoming(), &[1]);
        assert_eq!(net.outgoing(), &[0, 2]);
        assert_eq!(net.outgoing_position(2), Some(1));
        assert_eq!(net.incoming_position(0), None);
    }

    #[test]
    fn coupling_validation() {
        assert!(CouplingMatrix::new(&[vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(CouplingMatrix::new(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).is_err());
        assert!(CouplingMatrix::new(&[vec![1.0, 1.0], vec![1.0, 0.0]]).is_err());
        assert!(CouplingMatrix::new(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]]).is_err());
        // Text round-trip noise below the tolerance is absorbed.
        let k = CouplingMatrix::new(&[vec![0.0, 1.0], vec![1.0 + 1e-13, 0.0]]).unwrap();
        assert_eq!(k.get(0, 1), k.get(1, 0));
    }

    #[test]
    fn alpha_examples() {
        let k = CouplingMatrix::from_pairs(2, &[(0, 1, 2.5)]).unwrap();
        assert_eq!(alpha_from_k(&k).to_rows(), vec![vec![2.5, -2.5], vec![-2.5, 2.5]]);

        let zero = alpha_from_k(&CouplingMatrix::zeros(3));
        assert!(zero.to_rows().iter().flatten().all(|&v| v == 0.0));

        let k3 = CouplingMatrix::new(&[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]]).unwrap();
        assert_eq!(
            alpha_from_k(&k3).to_rows(),
            vec![vec![3.0, -1.0, -2.0], vec![-1.0, 1.0, 0.0], vec![-2.0, 0.0, 2.0]]
        );
    }

    #[test]
    fn assumption_examples() {
        let net = build_network(&[ArcSpec::incoming(1.0, 1.0), ArcSpec::outgoing(1.0, 1.0)]).unwrap();
        let k = CouplingMatrix::from_pairs(2, &[(0, 1, 1.0)]).unwrap();
        let r = validate_assumptions(&net, &k).unwrap();
        assert!(r.holds_17 && r.holds_anz && r.holds_lc);

        let net = build_network(&[
            ArcSpec::incoming(1.0, 1.0),
            ArcSpec::incoming(1.0, 1.0),
            ArcSpec::outgoing(1.0, 1.0),
        ])
        .unwrap();
        let k = CouplingMatrix::from_pairs(3, &[(0, 2, 1.0)]).unwrap();
        let r = validate_assumptions(&net, &k).unwrap();
        assert!(r.holds_17 && !r.holds_anz);

        let net = two_in_two_out();
        let k = CouplingMatrix::from_pairs(4, &[(0, 2, 0.7), (1, 3, 1.3)]).unwrap();
        assert_eq!(
            validate_assumptions(&net, &k).unwrap(),
            AssumptionReport {
                holds_17: true,
                holds_anz: true,
                holds_lc: true
            }
        );

        assert!(matches!(
            validate_assumptions(&net, &CouplingMatrix::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn coupling_strategy(m: usize) -> impl Strategy<Value = CouplingMatrix> {
        proptest::collection::vec(0.0f64..10.0, m * m).prop_map(move |v| {
            let mut pairs = Vec::new();
            for i in 0..m {
                for j in (i + 1)..m {
                    pairs.push((i, j, v[i * m + j]));
                }
            }
            CouplingMatrix::from_pairs(m, &pairs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn alpha_has_zero_line_sums(k in (2usize..9).prop_flat_map(coupling_strategy)) {
            let alpha = alpha_from_k(&k);
            prop_assert!(alpha.max_line_sum() <= 1e-14 * 10.0 * k.dim() as f64);
            for i in 0..k.dim() {
                for j in 0..k.dim() {
                    prop_assert_eq!(alpha.get(i, j), alpha.get(j, i));
                    if i != j { prop_assert!(alpha.get(i, j) <= 0.0); }
                }
            }
        }

        #[test]
        fn alpha_is_linear(
            (k1, k2) in (2usize..7).prop_flat_map(|m| (coupling_strategy(m), coupling_strategy(m))),
            a in 0.0f64..5.0,
            b in 0.0f64..5.0,
        ) {
            let combined = alpha_from_k(&k1.combine(a, &k2, b).unwrap());
            let (x1, x2) = (alpha_from_k(&k1), alpha_from_k(&k2));
            for i in 0..k1.dim() {
                for j in 0..k1.dim() {
                    let lin = a * x1.get(i, j) + b * x2.get(i, j);
                    prop_assert!((combined.get(i, j) - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
                }
            }
        }

        #[test]
        fn report_ignores_order_within_sides(k in coupling_strategy(4), swap_in in any::<bool>(), swap_out in any::<bool>()) {
            let net = two_in_two_out();
            let base = validate_assumptions(&net, &k).unwrap();
            // Permute arcs inside each side (speeds differ, but the report
            // only depends on the coupling pattern).
            let mut perm = vec![0usize, 1, 2, 3];
            if swap_in { perm.swap(0, 1); }
            if swap_out { perm.swap(2, 3); }
            let specs: Vec<ArcSpec> = perm.iter().map(|&p| net.specs()[p]).collect();
            let permuted_net = build_network(&specs).unwrap();
            let pk = CouplingMatrix::from_matrix(DenseMatrix::from_fn(4, 4, |i, j| k.get(perm[i], perm[j]))).unwrap();
            prop_assert_eq!(validate_assumptions(&permuted_net, &pk).unwrap(), base);
        }
    }
}
