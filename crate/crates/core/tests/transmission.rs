mod common;

use nalgebra::DMatrix;
use starnet::transmission::compute_gamma;
use starnet::{alpha_from_k, ArcSpec, CouplingMatrix, Error, StarNetwork};

/// γ from a dense inverse of the node matrix, built from scratch.
fn oracle_gamma(net: &StarNetwork, k: &CouplingMatrix) -> DMatrix<f64> {
    let alpha = alpha_from_k(k);
    let order: Vec<usize> = net.incoming().iter().chain(net.outgoing()).copied().collect();
    let m_in = net.incoming().len();
    let m = order.len();
    let q = DMatrix::from_fn(m, m, |r, c| {
        let mut v = alpha.get(order[r], order[c]);
        if r == c && r >= m_in {
            v += net.arc(order[r]).speed;
        }
        v
    });
    let z = q.try_inverse().expect("invertible");
    DMatrix::from_fn(m - m_in, m_in, |i, j| net.arc(order[m_in + i]).speed * z[(m_in + i, j)])
}

#[test]
fn matches_dense_oracle() {
    let mut rng = common::rng(11);
    for _ in 0..100 {
        let net = common::random_network(&mut rng, 2, 8);
        let k = common::random_coupling(&mut rng, &net);
        let ts = compute_gamma(&net, &k).unwrap();
        let g = ts.gamma();
        let o = oracle_gamma(&net, &k);
        for i in 0..o.nrows() {
            for j in 0..o.ncols() {
                assert!((g[(i, j)] - o[(i, j)]).abs() < 1e-9, "{} vs {}", g[(i, j)], o[(i, j)]);
            }
        }
    }
}

#[test]
fn stochastic_columns_and_sign() {
    let mut rng = common::rng(12);
    for _ in 0..100 {
        let net = common::random_network(&mut rng, 2, 8);
        let k = common::random_coupling(&mut rng, &net);
        let ts = compute_gamma(&net, &k).unwrap();
        for s in ts.column_sums() {
            assert!((s - 1.0).abs() < 1e-10);
        }
        for (r, &i) in net.outgoing().iter().enumerate() {
            for (c, &j) in net.incoming().iter().enumerate() {
                let g = ts.gamma()[(r, c)];
                assert!(g >= -1e-12);
                if k.get(i, j) > 0.0 {
                    assert!(g > 1e-14);
                }
            }
        }
    }
}

#[test]
fn reducible_network_splits() {
    let net = StarNetwork::new(&[
        ArcSpec::incoming(1.0, 1.0),
        ArcSpec::incoming(1.0, 3.0),
        ArcSpec::outgoing(1.0, 2.0),
        ArcSpec::outgoing(1.0, 0.5),
    ])
    .unwrap();
    let k = CouplingMatrix::from_pairs(4, &[(0, 2, 1.0), (1, 3, 2.0)]).unwrap();
    let ts = compute_gamma(&net, &k).unwrap();
    assert!(!ts.certificates().irreducible);
    assert_eq!(ts.components().len(), 2);
    let g = ts.gamma();
    assert!((g[(0, 0)] - 1.0).abs() < 1e-14 && g[(1, 0)].abs() < 1e-14);
    assert!((g[(1, 1)] - 1.0).abs() < 1e-14 && g[(0, 1)].abs() < 1e-14);
}

#[test]
fn uncoupled_incoming_rejected() {
    let net = StarNetwork::new(&[
        ArcSpec::incoming(1.0, 1.0),
        ArcSpec::incoming(1.0, 1.0),
        ArcSpec::outgoing(1.0, 1.0),
    ])
    .unwrap();
    let k = CouplingMatrix::from_pairs(3, &[(0, 2, 1.0), (0, 1, 1.0)]).unwrap();
    assert!(matches!(compute_gamma(&net, &k), Err(Error::AssumptionViolated(_))));
}

#[test]
fn invariant_under_uniform_scaling() {
    // Scaling K and every speed by the same factor leaves γ unchanged.
    let mut rng = common::rng(13);
    for _ in 0..20 {
        let net = common::random_network(&mut rng, 3, 6);
        let k = common::random_coupling(&mut rng, &net);
        let g1 = compute_gamma(&net, &k).unwrap().gamma().clone();
        let net2 = net.with_scaled_speeds(7.5).unwrap();
        let g2 = compute_gamma(&net2, &k.scaled(7.5).unwrap()).unwrap().gamma().clone();
        for i in 0..g1.n_rows() {
            for j in 0..g1.n_cols() {
                assert!((g1[(i, j)] - g2[(i, j)]).abs() < 1e-12);
            }
        }
    }
}
