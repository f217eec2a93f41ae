mod common;

use starnet::hyperbolic::{l1_distance_exact, solve_exact};
use starnet::piecewise::PiecewiseConstant;
use starnet::transmission::compute_gamma;
use starnet::{ArcSpec, CouplingMatrix, StarNetwork};

#[test]
fn semigroup_property() {
    let mut rng = common::rng(31);
    for _ in 0..30 {
        let net = common::random_network(&mut rng, 2, 6);
        let k = common::random_coupling(&mut rng, &net);
        let (u0, b) = common::random_data(&mut rng, &net, -1.0, 2.0);
        let g = compute_gamma(&net, &k).unwrap().gamma().clone();
        let (t1, t2) = (0.13, 0.41);
        let direct = solve_exact(&net, &g, &u0, &b, t2).unwrap().field_at(t2).unwrap();
        let mid = solve_exact(&net, &g, &u0, &b, t1).unwrap().field_at(t1).unwrap();
        let restarted = solve_exact(&net, &g, &mid, &b, t2 - t1).unwrap().field_at(t2 - t1).unwrap();
        let d = l1_distance_exact(&direct, &restarted).unwrap();
        assert!(d < 1e-10, "{d}");
    }
}

#[test]
fn nonnegative_data_stays_nonnegative() {
    let mut rng = common::rng(32);
    for _ in 0..50 {
        let net = common::random_network(&mut rng, 2, 8);
        let k = common::random_coupling(&mut rng, &net);
        let (u0, b) = common::random_data(&mut rng, &net, 0.0, 3.0);
        let g = compute_gamma(&net, &k).unwrap().gamma().clone();
        let sol = solve_exact(&net, &g, &u0, &b, 1.0).unwrap();
        for t in [0.1, 0.5, 1.0] {
            for f in sol.field_at(t).unwrap() {
                assert!(f.min_value() >= 0.0);
            }
        }
    }
}

#[test]
fn node_flux_conserved_and_mass_balanced() {
    let mut rng = common::rng(33);
    for _ in 0..20 {
        let net = common::random_network(&mut rng, 2, 5);
        let k = common::random_coupling(&mut rng, &net);
        let (u0, b) = common::random_data(&mut rng, &net, 0.0, 2.0);
        let g = compute_gamma(&net, &k).unwrap().gamma().clone();
        let horizon = 0.7;
        let sol = solve_exact(&net, &g, &u0, &b, horizon).unwrap();
        let times: Vec<f64> = (0..200).map(|n| horizon * (n as f64 + 0.5) / 200.0).collect();
        assert!(sol.check_flux_conservation(&times) < 1e-12);

        let mass = |fields: &[PiecewiseConstant]| fields.iter().map(|f| f.integral()).sum::<f64>();
        let change = mass(&sol.field_at(horizon).unwrap()) - mass(&u0);
        let inflow: f64 = net.incoming().iter().zip(&b).map(|(&i, bi)| net.arc(i).speed * bi).sum::<f64>() * horizon;
        let n = 200_000;
        let dt = horizon / n as f64;
        let mut outflow = 0.0;
        for s in 0..n {
            let t = (s as f64 + 0.5) * dt;
            for &i in net.outgoing() {
                let a = net.arc(i);
                outflow += dt * a.speed * sol.value(i, a.length, t);
            }
        }
        assert!((change - (inflow - outflow)).abs() < 1e-3, "{change} vs {}", inflow - outflow);
    }
}

#[test]
fn finite_propagation_speed() {
    let net = StarNetwork::new(&[
        ArcSpec::incoming(1.0, 1.5),
        ArcSpec::incoming(1.0, 0.5),
        ArcSpec::outgoing(1.0, 1.0),
    ])
    .unwrap();
    let k = CouplingMatrix::from_pairs(3, &[(0, 2, 1.0), (1, 2, 1.0)]).unwrap();
    let g = compute_gamma(&net, &k).unwrap().gamma().clone();
    let base: Vec<_> = (0..3).map(|_| PiecewiseConstant::constant(1.0, 0.5).unwrap()).collect();
    let mut bumped = base.clone();
    bumped[0] = PiecewiseConstant::new(1.0, vec![0.2], vec![2.0, 0.5]).unwrap();
    let horizon = 0.4;
    let a = solve_exact(&net, &g, &base, &[0.5, 0.5], horizon).unwrap();
    let b = solve_exact(&net, &g, &bumped, &[0.5, 0.5], horizon).unwrap();
    // The bump reaches at most 0.2 + 1.5 × 0.4 = 0.8 < 1 on arc 0.
    for q in 0..=100 {
        let x = q as f64 / 100.0;
        assert_eq!(a.value(1, x, horizon), b.value(1, x, horizon));
        assert_eq!(a.value(2, x, horizon), b.value(2, x, horizon));
        if x > 0.8 {
            assert_eq!(a.value(0, x, horizon), b.value(0, x, horizon));
        }
    }
    assert_ne!(a.value(0, 0.7, horizon), b.value(0, 0.7, horizon));
}

#[test]
fn total_variation_bounded_by_sources() {
    // TV(u(t)) ≤ TV(u0) + Σ |B − u0(0)| + TV of the emitted node values.
    let mut rng = common::rng(34);
    for _ in 0..30 {
        let net = common::random_network(&mut rng, 2, 6);
        let k = common::random_coupling(&mut rng, &net);
        let (u0, b) = common::random_data(&mut rng, &net, -1.0, 1.0);
        let g = compute_gamma(&net, &k).unwrap().gamma().clone();
        let sol = solve_exact(&net, &g, &u0, &b, 0.5).unwrap();
        let tv_t: f64 = sol.field_at(0.5).unwrap().iter().map(|f| f.total_variation()).sum();
        let mut bound: f64 = u0.iter().map(|f| f.total_variation()).sum();
        for (&i, bi) in net.incoming().iter().zip(&b) {
            bound += (bi - u0[i].eval(0.0)).abs();
        }
        for &i in net.outgoing() {
            let tr = sol.node_trace(i);
            bound += tr.total_variation() + (tr.eval(0.0) - u0[i].eval(0.0)).abs();
        }
        assert!(tv_t <= bound + 1e-12);
    }
}
