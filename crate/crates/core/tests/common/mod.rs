#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use starnet::piecewise::PiecewiseConstant;
use starnet::{ArcSpec, CouplingMatrix, StarNetwork};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random network with `m_in` incoming and `m_out` outgoing arcs.
pub fn random_shape(rng: &mut ChaCha8Rng, m_in: usize, m_out: usize) -> StarNetwork {
    let mut specs = Vec::with_capacity(m_in + m_out);
    for _ in 0..m_in {
        specs.push(ArcSpec::incoming(rng.gen_range(0.5..2.0), rng.gen_range(0.1..10.0)));
    }
    for _ in 0..m_out {
        specs.push(ArcSpec::outgoing(rng.gen_range(0.5..2.0), rng.gen_range(0.1..10.0)));
    }
    StarNetwork::new(&specs).unwrap()
}

pub fn random_network(rng: &mut ChaCha8Rng, m_lo: usize, m_hi: usize) -> StarNetwork {
    let m = rng.gen_range(m_lo..=m_hi);
    let m_in = rng.gen_range(1..m);
    random_shape(rng, m_in, m - m_in)
}

/// Random `K` on `net` with every incoming arc coupled to some outgoing arc
/// and vice versa. Couplings inside `I` or inside `O` appear at random too.
pub fn random_coupling(rng: &mut ChaCha8Rng, net: &StarNetwork) -> CouplingMatrix {
    coupling_with(rng, net, true)
}

/// Like [`random_coupling`] but outgoing arcs may be left uncoupled.
pub fn random_coupling_incoming_only(rng: &mut ChaCha8Rng, net: &StarNetwork) -> CouplingMatrix {
    coupling_with(rng, net, false)
}

fn coupling_with(rng: &mut ChaCha8Rng, net: &StarNetwork, cover_outgoing: bool) -> CouplingMatrix {
    let m = net.len();
    let mut pairs = Vec::new();
    let value = |rng: &mut ChaCha8Rng| 10f64.powf(rng.gen_range(-1.5..1.0));
    for i in 0..m {
        for j in i + 1..m {
            if rng.gen_bool(0.4) {
                pairs.push((i, j, value(rng)));
            }
        }
    }
    let coupled = |pairs: &[(usize, usize, f64)], i: usize, side: &[usize]| {
        pairs.iter().any(|&(a, b, _)| (a == i && side.contains(&b)) || (b == i && side.contains(&a)))
    };
    for &i in net.incoming() {
        if !coupled(&pairs, i, net.outgoing()) {
            let j = net.outgoing()[rng.gen_range(0..net.outgoing().len())];
            pairs.push((i.min(j), i.max(j), value(rng)));
        }
    }
    for &j in net.outgoing().iter().filter(|_| cover_outgoing) {
        if !coupled(&pairs, j, net.incoming()) {
            let i = net.incoming()[rng.gen_range(0..net.incoming().len())];
            pairs.push((i.min(j), i.max(j), value(rng)));
        }
    }
    CouplingMatrix::from_pairs(m, &pairs).unwrap()
}

/// Random step data with up to `max_jumps` jumps per arc, values in `[lo, hi)`.
pub fn random_field(rng: &mut ChaCha8Rng, length: f64, max_jumps: usize, lo: f64, hi: f64) -> PiecewiseConstant {
    let n = rng.gen_range(0..=max_jumps);
    let mut bps: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95) * length).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let values = (0..=bps.len()).map(|_| rng.gen_range(lo..hi)).collect();
    PiecewiseConstant::new(length, bps, values).unwrap()
}

pub fn random_data(rng: &mut ChaCha8Rng, net: &StarNetwork, lo: f64, hi: f64) -> (Vec<PiecewiseConstant>, Vec<f64>) {
    let u0 = net.arcs().iter().map(|a| random_field(rng, a.length, 3, lo, hi)).collect();
    let b = net.incoming().iter().map(|_| rng.gen_range(lo..hi)).collect();
    (u0, b)
}
