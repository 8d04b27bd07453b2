//! Random piecewise profiles for the oracle and invariant suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use virial_forge::profiles::{AngularProfile, Piece, PiecewiseProfile, RadialDomain, SeparableAnsatz};

pub fn rel(x: f64, y: f64) -> f64 {
    if x == y {
        0.0
    } else {
        (x - y).abs() / x.abs().max(y.abs())
    }
}

/// One to four pieces on `[0, R)` mixing plateaus, power laws and smooth
/// ramps. The first piece is a positive plateau so the profile never
/// vanishes.
pub fn random_radial(rng: &mut impl Rng, domain: RadialDomain) -> PiecewiseProfile {
    let n = rng.random_range(1..=4);
    let mut lo = 0.0;
    let mut pieces = Vec::with_capacity(n);
    for i in 0..n {
        let hi = lo + rng.random_range(0.1..1.5);
        let piece = if i == 0 {
            Piece::constant(lo, hi, rng.random_range(0.2..2.0))
        } else {
            match rng.random_range(0..3) {
                0 => Piece::constant(lo, hi, rng.random_range(0.0..2.0)),
                1 => Piece::power_law(lo, hi, rng.random_range(0.1..2.0), rng.random_range(0.5..4.0)),
                _ => Piece::smoothstep(lo, hi, rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)),
            }
        };
        pieces.push(piece.expect("valid random piece"));
        lo = hi;
    }
    PiecewiseProfile::from_support(pieces, domain).expect("valid random profile")
}

/// Plateaus and ramps on `[-1, 1]` with at least one positive plateau.
pub fn random_angular(rng: &mut impl Rng) -> AngularProfile {
    let n = rng.random_range(1..=3);
    let mut cuts: Vec<f64> = (1..n).map(|_| rng.random_range(-0.9..0.9)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = vec![-1.0];
    edges.extend(cuts);
    edges.push(1.0);
    let anchor = rng.random_range(0..edges.len() - 1);
    let pieces = edges
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            if i == anchor {
                Piece::constant(w[0], w[1], rng.random_range(0.2..2.0))
            } else if rng.random_bool(0.5) {
                Piece::constant(w[0], w[1], rng.random_range(0.0..2.0))
            } else {
                Piece::smoothstep(w[0], w[1], rng.random_range(0.0..2.0), rng.random_range(0.0..2.0))
            }
            .expect("valid angular piece")
        })
        .collect();
    AngularProfile::new(pieces).expect("valid angular profile")
}

pub fn random_ansatz(seed: u64) -> SeparableAnsatz {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eta = random_radial(&mut rng, RadialDomain::Position);
    let phi = random_radial(&mut rng, RadialDomain::Momentum);
    let angular = random_angular(&mut rng);
    SeparableAnsatz::new(eta, phi, angular).expect("valid random ansatz")
}
