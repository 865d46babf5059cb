//! Seeded random generators shared by the CLI suites and the tests.
//!
//! Everything draws from [`SplitMix64`], so a seed fully determines a
//! fixture.

use rand::Rng;
use rand::SeedableRng;
pub use rand_xoshiro::SplitMix64;

use crate::arcs::StandardArc;
use crate::measures::DiscreteMeasure;
use crate::relu_net::{ReluLayer, ReluNetwork};

pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

/// Positive weights summing to one.
pub fn random_weights(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// `n` atoms with coordinates uniform in `[lo, hi)` and random weights.
pub fn random_measure(
    rng: &mut SplitMix64,
    n: usize,
    dim: usize,
    lo: f64,
    hi: f64,
) -> DiscreteMeasure {
    let points = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(lo..hi)).collect())
        .collect();
    let weights = random_weights(rng, n);
    DiscreteMeasure::new(points, weights).expect("valid random measure")
}

/// Standard m-arc with free scales uniform in `[lo, hi)`.
pub fn random_arc(rng: &mut SplitMix64, m: usize, lo: f64, hi: f64) -> StandardArc {
    let free: Vec<f64> = (1..m).map(|_| rng.random_range(lo..hi)).collect();
    StandardArc::from_free_scales(&free).expect("positive scales")
}

/// Moves every free scale by at most `eps`, keeping it positive.
pub fn perturb_arc(rng: &mut SplitMix64, arc: &StandardArc, eps: f64) -> StandardArc {
    let m = arc.m();
    let free: Vec<f64> = arc.scale_map()[..m - 1]
        .iter()
        .map(|r| (r + rng.random_range(-eps..=eps)).max(0.05))
        .collect();
    StandardArc::from_free_scales(&free).expect("positive scales")
}

/// Atom positions given as `(segment, fraction along it)` with weights, so
/// the same layout can be placed on several arcs of the same order.
#[derive(Debug, Clone)]
pub struct ArcLayout {
    pub positions: Vec<(usize, f64)>,
    pub weights: Vec<f64>,
}

impl ArcLayout {
    /// Between `min_per` and `max_per` atoms strictly inside every segment.
    pub fn random(rng: &mut SplitMix64, m: usize, min_per: usize, max_per: usize) -> Self {
        let mut positions = Vec::new();
        for k in 0..m {
            let count = rng.random_range(min_per..=max_per);
            for _ in 0..count {
                positions.push((k, rng.random_range(0.05..0.95)));
            }
        }
        let weights = random_weights(rng, positions.len());
        Self { positions, weights }
    }

    pub fn place(&self, arc: &StandardArc) -> DiscreteMeasure {
        let points = self
            .positions
            .iter()
            .map(|&(k, t)| arc.point_on_segment(k, t).to_vec())
            .collect();
        DiscreteMeasure::new(points, self.weights.clone()).expect("valid layout")
    }

    /// Smallest total weight on a segment.
    pub fn delta(&self, m: usize) -> f64 {
        (0..m)
            .map(|k| {
                self.positions
                    .iter()
                    .zip(&self.weights)
                    .filter(|((seg, _), _)| *seg == k)
                    .map(|(_, w)| w)
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Two δ-distributed measures with the same layout on nearby arcs.
#[derive(Debug, Clone)]
pub struct DeltaPair {
    pub arc1: StandardArc,
    pub arc2: StandardArc,
    pub mu1: DiscreteMeasure,
    pub mu2: DiscreteMeasure,
    pub delta: f64,
}

/// At most `max_atoms` atoms per measure; `m` is drawn so every segment
/// gets at least one.
pub fn delta_pair(rng: &mut SplitMix64, max_atoms: usize, eps: f64) -> DeltaPair {
    let m = rng.random_range(2..=max_atoms.clamp(2, 5));
    let per = (max_atoms / m).max(1);
    let layout = ArcLayout::random(rng, m, 1, per);
    let arc1 = random_arc(rng, m, 0.2, 3.0);
    let arc2 = perturb_arc(rng, &arc1, eps);
    DeltaPair {
        mu1: layout.place(&arc1),
        mu2: layout.place(&arc2),
        delta: layout.delta(m),
        arc1,
        arc2,
    }
}

/// Scalar layer `x ↦ ρ(w x + b)` with `w, b` uniform in `[-range, range]`.
pub fn random_scalar_layer(rng: &mut SplitMix64, range: f64) -> ReluLayer {
    ReluLayer::scalar(
        rng.random_range(-range..=range),
        rng.random_range(-range..=range),
    )
}

pub fn random_scalar_net(rng: &mut SplitMix64, layers: usize, range: f64) -> ReluNetwork {
    ReluNetwork::new(
        (0..layers)
            .map(|_| random_scalar_layer(rng, range))
            .collect(),
    )
    .expect("nonempty")
}

/// `d`-dimensional layer with entries uniform in `[-range, range]`.
pub fn random_layer(rng: &mut SplitMix64, d: usize, range: f64) -> ReluLayer {
    let weight = (0..d * d)
        .map(|_| rng.random_range(-range..=range))
        .collect();
    let bias = (0..d).map(|_| rng.random_range(-range..=range)).collect();
    ReluLayer::new(d, weight, bias).expect("finite entries")
}
