//! Prokhorov distances checked against a brute-force critical-value oracle.
//!
//! For open ε-neighbourhoods the worst-case deficit
//! `g(ε) = max_B μ(B) − ν(B^ε)` is constant between consecutive pairwise
//! distances, so `d_P = min_j max(d_j, g(d_j⁺))` over the sorted distances
//! `d_0 = 0 < d_1 < …`.

use arcforge::fixtures::{random_measure, rng};
use arcforge::measures::{prokhorov_exact, DiscreteMeasure};
use rand::Rng;

fn dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Largest `μ(B) − ν({y : d(y, B) ≤ r})` over subsets `B` of `supp(μ)`.
fn deficit(mu: &DiscreteMeasure, nu: &DiscreteMeasure, r: f64) -> f64 {
    let mut worst = 0.0f64;
    for mask in 1u32..(1 << mu.len()) {
        let chosen: Vec<usize> = (0..mu.len()).filter(|i| mask & (1 << i) != 0).collect();
        let inner: f64 = chosen.iter().map(|&i| mu.weights()[i]).sum();
        let outer: f64 = nu
            .atoms()
            .filter(|(q, _)| chosen.iter().any(|&i| dist(&mu.points()[i], q) <= r))
            .map(|(_, w)| w)
            .sum();
        worst = worst.max(inner - outer);
    }
    worst
}

fn oracle(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let mut levels = vec![0.0];
    for p in mu.points() {
        for q in nu.points() {
            levels.push(dist(p, q));
        }
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels
        .iter()
        .map(|&d| d.max(deficit(mu, nu, d)).max(deficit(nu, mu, d)))
        .fold(1.0, f64::min)
}

#[test]
fn exact_matches_oracle_on_random_pairs() {
    let mut r = rng(41);
    for _ in 0..150 {
        let d = r.random_range(1..=3);
        let n1 = r.random_range(1..=7);
        let n2 = r.random_range(1..=7);
        let a = random_measure(&mut r, n1, d, 0.0, 1.0);
        let b = random_measure(&mut r, n2, d, 0.0, 1.0);
        let want = oracle(&a, &b);
        let got = prokhorov_exact(&a, &b, 1e-10).unwrap();
        assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
    }
}

#[test]
fn mass_limited_case() {
    // Far-apart atoms: the distance is the mass that has to move.
    let a = DiscreteMeasure::new(vec![vec![0.0], vec![5.0]], vec![0.7, 0.3]).unwrap();
    let b = DiscreteMeasure::new(vec![vec![0.0], vec![5.0]], vec![0.4, 0.6]).unwrap();
    assert!((oracle(&a, &b) - 0.3).abs() < 1e-15);
    assert!((prokhorov_exact(&a, &b, 1e-10).unwrap() - 0.3).abs() <= 1e-9);
}

#[test]
fn distance_limited_case() {
    let a = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
    let b = DiscreteMeasure::dirac(vec![0.3, 0.4]).unwrap();
    assert!((oracle(&a, &b) - 0.5).abs() < 1e-15);
    assert!((prokhorov_exact(&a, &b, 1e-10).unwrap() - 0.5).abs() <= 1e-9);
}
