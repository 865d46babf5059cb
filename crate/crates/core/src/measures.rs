//! Finite-support probability measures.
//!
//! A [`DiscreteMeasure`] is a list of distinct atoms with positive weights
//! summing to one. Atoms are kept sorted lexicographically, and atoms closer
//! than [`MERGE_RADIUS`] are merged at construction, so two measures built
//! from the same atoms in a different order compare equal.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relu_net::{NetError, ReluNetwork};

/// Atoms closer than this (Euclidean) are merged into one.
pub const MERGE_RADIUS: f64 = 1e-12;

/// Allowed deviation of the total mass from one.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Slack on mass comparisons in the Prokhorov feasibility test. Masses that
/// are summed in a different order may disagree in the last few bits.
pub const MASS_SLACK: f64 = 1e-12;

/// Default bisection width for [`prokhorov_exact`].
pub const DEFAULT_PROKHOROV_TOL: f64 = 1e-9;

/// Largest combined support size accepted by [`prokhorov_exact`].
pub const MAX_EXACT_SUPPORT: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("measure has no atoms with positive weight")]
    Empty,
    #[error("{points} points but {weights} weights")]
    LengthMismatch { points: usize, weights: usize },
    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("points must have dimension at least 1")]
    ZeroDimension,
    #[error("non-finite coordinate or weight at atom {0}")]
    NonFinite(usize),
    #[error("negative weight {weight} at atom {index}")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("weights sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("measures live in different dimensions ({0} vs {1})")]
    IncompatibleDimensions(usize, usize),
    #[error("combined support size {size} exceeds the exact limit {limit}; use prokhorov_upper")]
    SupportTooLarge { size: usize, limit: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("segment endpoints coincide")]
    DegenerateSegment,
    #[error("mixture coefficients must be non-negative and sum to 1")]
    InvalidMixture,
    #[error(transparent)]
    Network(#[from] NetError),
}

/// A probability measure with finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// On-disk JSON layout of a measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureFile {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Sums in ascending order so the result does not depend on input order.
fn ordered_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

impl DiscreteMeasure {
    /// Builds a measure, dropping zero-weight atoms and merging coincident
    /// ones.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if points.len() != weights.len() {
            return Err(MeasureError::LengthMismatch {
                points: points.len(),
                weights: weights.len(),
            });
        }
        let dim = points.first().map(Vec::len).ok_or(MeasureError::Empty)?;
        if dim == 0 {
            return Err(MeasureError::ZeroDimension);
        }
        for (index, (p, &w)) in points.iter().zip(&weights).enumerate() {
            if p.len() != dim {
                return Err(MeasureError::DimensionMismatch {
                    index,
                    expected: dim,
                    found: p.len(),
                });
            }
            if !w.is_finite() || p.iter().any(|x| !x.is_finite()) {
                return Err(MeasureError::NonFinite(index));
            }
            if w < 0.0 {
                return Err(MeasureError::NegativeWeight { index, weight: w });
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(MeasureError::NotNormalized(total));
        }
        Self::merged(dim, points, weights)
    }

    /// A single unit atom.
    pub fn dirac(point: Vec<f64>) -> Result<Self, MeasureError> {
        Self::new(vec![point], vec![1.0])
    }

    /// Equal weights on the given points.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self, MeasureError> {
        let n = points.len();
        if n == 0 {
            return Err(MeasureError::Empty);
        }
        Self::new(points, vec![1.0 / n as f64; n])
    }

    fn merged(dim: usize, points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        let mut atoms: Vec<(Vec<f64>, f64)> = points
            .into_iter()
            .zip(weights)
            .filter(|(_, w)| *w > 0.0)
            .collect();
        if atoms.is_empty() {
            return Err(MeasureError::Empty);
        }
        atoms.sort_by(|a, b| lex_cmp(&a.0, &b.0));

        // Greedy clustering: the lexicographically smallest atom of a cluster
        // is its representative.
        let mut reps: Vec<Vec<f64>> = Vec::new();
        let mut masses: Vec<Vec<f64>> = Vec::new();
        for (p, w) in atoms {
            match reps.iter().position(|r| euclidean(r, &p) < MERGE_RADIUS) {
                Some(k) => masses[k].push(w),
                None => {
                    reps.push(p);
                    masses.push(vec![w]);
                }
            }
        }
        let weights = masses.iter_mut().map(|m| ordered_sum(m)).collect();
        Ok(Self {
            dim,
            points: reps,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points
            .iter()
            .map(Vec::as_slice)
            .zip(self.weights.iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Mass of the atoms accepted by `pred`.
    pub fn mass_where(&self, mut pred: impl FnMut(&[f64]) -> bool) -> f64 {
        self.atoms().filter(|(p, _)| pred(p)).map(|(_, w)| w).sum()
    }

    /// Pushforward under an arbitrary map `R^d → R^k`.
    pub fn map_points(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self, MeasureError> {
        let images: Vec<Vec<f64>> = self.points.iter().map(|p| f(p)).collect();
        let dim = images[0].len();
        if dim == 0 {
            return Err(MeasureError::ZeroDimension);
        }
        if let Some((index, p)) = images.iter().enumerate().find(|(_, p)| p.len() != dim) {
            return Err(MeasureError::DimensionMismatch {
                index,
                expected: dim,
                found: p.len(),
            });
        }
        if let Some(index) = images.iter().position(|p| p.iter().any(|x| !x.is_finite())) {
            return Err(MeasureError::NonFinite(index));
        }
        Self::merged(dim, images, self.weights.clone())
    }

    /// Pushforward `f_* μ` under a ReLU network.
    pub fn pushforward(&self, net: &ReluNetwork) -> Result<Self, MeasureError> {
        if net.dim() != self.dim {
            return Err(NetError::DimensionMismatch {
                expected: net.dim(),
                found: self.dim,
            }
            .into());
        }
        self.map_points(|p| net.eval_unchecked(p))
    }

    /// Convex combination `Σ c_k μ_k`, represented as the union of atoms with
    /// scaled weights.
    pub fn mixture(parts: &[(f64, &DiscreteMeasure)]) -> Result<Self, MeasureError> {
        let first = parts.first().ok_or(MeasureError::Empty)?.1;
        let total: f64 = parts.iter().map(|(c, _)| c).sum();
        if parts.iter().any(|(c, _)| !(c.is_finite() && *c >= 0.0))
            || (total - 1.0).abs() > MASS_TOLERANCE
        {
            return Err(MeasureError::InvalidMixture);
        }
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (c, mu) in parts {
            if mu.dim != first.dim {
                return Err(MeasureError::IncompatibleDimensions(first.dim, mu.dim));
            }
            for (p, w) in mu.atoms() {
                points.push(p.to_vec());
                weights.push(c * w);
            }
        }
        Self::merged(first.dim, points, weights)
    }

    /// Same atoms (bitwise) and weights within [`MASS_SLACK`].
    pub fn same_as(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.points == other.points
            && self
                .weights
                .iter()
                .zip(&other.weights)
                .all(|(a, b)| (a - b).abs() <= MASS_SLACK)
    }

    pub fn to_file(&self) -> MeasureFile {
        MeasureFile {
            points: self.points.clone(),
            weights: self.weights.clone(),
        }
    }
}

impl TryFrom<MeasureFile> for DiscreteMeasure {
    type Error = MeasureError;

    fn try_from(file: MeasureFile) -> Result<Self, Self::Error> {
        Self::new(file.points, file.weights)
    }
}

impl From<&DiscreteMeasure> for MeasureFile {
    fn from(mu: &DiscreteMeasure) -> Self {
        mu.to_file()
    }
}

/// `f_* μ` for a ReLU network `f`.
pub fn pushforward(mu: &DiscreteMeasure, f: &ReluNetwork) -> Result<DiscreteMeasure, MeasureError> {
    mu.pushforward(f)
}

/// Subset tables for one side of the Prokhorov feasibility test.
struct SubsetMasses {
    mass: Vec<f64>,
}

impl SubsetMasses {
    fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let mut mass = vec![0.0; 1 << n];
        for s in 1usize..(1 << n) {
            let low = s.trailing_zeros() as usize;
            mass[s] = mass[s & (s - 1)] + weights[low];
        }
        Self { mass }
    }
}

/// Checks `μ(B) ≤ ν(B^ε) + ε` for every subset `B` of `supp(μ)`.
/// `near[i]` is the bitmask of ν-atoms strictly closer than ε to μ-atom `i`.
fn one_sided_feasible(mu: &SubsetMasses, nu: &SubsetMasses, near: &[u32], eps: f64) -> bool {
    let n = near.len();
    let mut hood = vec![0u32; 1 << n];
    for s in 1usize..(1 << n) {
        let low = s.trailing_zeros() as usize;
        hood[s] = hood[s & (s - 1)] | near[low];
        if mu.mass[s] > nu.mass[hood[s] as usize] + eps + MASS_SLACK {
            return false;
        }
    }
    true
}

fn check_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(), MeasureError> {
    if mu.dim != nu.dim {
        return Err(MeasureError::IncompatibleDimensions(mu.dim, nu.dim));
    }
    Ok(())
}

/// Prokhorov distance between finite measures, accurate to `tol`.
///
/// Bisects on ε over `[0, 1]`. For a fixed ε the defining inequalities only
/// need to be checked for subsets of each support: any Borel set has the same
/// mass as its trace on the support, and shrinking it shrinks its
/// ε-neighbourhood. The returned value is the upper end of the final bracket,
/// so it never underestimates by more than the slack on masses. Identical
/// measures give exactly zero.
pub fn prokhorov_exact(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    tol: f64,
) -> Result<f64, MeasureError> {
    check_pair(mu, nu)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(MeasureError::InvalidTolerance(tol));
    }
    let size = mu.len() + nu.len();
    if size > MAX_EXACT_SUPPORT {
        return Err(MeasureError::SupportTooLarge {
            size,
            limit: MAX_EXACT_SUPPORT,
        });
    }
    if mu.same_as(nu) {
        return Ok(0.0);
    }

    let dist: Vec<Vec<f64>> = mu
        .points
        .iter()
        .map(|p| nu.points.iter().map(|q| euclidean(p, q)).collect())
        .collect();
    let mu_masses = SubsetMasses::new(&mu.weights);
    let nu_masses = SubsetMasses::new(&nu.weights);

    let feasible = |eps: f64| {
        let near_mu: Vec<u32> = dist
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &d)| d < eps)
                    .fold(0u32, |acc, (j, _)| acc | (1 << j))
            })
            .collect();
        let near_nu: Vec<u32> = (0..nu.len())
            .map(|j| {
                (0..mu.len())
                    .filter(|&i| dist[i][j] < eps)
                    .fold(0u32, |acc, i| acc | (1 << i))
            })
            .collect();
        one_sided_feasible(&mu_masses, &nu_masses, &near_mu, eps)
            && one_sided_feasible(&nu_masses, &mu_masses, &near_nu, eps)
    };

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Upper bound on the Prokhorov distance from a greedy coupling.
///
/// Atom pairs are matched nearest-first. If all pairs used so far are within
/// distance `r` and mass `α` is left unmatched, then `d_P ≤ max(r, α)`; the
/// bound is minimised over the prefix of the greedy order.
pub fn prokhorov_upper(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64, MeasureError> {
    check_pair(mu, nu)?;
    if mu.same_as(nu) {
        return Ok(0.0);
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(mu.len() * nu.len());
    for (i, p) in mu.points.iter().enumerate() {
        for (j, q) in nu.points.iter().enumerate() {
            pairs.push((euclidean(p, q), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut left_mu = mu.weights.clone();
    let mut left_nu = nu.weights.clone();
    let mut matched = 0.0;
    let mut best = 1.0_f64;
    let mut k = 0;
    while k < pairs.len() {
        let radius = pairs[k].0;
        while k < pairs.len() && pairs[k].0 == radius {
            let (_, i, j) = pairs[k];
            let moved = left_mu[i].min(left_nu[j]);
            left_mu[i] -= moved;
            left_nu[j] -= moved;
            matched += moved;
            k += 1;
        }
        let mut unmatched = (1.0 - matched).max(0.0);
        if unmatched <= MASS_SLACK {
            unmatched = 0.0;
        }
        best = best.min(radius.max(unmatched));
        if radius >= best {
            break;
        }
    }
    Ok(best.min(1.0))
}

/// Euclidean distance from `p` to the closed segment `[a, b]`. Shorter
/// vectors are padded with zeros.
pub fn point_segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let dim = p.len().max(a.len()).max(b.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let mut ab2 = 0.0;
    let mut ap_ab = 0.0;
    for i in 0..dim {
        let ab = at(b, i) - at(a, i);
        ab2 += ab * ab;
        ap_ab += (at(p, i) - at(a, i)) * ab;
    }
    let t = if ab2 > 0.0 {
        (ap_ab / ab2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (0..dim)
        .map(|i| {
            let c = at(a, i) + t * (at(b, i) - at(a, i));
            (at(p, i) - c).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Total weight of atoms within `tol` of the closed segment
/// `[seg_start, seg_end]`.
pub fn segment_mass(
    mu: &DiscreteMeasure,
    seg_start: &[f64],
    seg_end: &[f64],
    tol: f64,
) -> Result<f64, MeasureError> {
    let dim = seg_start.len().max(seg_end.len());
    let coincide = (0..dim).all(|i| {
        seg_start.get(i).copied().unwrap_or(0.0) == seg_end.get(i).copied().unwrap_or(0.0)
    });
    if coincide {
        return Err(MeasureError::DegenerateSegment);
    }
    Ok(mu.mass_where(|p| point_segment_distance(p, seg_start, seg_end) <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relu_net::ReluLayer;
    use crate::synthesis::clip_network;

    fn m(points: Vec<Vec<f64>>, weights: Vec<f64>) -> DiscreteMeasure {
        DiscreteMeasure::new(points, weights).unwrap()
    }

    #[test]
    fn construction_merges_and_drops() {
        let mu = m(
            vec![
                vec![1.0, 0.0],
                vec![0.0, 0.0],
                vec![1.0, 1e-14],
                vec![5.0, 5.0],
            ],
            vec![0.25, 0.25, 0.5, 0.0],
        );
        assert_eq!(mu.len(), 2);
        assert_eq!(mu.points()[0], vec![0.0, 0.0]);
        assert_eq!(mu.weights()[1], 0.75);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            DiscreteMeasure::new(vec![vec![0.0]], vec![0.5]),
            Err(MeasureError::NotNormalized(_))
        ));
        assert!(matches!(
            DiscreteMeasure::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5]),
            Err(MeasureError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![1.5, -0.5]),
            Err(MeasureError::NegativeWeight { .. })
        ));
        assert!(matches!(
            DiscreteMeasure::new(vec![], vec![]),
            Err(MeasureError::Empty)
        ));
    }

    #[test]
    fn pushforward_identity_layer_clamps() {
        let mu = m(vec![vec![-1.0, 0.0], vec![1.0, 0.0]], vec![0.5, 0.5]);
        let net = ReluNetwork::single(ReluLayer::identity(2));
        let out = mu.pushforward(&net).unwrap();
        assert_eq!(out.points(), &[vec![0.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(out.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn pushforward_dirac() {
        let net = ReluNetwork::single(
            ReluLayer::new(2, vec![2.0, -1.0, 0.5, 3.0], vec![0.1, -0.2]).unwrap(),
        );
        let a = vec![0.3, -0.7];
        let out = DiscreteMeasure::dirac(a.clone())
            .unwrap()
            .pushforward(&net)
            .unwrap();
        assert_eq!(out.points(), &[net.eval(&a).unwrap()]);
        assert_eq!(out.weights(), &[1.0]);
    }

    #[test]
    fn pushforward_through_clip_collides_atoms() {
        let third = 1.0 / 3.0;
        let mu = m(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]],
            vec![third, third, third],
        );
        let out = mu.pushforward(&clip_network(1.0).unwrap()).unwrap();
        assert_eq!(out.points(), &[vec![0.0, 0.0], vec![1.0, 0.0]]);
        assert!((out.weights()[0] - third).abs() < 1e-15);
        assert!((out.weights()[1] - 2.0 * third).abs() < 1e-15);
    }

    #[test]
    fn pushforward_dimension_mismatch() {
        let mu = m(vec![vec![0.0, 0.0, 0.0]], vec![1.0]);
        let net = ReluNetwork::single(ReluLayer::identity(2));
        assert!(mu.pushforward(&net).is_err());
    }

    #[test]
    fn prokhorov_identity_is_zero() {
        let mu = m(vec![vec![0.0], vec![1.0], vec![3.0]], vec![0.2, 0.3, 0.5]);
        assert_eq!(prokhorov_exact(&mu, &mu, 1e-9).unwrap(), 0.0);
        assert_eq!(prokhorov_upper(&mu, &mu).unwrap(), 0.0);
    }

    #[test]
    fn prokhorov_diracs() {
        for (a, b) in [(0.0, 0.3), (0.0, 0.75), (1.0, 3.5)] {
            let mu = DiscreteMeasure::dirac(vec![a]).unwrap();
            let nu = DiscreteMeasure::dirac(vec![b]).unwrap();
            let expected = (b - a).abs().min(1.0);
            let exact = prokhorov_exact(&mu, &nu, 1e-9).unwrap();
            assert!((exact - expected).abs() <= 1e-9, "{exact} vs {expected}");
            let upper = prokhorov_upper(&mu, &nu).unwrap();
            assert!((upper - expected).abs() <= 1e-15);
        }
    }

    #[test]
    fn prokhorov_half_split() {
        let mu = m(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]);
        let nu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let d = prokhorov_exact(&mu, &nu, 1e-9).unwrap();
        assert!((d - 0.5).abs() <= 1e-9);
    }

    #[test]
    fn prokhorov_rejects_large_supports() {
        let pts: Vec<Vec<f64>> = (0..11).map(|k| vec![k as f64]).collect();
        let mu = DiscreteMeasure::uniform(pts.clone()).unwrap();
        let nu = DiscreteMeasure::uniform(pts.iter().map(|p| vec![p[0] + 0.5]).collect()).unwrap();
        assert!(matches!(
            prokhorov_exact(&mu, &nu, 1e-9),
            Err(MeasureError::SupportTooLarge { size: 22, .. })
        ));
        assert!(prokhorov_upper(&mu, &nu).unwrap() <= 0.5);
    }

    #[test]
    fn segment_mass_cases() {
        let a = [0.0, 0.0];
        let b = [2.0, 0.0];
        let mid = DiscreteMeasure::dirac(vec![1.0, 0.0]).unwrap();
        assert_eq!(segment_mass(&mid, &a, &b, 1e-9).unwrap(), 1.0);
        let off = DiscreteMeasure::dirac(vec![1.0, 2e-9]).unwrap();
        assert_eq!(segment_mass(&off, &a, &b, 1e-9).unwrap(), 0.0);
        let third = 1.0 / 3.0;
        let three = m(
            vec![vec![0.5, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]],
            vec![third, third, third],
        );
        let got = segment_mass(&three, &a, &b, 1e-9).unwrap();
        assert!((got - 2.0 * third).abs() < 1e-15);
        assert!(segment_mass(&three, &a, &a, 1e-9).is_err());
    }
}
