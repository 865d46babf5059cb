//! Explicit ReLU-invariant families: Dirac mixtures, the space-filling
//! curve parametrisation of finitely-many-parameter networks, and the
//! tree-walk family for a pair of fixed networks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{DiscreteMeasure, MeasureError, MASS_TOLERANCE};
use crate::relu_net::{NetError, ReluLayer, ReluNetwork};

/// Largest supported refinement level of the base Hilbert curve.
pub const MAX_HILBERT_DEPTH: u32 = 26;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("mixture weights must lie in [0, 1] and sum to 1 (sum {0})")]
    OffSimplex(f64),
    #[error("{locations} locations but {weights} weights")]
    LengthMismatch { locations: usize, weights: usize },
    #[error("parameter {0} = {1} is outside its domain")]
    OutOfDomain(&'static str, f64),
    #[error("curve depth must be in 1..={MAX_HILBERT_DEPTH}, got {0}")]
    InvalidDepth(u32),
    #[error("cube dimension must be at least 2, got {0}")]
    InvalidCubeDimension(usize),
    #[error("cannot decode a network: {0}")]
    Decode(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Locations `a_i ∈ R^d` and simplex weights `c_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiracParams {
    pub locations: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DiracParams {
    pub fn new(locations: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, FamilyError> {
        if locations.len() != weights.len() || locations.is_empty() {
            return Err(FamilyError::LengthMismatch {
                locations: locations.len(),
                weights: weights.len(),
            });
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|c| !(0.0..=1.0).contains(c)) || (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(FamilyError::OffSimplex(sum));
        }
        let d = locations[0].len();
        if let Some(bad) = locations.iter().find(|a| a.len() != d) {
            return Err(FamilyError::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Ok(Self { locations, weights })
    }

    pub fn dim(&self) -> usize {
        self.locations[0].len()
    }
}

/// `Σ c_i δ_{a_i}`.
pub fn dirac_family(params: &DiracParams) -> Result<DiscreteMeasure, FamilyError> {
    Ok(DiscreteMeasure::new(
        params.locations.clone(),
        params.weights.clone(),
    )?)
}

/// Moves every location through `ρ(W · + b)`; weights are unchanged.
pub fn dirac_pushforward_params(
    params: &DiracParams,
    layer: &ReluLayer,
) -> Result<DiracParams, FamilyError> {
    let locations = params
        .locations
        .iter()
        .map(|a| layer.eval(a))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DiracParams {
        locations,
        weights: params.weights.clone(),
    })
}

fn check_depth(depth: u32) -> Result<(), FamilyError> {
    if (1..=MAX_HILBERT_DEPTH).contains(&depth) {
        Ok(())
    } else {
        Err(FamilyError::InvalidDepth(depth))
    }
}

/// Vertex `k` (of `4^depth + 1`) of the Hilbert polygon, computed exactly
/// with dyadic arithmetic. Runs from `(0, 0)` to `(1, 0)`.
fn hilbert_vertex(k: u64, depth: u32) -> [f64; 2] {
    if k >> (2 * depth) != 0 {
        return [1.0, 0.0];
    }
    let (mut x, mut y) = (0.0f64, 0.0f64);
    for level in 0..depth {
        let digit = (k >> (2 * level)) & 3;
        (x, y) = match digit {
            0 => (0.5 * y, 0.5 * x),
            1 => (0.5 * x, 0.5 * y + 0.5),
            2 => (0.5 * x + 0.5, 0.5 * y + 0.5),
            _ => (1.0 - 0.5 * y, 0.5 - 0.5 * x),
        };
    }
    [x, y]
}

/// The base curve `g: [0, 1] → [0, 1]²`: the depth-`depth` Hilbert polygon,
/// exact at multiples of `4^{-depth}` and linear in between.
pub fn hilbert_curve(t: f64, depth: u32) -> Result<[f64; 2], FamilyError> {
    check_depth(depth)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(FamilyError::OutOfDomain("t", t));
    }
    let cells = (1u64 << (2 * depth)) as f64;
    let s = t * cells;
    let k = s.floor();
    let frac = s - k;
    let p = hilbert_vertex(k as u64, depth);
    if frac == 0.0 {
        return Ok(p);
    }
    let q = hilbert_vertex(k as u64 + 1, depth);
    Ok([p[0] + frac * (q[0] - p[0]), p[1] + frac * (q[1] - p[1])])
}

/// `g_2 = g`, `g_n = (id_{n−2} × g) ∘ g_{n−1}`.
pub fn hilbert_gn(t: f64, n: usize, depth: u32) -> Result<Vec<f64>, FamilyError> {
    if n < 2 {
        return Err(FamilyError::InvalidCubeDimension(n));
    }
    let mut v = hilbert_curve(t, depth)?.to_vec();
    for _ in 3..=n {
        let last = v.pop().expect("nonempty");
        v.extend(hilbert_curve(last, depth)?);
    }
    Ok(v)
}

/// `h_n: [0, 1] → [−n, n]^n` with `h_n(0) = h_n(1) = 0`.
pub fn h_n(s: f64, n: usize, depth: u32) -> Result<Vec<f64>, FamilyError> {
    let nf = n as f64;
    let centred = |p: Vec<f64>| p.into_iter().map(|x| 2.0 * x - 1.0).collect::<Vec<_>>();
    let out = if s <= 0.25 {
        centred(hilbert_gn(0.0, n, depth)?)
            .into_iter()
            .map(|x| 4.0 * nf * s * x)
            .collect()
    } else if s <= 0.75 {
        centred(hilbert_gn(2.0 * s - 0.5, n, depth)?)
            .into_iter()
            .map(|x| nf * x)
            .collect()
    } else {
        centred(hilbert_gn(1.0, n, depth)?)
            .into_iter()
            .map(|x| 4.0 * nf * (1.0 - s) * x)
            .collect()
    };
    Ok(out)
}

/// `Γ(t)`: empty for `t < 2`, otherwise `h_⌊t⌋(t − ⌊t⌋)` (length `⌊t⌋`).
/// Entries past the returned prefix are zero.
pub fn gamma(t: f64, depth: u32) -> Result<Vec<f64>, FamilyError> {
    check_depth(depth)?;
    if !t.is_finite() {
        return Err(FamilyError::OutOfDomain("t", t));
    }
    if t < 2.0 {
        return Ok(Vec::new());
    }
    let n = t.floor();
    h_n(t - n, n as usize, depth)
}

/// Upper bound on `L` accepted by [`decode_network`].
pub const MAX_DECODED_LAYERS: usize = 10_000;

/// Reads `(L, W_1, b_1, …, W_L, b_L)` with row-major `d × d` blocks.
/// Missing trailing entries are zero; nonzero entries past the last block
/// are rejected.
pub fn decode_network(seq: &[f64], d: usize) -> Result<ReluNetwork, FamilyError> {
    let first = *seq
        .first()
        .ok_or_else(|| FamilyError::Decode("empty sequence".into()))?;
    let layers = first.round();
    if layers < 1.0 || (first - layers).abs() > 1e-9 {
        return Err(FamilyError::Decode(format!(
            "leading entry {first} is not a positive integer"
        )));
    }
    if d == 0 {
        return Err(FamilyError::Decode("dimension must be positive".into()));
    }
    if layers > MAX_DECODED_LAYERS as f64 {
        return Err(FamilyError::Decode(format!(
            "{layers} layers exceeds the limit"
        )));
    }
    let layers = layers as usize;
    let block = d * d + d;
    let body = &seq[1..];
    let used = layers * block;
    if body.iter().skip(used).any(|x| *x != 0.0) {
        return Err(FamilyError::Decode(format!(
            "nonzero entries after {used} network parameters"
        )));
    }
    let at = |i: usize| body.get(i).copied().unwrap_or(0.0);
    let net = (0..layers)
        .map(|l| {
            let base = l * block;
            let weight = (0..d * d).map(|i| at(base + i)).collect();
            let bias = (0..d).map(|i| at(base + d * d + i)).collect();
            ReluLayer::new(d, weight, bias)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReluNetwork::new(net)?)
}

/// Binary string `z_1 … z_n`; the empty string is the root.
pub type WalkLabel = Vec<u8>;

fn label(index: u64, len: u32) -> WalkLabel {
    (0..len).rev().map(|b| ((index >> b) & 1) as u8).collect()
}

/// Number of walk positions spent in level `k` (walk on the complete
/// bipartite graph between strings of lengths `k` and `k + 1`).
fn level_length(k: u32) -> u128 {
    1 + 2 * (1u128 << k) * (1u128 << (k + 1))
}

/// Vertex at position `i` of the infinite walk.
///
/// Level `k` starts at `0_k`. For every string `v` of length `k + 1` it steps
/// `0_k → v`, then `v → u → v` for every other string `u` of length `k`, and
/// finally `v → 0_k`, so every edge is walked in both directions.
pub fn walk_vertex(i: u64) -> WalkLabel {
    let mut pos = i as u128;
    let mut k = 0u32;
    while pos >= level_length(k) {
        pos -= level_length(k);
        k += 1;
    }
    if pos == 0 {
        return vec![0; k as usize];
    }
    let short = 1u128 << k;
    let q = pos - 1;
    let (v, r) = (q / (2 * short), q % (2 * short));
    if r % 2 == 0 {
        return label(v as u64, k + 1);
    }
    if r == 2 * short - 1 {
        return vec![0; k as usize];
    }
    label(r.div_ceil(2) as u64, k)
}

/// First walk position of level `k`.
fn level_start(k: u32) -> u64 {
    (0..k).map(level_length).sum::<u128>() as u64
}

/// Smallest `m` with `walk_vertex(m) = z1` and `walk_vertex(m + 1) = z2`.
pub fn walk_edge_index(z1: &[u8], z2: &[u8]) -> Option<u64> {
    if z1.len().abs_diff(z2.len()) != 1 {
        return None;
    }
    let k = z1.len().min(z2.len()) as u32;
    let start = level_start(k);
    let len = level_length(k) as u64;
    let mut prev = walk_vertex(start);
    for m in start..start + len {
        let next = walk_vertex(m + 1);
        if prev == z1 && next == z2 {
            return Some(m);
        }
        prev = next;
    }
    None
}

/// `(f_{z_n} ∘ … ∘ f_{z_1})_* μ`.
pub fn label_measure(
    z: &[u8],
    fs: [&ReluNetwork; 2],
    mu: &DiscreteMeasure,
) -> Result<DiscreteMeasure, FamilyError> {
    let mut out = mu.clone();
    for &bit in z {
        out = out.pushforward(fs[bit as usize])?;
    }
    Ok(out)
}

fn interpolate(
    eta: f64,
    a: impl FnOnce() -> Result<DiscreteMeasure, FamilyError>,
    b: impl FnOnce() -> Result<DiscreteMeasure, FamilyError>,
) -> Result<DiscreteMeasure, FamilyError> {
    let a = a()?;
    if eta == 0.0 {
        return Ok(a);
    }
    let b = b()?;
    Ok(DiscreteMeasure::mixture(&[(1.0 - eta, &a), (eta, &b)])?)
}

fn split_time(t: f64) -> Result<(u64, f64), FamilyError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(FamilyError::OutOfDomain("t", t));
    }
    let n = t.floor();
    Ok((n as u64, t - n))
}

/// `μ_t = (1 − η) μ_{W(⌊t⌋)} + η μ_{W(⌊t⌋+1)}` with `η = t − ⌊t⌋`.
pub fn walk_measure(
    t: f64,
    f0: &ReluNetwork,
    f1: &ReluNetwork,
    mu: &DiscreteMeasure,
) -> Result<DiscreteMeasure, FamilyError> {
    for f in [f0, f1] {
        if f.dim() != mu.dim() {
            return Err(FamilyError::DimensionMismatch {
                expected: mu.dim(),
                found: f.dim(),
            });
        }
    }
    let (n, eta) = split_time(t)?;
    interpolate(
        eta,
        || label_measure(&walk_vertex(n), [f0, f1], mu),
        || label_measure(&walk_vertex(n + 1), [f0, f1], mu),
    )
}

/// Parameter `s` with `(f_i)_* μ_t = μ_s` in the walk family.
pub fn walk_shift(t: f64, i: u8) -> Result<f64, FamilyError> {
    let (n, eta) = split_time(t)?;
    let mut z1 = walk_vertex(n);
    let mut z2 = walk_vertex(n + 1);
    z1.push(i);
    z2.push(i);
    let m = walk_edge_index(&z1, &z2).expect("every edge is walked in both directions");
    Ok(m as f64 + eta)
}

/// `μ_t = (1 − η) f^{⌊t⌋}_* μ_0 + η f^{⌊t⌋+1}_* μ_0`.
pub fn single_function_measure(
    t: f64,
    f: &ReluNetwork,
    mu0: &DiscreteMeasure,
) -> Result<DiscreteMeasure, FamilyError> {
    if f.dim() != mu0.dim() {
        return Err(FamilyError::DimensionMismatch {
            expected: mu0.dim(),
            found: f.dim(),
        });
    }
    let (n, eta) = split_time(t)?;
    let mut current = mu0.clone();
    for _ in 0..n {
        current = current.pushforward(f)?;
    }
    interpolate(eta, || Ok(current.clone()), || Ok(current.pushforward(f)?))
}
