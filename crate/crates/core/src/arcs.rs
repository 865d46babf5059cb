//! Standard m-arcs.
//!
//! An m-arc is a polygonal chain `v_0, …, v_m` in the plane whose k-th
//! segment (1-based) points in direction `(sin kφ, cos kφ)` with
//! `φ = π / (2m)`. It is standard when `v_0 = 0` and the last segment has unit
//! length, so it is fully described by its scale vector `(r_1, …, r_{m-1}, 1)`.
//!
//! Segment indices in this module's API are 0-based: segment `k` joins
//! `v_k` and `v_{k+1}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{point_segment_distance, segment_mass, DiscreteMeasure, MASS_SLACK};

/// Default support-membership tolerance.
pub const DEFAULT_ARC_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArcError {
    #[error("standard arcs need m >= 2 segments, got {0}")]
    TooFewSegments(usize),
    #[error("last scale must be exactly 1, got {0}")]
    LastScaleNotOne(f64),
    #[error("scale r_{index} = {value} must be positive and finite")]
    InvalidScale { index: usize, value: f64 },
    #[error("arcs have different orders ({0} vs {1})")]
    OrderMismatch(usize, usize),
    #[error("no standard {m}-arc carries the measure: {reason}")]
    NoArc { m: usize, reason: String },
    #[error("several standard {m}-arcs carry the measure: {reason}")]
    Ambiguous { m: usize, reason: String },
}

/// Turning angle `π / (2m)`.
pub fn phi(m: usize) -> f64 {
    std::f64::consts::PI / (2.0 * m as f64)
}

/// Unit direction of the k-th segment (1-based `k`) of an m-arc. The last
/// direction is exactly horizontal.
pub fn direction(k: usize, m: usize) -> [f64; 2] {
    if k == m {
        return [1.0, 0.0];
    }
    let (s, c) = (k as f64 * phi(m)).sin_cos();
    [s, c]
}

/// Unit normal of the k-th segment pointing away from the arc. Every point of
/// a standard arc satisfies `n_k · p ≤ n_k · v_k`.
fn outer_normal(k: usize, m: usize) -> [f64; 2] {
    let [s, c] = direction(k, m);
    [-c, s]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardArc {
    scales: Vec<f64>,
}

/// On-disk JSON layout of an arc.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArcFile {
    pub m: usize,
    pub scales: Vec<f64>,
}

impl StandardArc {
    /// From the full scale vector `(r_1, …, r_m)`; `r_m` must be exactly 1.
    pub fn new(scales: Vec<f64>) -> Result<Self, ArcError> {
        let m = scales.len();
        if m < 2 {
            return Err(ArcError::TooFewSegments(m));
        }
        for (i, &r) in scales.iter().enumerate() {
            if !(r.is_finite() && r > 0.0) {
                return Err(ArcError::InvalidScale {
                    index: i + 1,
                    value: r,
                });
            }
        }
        if scales[m - 1] != 1.0 {
            return Err(ArcError::LastScaleNotOne(scales[m - 1]));
        }
        Ok(Self { scales })
    }

    /// From `(r_1, …, r_{m-1})`; the unit last scale is appended.
    pub fn from_free_scales(free: &[f64]) -> Result<Self, ArcError> {
        let mut scales = free.to_vec();
        scales.push(1.0);
        Self::new(scales)
    }

    pub fn m(&self) -> usize {
        self.scales.len()
    }

    pub fn phi(&self) -> f64 {
        phi(self.m())
    }

    /// The scale vector `(r_1, …, r_{m-1}, 1)`.
    pub fn scale_map(&self) -> &[f64] {
        &self.scales
    }

    /// `m + 1` vertices starting at the origin.
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        let m = self.m();
        let mut out = Vec::with_capacity(m + 1);
        let mut v = [0.0, 0.0];
        out.push(v);
        for (k, r) in (1..=m).zip(&self.scales) {
            let u = direction(k, m);
            v = [v[0] + r * u[0], v[1] + r * u[1]];
            out.push(v);
        }
        out
    }

    /// Endpoints of every segment, in order.
    pub fn segments(&self) -> Vec<([f64; 2], [f64; 2])> {
        self.vertices().windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Point at fraction `t ∈ [0, 1]` along segment `k` (0-based).
    pub fn point_on_segment(&self, k: usize, t: f64) -> [f64; 2] {
        let v = self.vertices();
        let (a, b) = (v[k], v[k + 1]);
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }

    /// Euclidean distance from `p ∈ R^d` to the arc, with the arc embedded in
    /// `span{e_1, e_2}`.
    pub fn distance(&self, p: &[f64]) -> f64 {
        self.segments()
            .iter()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// `i,x,y` rows, one per vertex, with a header line.
    pub fn vertices_csv(&self) -> String {
        let mut out = String::from("i,x,y\n");
        for (i, v) in self.vertices().iter().enumerate() {
            out.push_str(&format!("{i},{},{}\n", v[0], v[1]));
        }
        out
    }

    pub fn to_file(&self) -> ArcFile {
        ArcFile {
            m: self.m(),
            scales: self.scales.clone(),
        }
    }
}

impl TryFrom<ArcFile> for StandardArc {
    type Error = ArcError;

    fn try_from(file: ArcFile) -> Result<Self, Self::Error> {
        if file.scales.len() != file.m {
            return Err(ArcError::OrderMismatch(file.m, file.scales.len()));
        }
        Self::new(file.scales)
    }
}

/// Largest Euclidean distance between corresponding vertices.
pub fn arc_metric(a: &StandardArc, b: &StandardArc) -> Result<f64, ArcError> {
    if a.m() != b.m() {
        return Err(ArcError::OrderMismatch(a.m(), b.m()));
    }
    Ok(a.vertices()
        .iter()
        .zip(b.vertices())
        .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
        .fold(0.0, f64::max))
}

/// `‖scale(a) − scale(b)‖_∞`.
pub fn scale_distance(a: &StandardArc, b: &StandardArc) -> Result<f64, ArcError> {
    if a.m() != b.m() {
        return Err(ArcError::OrderMismatch(a.m(), b.m()));
    }
    Ok(a.scales
        .iter()
        .zip(&b.scales)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Every atom lies within `tol` of the arc and each segment carries at least
/// `delta` mass (up to [`MASS_SLACK`]).
pub fn is_delta_distributed(mu: &DiscreteMeasure, arc: &StandardArc, delta: f64, tol: f64) -> bool {
    if mu.points().iter().any(|p| arc.distance(p) > tol) {
        return false;
    }
    arc.segments()
        .iter()
        .all(|(a, b)| segment_mass(mu, a, b, tol).is_ok_and(|mass| mass >= delta - MASS_SLACK))
}

/// Mass on each segment (atoms within `tol`, endpoints counted for both
/// neighbouring segments).
pub fn segment_masses(mu: &DiscreteMeasure, arc: &StandardArc, tol: f64) -> Vec<f64> {
    arc.segments()
        .iter()
        .map(|(a, b)| mu.mass_where(|p| point_segment_distance(p, a, b) <= tol))
        .collect()
}

/// Recovers the standard m-arc carrying a δ-distributed measure.
///
/// All segment directions are fixed by `m`, so only the offset of each
/// segment's supporting line is unknown. Because a standard arc is the graph
/// of a concave function, every one of its points lies on the inner side of
/// each supporting line, touching it exactly on that segment. A segment that
/// carries mass therefore has its line offset equal to the largest projection
/// of the support onto the outer normal. Intersecting consecutive lines gives
/// the vertices; the candidate is then checked against both defining
/// conditions.
///
/// With `delta > 0` a valid candidate is the only one. With `delta <= 0`
/// a segment touched by the support only at its endpoints could be moved, so
/// that case is reported as [`ArcError::Ambiguous`].
pub fn recover_arc(
    mu: &DiscreteMeasure,
    m: usize,
    delta: f64,
    tol: f64,
) -> Result<StandardArc, ArcError> {
    if m < 2 {
        return Err(ArcError::TooFewSegments(m));
    }
    let no_arc = |reason: String| ArcError::NoArc { m, reason };
    let planar = |p: &[f64]| [p[0], p.get(1).copied().unwrap_or(0.0)];

    let offsets: Vec<f64> = (1..=m)
        .map(|k| {
            let n = outer_normal(k, m);
            mu.points()
                .iter()
                .map(|p| dot(n, planar(p)))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    if offsets[0].abs() > tol {
        return Err(no_arc(format!(
            "first segment line misses the origin by {:.3e}",
            offsets[0]
        )));
    }

    let mut vertices = vec![[0.0, 0.0]];
    for k in 1..m {
        let (n1, n2) = (outer_normal(k, m), outer_normal(k + 1, m));
        let (c1, c2) = (if k == 1 { 0.0 } else { offsets[k - 1] }, offsets[k]);
        let det = n1[0] * n2[1] - n1[1] * n2[0];
        vertices.push([
            (c1 * n2[1] - n1[1] * c2) / det,
            (n1[0] * c2 - c1 * n2[0]) / det,
        ]);
    }
    let mut free = Vec::with_capacity(m - 1);
    for k in 1..m {
        let u = direction(k, m);
        let (a, b) = (vertices[k - 1], vertices[k]);
        let r = dot(u, [b[0] - a[0], b[1] - a[1]]);
        if !(r.is_finite() && r > 0.0) {
            return Err(no_arc(format!("segment {k} would have length {r:.3e}")));
        }
        free.push(r);
    }
    let arc = StandardArc::from_free_scales(&free).map_err(|e| no_arc(e.to_string()))?;

    if let Some(p) = mu.points().iter().find(|p| arc.distance(p) > tol) {
        return Err(no_arc(format!(
            "atom {p:?} lies {:.3e} away from the candidate",
            arc.distance(p)
        )));
    }
    for (k, mass) in segment_masses(mu, &arc, tol).into_iter().enumerate() {
        if mass < delta - MASS_SLACK {
            return Err(no_arc(format!(
                "segment {} carries mass {mass} < {delta}",
                k + 1
            )));
        }
    }
    if delta <= 0.0 {
        // A segment met by the support only at its endpoints can be pushed
        // outwards: the endpoint atoms stay on the lengthened neighbours and
        // the emptied segment is still allowed when no mass is required.
        let segments = arc.segments();
        for (k, (a, b)) in segments.iter().enumerate().skip(1) {
            let interior = mu.mass_where(|p| {
                point_segment_distance(p, a, b) <= tol
                    && point_segment_distance(p, a, a) > tol
                    && point_segment_distance(p, b, b) > tol
            });
            if interior <= 0.0 {
                return Err(ArcError::Ambiguous {
                    m,
                    reason: format!("segment {} meets the support only at its ends", k + 1),
                });
            }
        }
    }
    Ok(arc)
}
