//! ReLU networks that transport a measure onto a prescribed standard arc.
//!
//! The pipeline has four stages, each an explicit network:
//! project onto a signed coordinate axis, clip to `[0, b_m]`, resize so the
//! breakpoints `b_j` land on the knots `a_j`, and bend the segment
//! `[0, a_m] × {0}` into the arc.

use thiserror::Error;

use crate::arcs::{self, StandardArc};
use crate::measures::{DiscreteMeasure, MeasureError};
use crate::relu_net::{rotation, NetError, ReluLayer, ReluNetwork};

/// Projected values closer than this count as one.
pub const DISTINCT_GAP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("no signed coordinate has {needed} distinct nonnegative values (best: {found})")]
    NoCoordinate { needed: usize, found: usize },
    #[error("need {needed} distinct positive values, got {found}")]
    InsufficientValues { needed: usize, found: usize },
    #[error("order m = {0} is too small; need m >= 2")]
    OrderTooSmall(usize),
    #[error("clip bound must be positive and finite, got {0}")]
    InvalidClip(f64),
    #[error("sequence must start at 0 and increase strictly: {0}")]
    NotIncreasing(&'static str),
    #[error("breakpoints and knots differ in length ({0} vs {1})")]
    PlanLength(usize, usize),
    #[error("measure dimension {0} is too small; arcs live in the plane")]
    DimensionTooSmall(usize),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Breakpoints `b_0 < … < b_m` on the projected axis and the knots
/// `a_0 < … < a_m` they are sent to.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    breakpoints: Vec<f64>,
    knots: Vec<f64>,
}

fn check_increasing(v: &[f64], what: &'static str) -> Result<(), SynthesisError> {
    let ok = v.first() == Some(&0.0)
        && v.iter().all(|x| x.is_finite())
        && v.windows(2).all(|w| w[1] > w[0]);
    if ok {
        Ok(())
    } else {
        Err(SynthesisError::NotIncreasing(what))
    }
}

impl PartitionPlan {
    pub fn new(breakpoints: Vec<f64>, knots: Vec<f64>) -> Result<Self, SynthesisError> {
        if breakpoints.len() != knots.len() {
            return Err(SynthesisError::PlanLength(breakpoints.len(), knots.len()));
        }
        if breakpoints.len() < 3 {
            return Err(SynthesisError::OrderTooSmall(
                breakpoints.len().saturating_sub(1),
            ));
        }
        check_increasing(&breakpoints, "breakpoints")?;
        check_increasing(&knots, "knots")?;
        Ok(Self { breakpoints, knots })
    }

    pub fn m(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }
}

/// Result of [`project_to_axis`]. `axis` is 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub layer: ReluLayer,
    pub axis: usize,
    pub sign: f64,
}

fn distinct_count(sorted: &[f64]) -> usize {
    let mut count = 0;
    let mut last = f64::NEG_INFINITY;
    for &v in sorted {
        if v - last > DISTINCT_GAP {
            count += 1;
            last = v;
        }
    }
    count
}

fn signed_nonnegative_values(mu: &DiscreteMeasure, axis: usize, sign: f64) -> Vec<f64> {
    let mut vals: Vec<f64> = mu
        .points()
        .iter()
        .map(|p| sign * p[axis])
        .filter(|v| *v >= 0.0)
        .collect();
    vals.sort_by(f64::total_cmp);
    vals
}

fn best_axis(mu: &DiscreteMeasure) -> (usize, usize, f64) {
    let mut best = (0usize, 0usize, 1.0f64);
    for axis in 0..mu.dim() {
        for sign in [1.0, -1.0] {
            let count = distinct_count(&signed_nonnegative_values(mu, axis, sign));
            if count > best.0 {
                best = (count, axis, sign);
            }
        }
    }
    best
}

/// Largest number of distinct nonnegative values over all signed
/// coordinates. Synthesis onto an m-arc needs at least `m + 1`.
pub fn best_axis_count(mu: &DiscreteMeasure) -> usize {
    best_axis(mu).0
}

/// Picks the signed coordinate with the most distinct nonnegative values
/// (smallest axis first, then `+1`, on ties) and returns the layer
/// `x ↦ ρ(σ x_j e_1)`.
pub fn project_to_axis(mu: &DiscreteMeasure, m: usize) -> Result<Projection, SynthesisError> {
    let d = mu.dim();
    let (count, axis, sign) = best_axis(mu);
    if count < m + 1 {
        return Err(SynthesisError::NoCoordinate {
            needed: m + 1,
            found: count,
        });
    }
    let mut weight = vec![0.0; d * d];
    weight[axis] = sign;
    let layer = ReluLayer::new(d, weight, vec![0.0; d])?;
    Ok(Projection { layer, axis, sign })
}

/// `x ↦ ρ(−ρ(−x + (b_max, 0)) + (b_max, 0))`: the first coordinate is
/// clamped to `[0, b_max]`, the second is zeroed.
pub fn clip_network(b_max: f64) -> Result<ReluNetwork, SynthesisError> {
    if !(b_max.is_finite() && b_max > 0.0) {
        return Err(SynthesisError::InvalidClip(b_max));
    }
    let layer = ReluLayer::new(2, vec![-1.0, 0.0, 0.0, -1.0], vec![b_max, 0.0])?;
    Ok(ReluNetwork::new(vec![layer.clone(), layer])?)
}

/// Breakpoints separating the `m` smallest distinct positive values:
/// `b_0 = 0`, midpoints in between, `b_m = s_m + 1`.
pub fn partition_support(values: &[f64], m: usize) -> Result<Vec<f64>, SynthesisError> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    let mut s: Vec<f64> = Vec::with_capacity(m);
    for v in sorted {
        if s.len() == m {
            break;
        }
        if s.last().is_none_or(|&last| v - last > DISTINCT_GAP) {
            s.push(v);
        }
    }
    if m == 0 || s.len() < m {
        return Err(SynthesisError::InsufficientValues {
            needed: m,
            found: s.len(),
        });
    }
    let mut b = Vec::with_capacity(m + 1);
    b.push(0.0);
    for j in 0..m - 1 {
        b.push(0.5 * (s[j] + s[j + 1]));
    }
    b.push(s[m - 1] + 1.0);
    Ok(b)
}

/// Correction weights `w_1..w_m` of the resize construction.
pub fn resize_weights(plan: &PartitionPlan) -> Vec<f64> {
    let (a, m) = (plan.knots(), plan.m());
    let mut b = plan.breakpoints().to_vec();
    let mut w = Vec::with_capacity(m);
    for j in 0..m {
        let wj = (a[j + 1] - b[j + 1]) / (b[j + 1] - a[j]);
        for bi in b.iter_mut() {
            *bi += wj * (*bi - a[j]).max(0.0);
        }
        // Already-placed knots sit at or below a_j and are untouched.
        b[j + 1] = a[j + 1];
        w.push(wj);
    }
    w
}

/// Monotone piecewise-linear map of the first axis with `(b_i, 0) ↦ (a_i, 0)`.
pub fn resize_network(plan: &PartitionPlan) -> Result<ReluNetwork, SynthesisError> {
    let (a, m) = (plan.knots(), plan.m());
    let w = resize_weights(plan);
    let mut layers = Vec::with_capacity(m + 1);
    layers.push(ReluLayer::new(2, vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 0.0])?);
    for j in 1..m {
        layers.push(ReluLayer::new(
            2,
            vec![1.0, w[j - 1], 1.0, w[j - 1]],
            vec![0.0, -a[j]],
        )?);
    }
    layers.push(ReluLayer::new(
        2,
        vec![1.0, w[m - 1], 0.0, 0.0],
        vec![0.0, 0.0],
    )?);
    Ok(ReluNetwork::new(layers)?)
}

/// Folds `[0, a_m] × {0}` into the standard m-arc with scales
/// `r_i = cos^{m−i}(φ)(a_i − a_{i−1})`.
pub fn bend_network(knots: &[f64], m: usize) -> Result<ReluNetwork, SynthesisError> {
    if m < 2 {
        return Err(SynthesisError::OrderTooSmall(m));
    }
    if knots.len() != m + 1 {
        return Err(SynthesisError::PlanLength(knots.len(), m + 1));
    }
    check_increasing(knots, "knots")?;
    let phi = arcs::phi(m);
    let (s, c) = phi.sin_cos();
    let turn = rotation(-phi);
    let mut layers = Vec::with_capacity(m + 1);
    layers.push(ReluLayer::new(
        2,
        vec![0.0, -1.0, 1.0, 0.0],
        vec![0.0, 0.0],
    )?);
    for j in 1..=m {
        let shift = s * c.powi(j as i32 - 1) * knots[m - j];
        layers.push(ReluLayer::new(2, turn.to_vec(), vec![-shift, 0.0])?);
    }
    Ok(ReluNetwork::new(layers)?)
}

/// Knots `a_0 = 0`, `a_j = a_{j−1} + r_j cos^{j−m}(φ)` that the bend network
/// maps onto `arc`.
pub fn knots_for_arc(arc: &StandardArc) -> Vec<f64> {
    let m = arc.m();
    let c = arc.phi().cos();
    let mut a = Vec::with_capacity(m + 1);
    a.push(0.0);
    for (j, r) in (1..=m).zip(arc.scale_map()) {
        let prev = a[j - 1];
        a.push(prev + r * c.powi(j as i32 - m as i32));
    }
    a
}

/// The four synthesized stages and their composition in ambient dimension.
#[derive(Debug, Clone)]
pub struct Transport {
    /// Full network `R^d → R^d`.
    pub network: ReluNetwork,
    pub delta: f64,
    pub plan: PartitionPlan,
    pub axis: usize,
    pub sign: f64,
    pub projection: ReluLayer,
    pub clip: ReluNetwork,
    pub resize: ReluNetwork,
    pub bend: ReluNetwork,
}

/// Builds a network pushing `mu` onto `target` with every segment carrying
/// mass at least `delta`.
pub fn synthesize_arc_transport(
    mu: &DiscreteMeasure,
    target: &StandardArc,
) -> Result<Transport, SynthesisError> {
    let d = mu.dim();
    if d < 2 {
        return Err(SynthesisError::DimensionTooSmall(d));
    }
    let m = target.m();
    let projection = project_to_axis(mu, m)?;
    let values = signed_nonnegative_values(mu, projection.axis, projection.sign);
    let breakpoints = partition_support(&values, m)?;
    let plan = PartitionPlan::new(breakpoints, knots_for_arc(target))?;

    let delta = plan
        .breakpoints()
        .windows(2)
        .map(|w| {
            mu.mass_where(|p| {
                let v = projection.sign * p[projection.axis];
                v > w[0] && v < w[1]
            })
        })
        .fold(f64::INFINITY, f64::min);

    let clip = clip_network(plan.breakpoints()[m])?;
    let resize = resize_network(&plan)?;
    let bend = bend_network(plan.knots(), m)?;
    let planar = clip.then(&resize)?.then(&bend)?;
    let mut network = ReluNetwork::single(projection.layer.clone());
    for layer in planar.embed_2d_to_d(d)?.layers() {
        network.push(layer.clone())?;
    }
    Ok(Transport {
        network,
        delta,
        plan,
        axis: projection.axis,
        sign: projection.sign,
        projection: projection.layer,
        clip,
        resize,
        bend,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arcs::{arc_metric, is_delta_distributed, recover_arc};
    use approx::assert_abs_diff_eq;

    fn line_measure(n: usize) -> DiscreteMeasure {
        DiscreteMeasure::uniform((0..n).map(|k| vec![k as f64, 0.0]).collect()).unwrap()
    }

    #[test]
    fn projection_picks_diagonal_axis() {
        let mu = DiscreteMeasure::uniform((0..5).map(|k| vec![k as f64; 3]).collect()).unwrap();
        let p = project_to_axis(&mu, 4).unwrap();
        assert_eq!((p.axis, p.sign), (0, 1.0));
        let out = mu.pushforward(&ReluNetwork::single(p.layer)).unwrap();
        assert_eq!(out.len(), 5);
        assert!(out.points().iter().all(|x| x[1] == 0.0 && x[2] == 0.0));
    }

    #[test]
    fn projection_prefers_negative_second_axis() {
        let mu =
            DiscreteMeasure::uniform((1..5).map(|k| vec![0.0, -(k as f64)]).collect()).unwrap();
        let p = project_to_axis(&mu, 3).unwrap();
        assert_eq!((p.axis, p.sign), (1, -1.0));
    }

    #[test]
    fn projection_needs_enough_values() {
        let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            project_to_axis(&mu, 4),
            Err(SynthesisError::NoCoordinate {
                needed: 5,
                found: 2
            })
        ));
    }

    #[test]
    fn clip_examples() {
        let net = clip_network(1.0).unwrap();
        assert_eq!(net.eval(&[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(net.eval(&[0.5, 0.0]).unwrap(), vec![0.5, 0.0]);
        assert_eq!(net.eval(&[-3.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(clip_network(0.0).is_err());
    }

    #[test]
    fn partition_examples() {
        assert_eq!(
            partition_support(&[1.0, 2.0, 3.0], 3).unwrap(),
            vec![0.0, 1.5, 2.5, 4.0]
        );
        assert_eq!(
            partition_support(&[1.0, 2.0, 3.0, 4.0], 1).unwrap(),
            vec![0.0, 2.0]
        );
        assert!(partition_support(&[1.0, 2.0], 3).is_err());
        assert!(partition_support(&[0.0, 1.0, 1.0], 2).is_err());
    }

    #[test]
    fn resize_worked_example() {
        let plan = PartitionPlan::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 3.0]).unwrap();
        let w = resize_weights(&plan);
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], -0.5, epsilon = 1e-15);
        let net = resize_network(&plan).unwrap();
        assert_eq!(net.depth(), 3);
        for (b, a) in [(0.0, 0.0), (1.0, 2.0), (2.0, 3.0)] {
            let y = net.eval(&[b, 0.0]).unwrap();
            assert_abs_diff_eq!(y[0], a, epsilon = 1e-12);
            assert_eq!(y[1], 0.0);
        }
    }

    #[test]
    fn resize_identity_plan() {
        let b = vec![0.0, 0.5, 1.25, 3.0];
        let plan = PartitionPlan::new(b.clone(), b.clone()).unwrap();
        assert!(resize_weights(&plan).iter().all(|w| *w == 0.0));
        let net = resize_network(&plan).unwrap();
        for x in b {
            assert_eq!(net.eval(&[x, 0.0]).unwrap(), vec![x, 0.0]);
        }
    }

    #[test]
    fn bend_two_arc() {
        let net = bend_network(&[0.0, 1.0, 2.0], 2).unwrap();
        let expect = [[0.0, 0.0], [0.5, 0.5], [1.5, 0.5]];
        for (a, v) in [0.0, 1.0, 2.0].iter().zip(expect) {
            let y = net.eval(&[*a, 0.0]).unwrap();
            assert_abs_diff_eq!(y[0], v[0], epsilon = 1e-12);
            assert_abs_diff_eq!(y[1], v[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn bend_matches_scaling_formula() {
        let knots = [0.0, 0.7, 1.1, 2.9, 3.0];
        let m = 4;
        let net = bend_network(&knots, m).unwrap();
        let c = arcs::phi(m).cos();
        let scales: Vec<f64> = (1..=m)
            .map(|i| c.powi((m - i) as i32) * (knots[i] - knots[i - 1]))
            .collect();
        let mut v = [0.0, 0.0];
        for i in 1..=m {
            let u = arcs::direction(i, m);
            v = [v[0] + scales[i - 1] * u[0], v[1] + scales[i - 1] * u[1]];
            let y = net.eval(&[knots[i], 0.0]).unwrap();
            assert_abs_diff_eq!(y[0], v[0], epsilon = 1e-12);
            assert_abs_diff_eq!(y[1], v[1], epsilon = 1e-12);
        }
        assert_eq!(net.eval(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn knots_round_trip_through_bend() {
        let arc = StandardArc::new(vec![2.0, 1.0, 1.0]).unwrap();
        let a = knots_for_arc(&arc);
        let net = bend_network(&a, 3).unwrap();
        for (k, v) in a.iter().zip(arc.vertices()) {
            let y = net.eval(&[*k, 0.0]).unwrap();
            assert_abs_diff_eq!(y[0], v[0], epsilon = 1e-12);
            assert_abs_diff_eq!(y[1], v[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn end_to_end_line() {
        let mu = line_measure(10);
        let arc = StandardArc::new(vec![2.0, 1.0, 1.0]).unwrap();
        let t = synthesize_arc_transport(&mu, &arc).unwrap();
        assert!(t.delta >= 0.1 - 1e-12);
        let out = mu.pushforward(&t.network).unwrap();
        assert_abs_diff_eq!(out.total_mass(), 1.0, epsilon = 1e-12);
        assert!(is_delta_distributed(&out, &arc, t.delta, 1e-9));
        let got = recover_arc(&out, 3, t.delta, 1e-9).unwrap();
        for (x, y) in got.scale_map().iter().zip(arc.scale_map()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
        assert!(arc_metric(&got, &arc).unwrap() < 1e-9);
    }

    #[test]
    fn dirac_pair_splits_across_segments() {
        let mu =
            DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let arc = StandardArc::new(vec![0.5, 1.0]).unwrap();
        let t = synthesize_arc_transport(&mu, &arc).unwrap();
        let out = mu.pushforward(&t.network).unwrap();
        assert_eq!(out.len(), 3);
        assert!(is_delta_distributed(&out, &arc, t.delta, 1e-9));
    }

    #[test]
    fn pipeline_is_idempotent_on_arc_measures() {
        let mu = line_measure(12);
        let arc = StandardArc::new(vec![0.3, 1.7, 0.8, 1.0]).unwrap();
        let first = synthesize_arc_transport(&mu, &arc).unwrap();
        let on_arc = mu.pushforward(&first.network).unwrap();
        let second = synthesize_arc_transport(&on_arc, &arc).unwrap();
        let again = on_arc.pushforward(&second.network).unwrap();
        let got = recover_arc(&again, 4, second.delta, 1e-9).unwrap();
        assert!(arc_metric(&got, &arc).unwrap() < 1e-9);
    }

    #[test]
    fn rejects_small_order_and_dimension() {
        assert!(bend_network(&[0.0, 1.0], 1).is_err());
        let flat = DiscreteMeasure::uniform((0..5).map(|k| vec![k as f64]).collect()).unwrap();
        let arc = StandardArc::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            synthesize_arc_transport(&flat, &arc),
            Err(SynthesisError::DimensionTooSmall(1))
        ));
    }
}
