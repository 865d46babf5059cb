//! Canonical forms of one-dimensional ReLU networks.
//!
//! Any composition of scalar layers `x ↦ ρ(w x + b)` is constant, a bounded
//! ramp between two constants, or a knee (constant on one side, affine on
//! the other). [`classify`] finds the form by composing the layers
//! symbolically and [`to_three_layer`] writes it back as a three-layer
//! network, which gives the six-parameter family in [`Family1D`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{DiscreteMeasure, MeasureError};
use crate::relu_net::{NetError, ReluLayer, ReluNetwork};

/// Relative tolerance for merging collinear pieces.
pub const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CanonError {
    #[error("canonicalization needs a 1-dimensional network, got dimension {0}")]
    NotOneDimensional(usize),
    #[error("composition has {0} pieces after merging; expected at most 3")]
    Unclassifiable(usize),
    #[error("prototype support domain must be a finite interval with lo < hi")]
    InvalidDomain,
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Continuous piecewise-affine function of one variable. Piece `i` is
/// `x ↦ slope_i · x + intercept_i` on `[breakpoints[i-1], breakpoints[i]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pwl1D {
    pieces: Vec<(f64, f64)>,
    breakpoints: Vec<f64>,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= COLLINEAR_TOL * a.abs().max(b.abs()).max(1.0)
}

impl Pwl1D {
    pub fn identity() -> Self {
        Self {
            pieces: vec![(1.0, 0.0)],
            breakpoints: Vec::new(),
        }
    }

    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.breakpoints.partition_point(|b| *b < x);
        let (s, t) = self.pieces[i];
        s * x + t
    }

    fn bounds(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 {
            f64::NEG_INFINITY
        } else {
            self.breakpoints[i - 1]
        };
        let hi = self.breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    /// `ρ(w · self + b)`.
    pub fn apply_layer(&self, w: f64, b: f64) -> Self {
        let mut pieces = Vec::new();
        let mut breakpoints = Vec::new();
        let mut emit = |piece: (f64, f64), end: Option<f64>| {
            pieces.push(piece);
            if let Some(e) = end {
                breakpoints.push(e);
            }
        };
        let n = self.pieces.len();
        for (i, &(s, t)) in self.pieces.iter().enumerate() {
            let (lo, hi) = self.bounds(i);
            let end = (i + 1 < n).then_some(hi);
            let (ns, nt) = (w * s, w * t + b);
            let clamp = |p: (f64, f64)| {
                if p.0 == 0.0 && p.1 < 0.0 {
                    (0.0, 0.0)
                } else {
                    p
                }
            };
            if ns == 0.0 {
                emit(clamp((0.0, nt)), end);
                continue;
            }
            let root = -nt / ns;
            if root > lo && root < hi {
                let (left, right) = if ns > 0.0 {
                    ((0.0, 0.0), (ns, nt))
                } else {
                    ((ns, nt), (0.0, 0.0))
                };
                emit(left, Some(root));
                emit(right, end);
            } else {
                // No sign change inside; the side of the root decides.
                let positive = if root <= lo { ns > 0.0 } else { ns < 0.0 };
                emit(if positive { (ns, nt) } else { (0.0, 0.0) }, end);
            }
        }
        let mut out = Self {
            pieces,
            breakpoints,
        };
        out.simplify();
        out
    }

    /// Merges adjacent collinear pieces and drops pieces of zero width.
    fn simplify(&mut self) {
        let mut pieces = vec![self.pieces[0]];
        let mut breakpoints: Vec<f64> = Vec::new();
        for (i, &p) in self.pieces.iter().enumerate().skip(1) {
            let at = self.breakpoints[i - 1];
            if breakpoints.last().is_some_and(|&b| at <= b) {
                // Zero-width predecessor: replace it.
                *pieces.last_mut().unwrap() = p;
                continue;
            }
            let last = *pieces.last().unwrap();
            if close(last.0, p.0) && close(last.1, p.1) {
                continue;
            }
            breakpoints.push(at);
            pieces.push(p);
        }
        // A replaced piece can leave two collinear neighbours behind.
        let mut i = 1;
        while i < pieces.len() {
            if close(pieces[i - 1].0, pieces[i].0) && close(pieces[i - 1].1, pieces[i].1) {
                pieces.remove(i);
                breakpoints.remove(i - 1);
            } else {
                i += 1;
            }
        }
        self.pieces = pieces;
        self.breakpoints = breakpoints;
    }

    pub fn from_network(net: &ReluNetwork) -> Result<Self, CanonError> {
        if net.dim() != 1 {
            return Err(CanonError::NotOneDimensional(net.dim()));
        }
        Ok(net.layers().iter().fold(Self::identity(), |f, l| {
            f.apply_layer(l.weight(0, 0), l.bias()[0])
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form")]
pub enum Canon1DForm {
    Constant {
        c: f64,
    },
    /// `c1` left of `a1`, `c2` right of `a2`, affine in between.
    BoundedRamp {
        c1: f64,
        c2: f64,
        a1: f64,
        a2: f64,
    },
    /// `c` where `w (x − a) ≤ 0`, `c + w (x − a)` elsewhere.
    Knee {
        c: f64,
        a: f64,
        w: f64,
    },
}

impl Canon1DForm {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Constant { c } => c,
            Self::BoundedRamp { c1, c2, a1, a2 } => {
                if x <= a1 {
                    c1
                } else if x >= a2 {
                    c2
                } else {
                    c1 + (c2 - c1) / (a2 - a1) * (x - a1)
                }
            }
            Self::Knee { c, a, w } => c + (w * (x - a)).max(0.0),
        }
    }

    /// Same variant with every parameter within `tol` (relative above 1).
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let near = |a: f64, b: f64| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0);
        match (*self, *other) {
            (Self::Constant { c: x }, Self::Constant { c: y }) => near(x, y),
            (
                Self::BoundedRamp { c1, c2, a1, a2 },
                Self::BoundedRamp {
                    c1: d1,
                    c2: d2,
                    a1: b1,
                    a2: b2,
                },
            ) => near(c1, d1) && near(c2, d2) && near(a1, b1) && near(a2, b2),
            (
                Self::Knee { c, a, w },
                Self::Knee {
                    c: c2,
                    a: a2,
                    w: w2,
                },
            ) => near(c, c2) && near(a, a2) && near(w, w2),
            _ => false,
        }
    }

    /// Points where the form changes slope.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::Constant { .. } => Vec::new(),
            Self::BoundedRamp { a1, a2, .. } => vec![a1, a2],
            Self::Knee { a, .. } => vec![a],
        }
    }
}

/// `(w_1, b_1, w_2, b_2, w_3, b_3)` of a three-layer scalar network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeLayerParams {
    pub w1: f64,
    pub b1: f64,
    pub w2: f64,
    pub b2: f64,
    pub w3: f64,
    pub b3: f64,
}

impl ThreeLayerParams {
    pub fn from_array(p: [f64; 6]) -> Self {
        Self {
            w1: p[0],
            b1: p[1],
            w2: p[2],
            b2: p[3],
            w3: p[4],
            b3: p[5],
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]
    }

    pub fn to_network(&self) -> ReluNetwork {
        let layers = vec![
            ReluLayer::scalar(self.w1, self.b1),
            ReluLayer::scalar(self.w2, self.b2),
            ReluLayer::scalar(self.w3, self.b3),
        ];
        ReluNetwork::new(layers).expect("three scalar layers")
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Symbolic composition followed by pattern matching.
pub fn classify(net: &ReluNetwork) -> Result<Canon1DForm, CanonError> {
    classify_pwl(&Pwl1D::from_network(net)?)
}

pub fn classify_pwl(f: &Pwl1D) -> Result<Canon1DForm, CanonError> {
    let p: Vec<(f64, f64)> = f
        .pieces()
        .iter()
        .map(|&(s, t)| (s + 0.0, t + 0.0))
        .collect();
    let b: Vec<f64> = f.breakpoints().iter().map(|x| x + 0.0).collect();
    match p.len() {
        1 if p[0].0 == 0.0 => Ok(Canon1DForm::Constant { c: p[0].1 }),
        2 if p[0].0 == 0.0 => Ok(Canon1DForm::Knee {
            c: p[0].1,
            a: b[0],
            w: p[1].0,
        }),
        2 if p[1].0 == 0.0 => Ok(Canon1DForm::Knee {
            c: p[1].1,
            a: b[0],
            w: p[0].0,
        }),
        3 if p[0].0 == 0.0 && p[2].0 == 0.0 => Ok(Canon1DForm::BoundedRamp {
            c1: p[0].1,
            c2: p[2].1,
            a1: b[0],
            a2: b[1],
        }),
        n => Err(CanonError::Unclassifiable(n)),
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Three-layer network realising `form` exactly. Constants go through the
/// bounded formulas with `c1 = c2`.
pub fn to_three_layer(form: &Canon1DForm) -> ThreeLayerParams {
    let raw = match *form {
        Canon1DForm::Constant { c } => bounded(c, c, 0.0, 1.0),
        Canon1DForm::BoundedRamp { c1, c2, a1, a2 } => bounded(c1, c2, a1, a2),
        Canon1DForm::Knee { c, a, w } => [sign(w), -sign(w) * a, w.abs(), c, 1.0, 0.0],
    };
    // Adding zero turns any −0.0 into +0.0.
    ThreeLayerParams::from_array(raw.map(|v| v + 0.0))
}

fn bounded(c1: f64, c2: f64, a1: f64, a2: f64) -> [f64; 6] {
    let jump = (c2 - c1).abs();
    [1.0, -a1, -jump / (a2 - a1), jump, -sign(c2 - c1), c2]
}

/// The six-parameter family `θ ↦ R(θ)_* μ_0` with prototype `μ_0` on `K`.
#[derive(Debug, Clone)]
pub struct Family1D {
    mu0: DiscreteMeasure,
    domain: (f64, f64),
}

impl Default for Family1D {
    fn default() -> Self {
        let mu0 = DiscreteMeasure::uniform((0..10).map(|k| vec![k as f64 + 0.5]).collect())
            .expect("ten distinct atoms");
        Self {
            mu0,
            domain: (0.0, 10.0),
        }
    }
}

impl Family1D {
    pub fn new(mu0: DiscreteMeasure, domain: (f64, f64)) -> Result<Self, CanonError> {
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(CanonError::InvalidDomain);
        }
        if mu0.dim() != 1 {
            return Err(CanonError::NotOneDimensional(mu0.dim()));
        }
        if mu0.points().iter().any(|p| p[0] < lo || p[0] > hi) {
            return Err(CanonError::InvalidDomain);
        }
        Ok(Self { mu0, domain })
    }

    pub fn prototype(&self) -> &DiscreteMeasure {
        &self.mu0
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// `p(θ)`.
    pub fn measure(&self, theta: &ThreeLayerParams) -> Result<DiscreteMeasure, CanonError> {
        Ok(self.mu0.pushforward(&theta.to_network())?)
    }

    /// Parameters `ω` with `p(ω) = ρ(w · + b)_* p(θ)`.
    pub fn step(
        &self,
        theta: &ThreeLayerParams,
        w: f64,
        b: f64,
    ) -> Result<ThreeLayerParams, CanonError> {
        family1d_step(theta, w, b)
    }
}

/// Canonicalizes `R(θ)` followed by the layer `(w, b)`.
pub fn family1d_step(
    theta: &ThreeLayerParams,
    w: f64,
    b: f64,
) -> Result<ThreeLayerParams, CanonError> {
    let mut net = theta.to_network();
    net.push(ReluLayer::scalar(w, b))?;
    Ok(to_three_layer(&classify(&net)?))
}
