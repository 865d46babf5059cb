//! Constructive machinery for probability measures pushed through ReLU
//! networks.
//!
//! The crate is organised around a handful of small, pure building blocks:
//!
//! * [`measures`]: finite-support probability measures, pushforwards and
//!   Prokhorov distances.
//! * [`relu_net`]: square ReLU layers `x ↦ max(0, Wx + b)` and their
//!   composition.
//! * [`arcs`]: standard m-arcs (polygonal chains with a fixed turning angle),
//!   their metric, and recovery of the arc carrying a measure.
//! * [`synthesis`]: explicit ReLU networks that transport a measure onto any
//!   prescribed standard arc.
//! * [`canon1d`]: exact canonicalization of one-dimensional ReLU networks and
//!   the six-parameter invariant family built from it.
//! * [`families`]: Dirac mixtures, the space-filling-curve parametrisation and
//!   tree-walk families for finite layer sets.
//! * [`fixtures`]: seeded random generators shared by the CLI suites and the
//!   test harnesses.

pub mod arcs;
pub mod canon1d;
pub mod families;
pub mod fixtures;
pub mod measures;
pub mod relu_net;
pub mod synthesis;

pub use arcs::{ArcError, StandardArc};
pub use canon1d::{Canon1DForm, CanonError, Pwl1D, ThreeLayerParams};
pub use measures::{DiscreteMeasure, MeasureError};
pub use relu_net::{NetError, ReluLayer, ReluNetwork};
pub use synthesis::{PartitionPlan, SynthesisError, Transport};
