//! Planar continuum percolation laboratory.
//!
//! The crate samples three families of random planar sets and measures
//! connectivity events on them:
//!
//! * the Poisson Boolean model, a union of discs with random radii,
//! * weighted Poisson Voronoi percolation, where each seed carries a
//!   "gravitational pull" dividing its distance,
//! * confetti (dead leaves) percolation, where coloured discs fall in time
//!   order and the first one to cover a point decides its colour.
//!
//! Every event on the Boolean model is decided exactly: crossings and
//! occupied arms with a clipped-disc union-find, vacant crossings through
//! planar duality, vacant arms and circuits through the winding number of
//! occupied loops. Events on the colour-field models use a rasterizer with
//! refinement.
//!
//! On top of the detectors sit the Monte Carlo estimators in
//! [`estimators`]: Wilson intervals with additive truncation bias,
//! finite-size classification and bisection of the critical intensity,
//! arm-exponent fits, correlation estimates and a Margulis–Russo check.


// Validation writes `!(x > 0.0)` on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod events;
pub mod geometry;
pub mod models;
pub mod oracle;
pub mod pointprocess;

pub use distributions::{RadiusLaw, TailBudget};
pub use error::{Error, Result};
pub use estimators::{Estimate, Runner};
pub use events::{DetectionResult, EventSpec, Phase};
pub use geometry::{Disc, Point, Rect, SupBox};
pub use models::{BooleanModel, ConfettiModel, ModelSpec, StepFunction, VoronoiModel};
pub use pointprocess::{MarkedPoint, Realization, RngStream};
