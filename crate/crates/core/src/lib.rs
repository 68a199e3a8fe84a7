//! Numerical analysis of cascade dynamical systems on flat product manifolds.
//!
//! The crate simulates autonomous vector fields on products of circle and
//! line factors, locates and classifies equilibria, approximates chain
//! recurrent sets through box covers and transition graphs, and assembles
//! sampled evidence for cascade stability into graded certification reports:
//!
//! - [`geometry`]: chart coordinates, wrapping, flat metrics, distances.
//! - [`dynamics`]: vector fields, cascades, adaptive integration, energy
//!   functions for gradient and dissipative mechanical systems.
//! - [`equilibria`]: Newton search over a region, linearization, eigenvalue
//!   classification, and the block-triangular spectrum check for cascades.
//! - [`chainrec`]: box covers, time-T transition graphs, strongly connected
//!   components, and verdicts on whether recurrence is confined to equilibria.
//! - [`certify`]: growth-rate certificates for the interconnection term,
//!   decay envelopes, comparison bounds, Monte Carlo basin estimation, and
//!   report assembly.
//! - [`builtins`]: named example systems addressable from the command line.
//!
//! Verdicts mean "verified on sampled evidence at the stated parameters",
//! never "proved"; every report records the tolerances, horizons, depths,
//! and seeds it was produced with.
//!
//! ```
//! use std::sync::Arc;
//! use cascade_core::dynamics::{flow_endpoint, SystemDef, SystemKind};
//! use cascade_core::geometry::{dist, Factor, PointCoords, SpaceSpec};
//!
//! // Damped pendulum on the tangent bundle of the circle.
//! let space = SpaceSpec::euclidean(vec![Factor::Circle, Factor::Line]);
//! let pendulum = SystemDef::new(
//!     space,
//!     SystemKind::Mechanical,
//!     Arc::new(|s: &[f64], out: &mut [f64]| {
//!         out[0] = s[1];
//!         out[1] = -(s[0].sin() + s[1]);
//!     }),
//! );
//!
//! let end = flow_endpoint(&pendulum, &PointCoords(vec![3.0, 0.0]), 50.0, 1e-9).unwrap();
//! let origin = PointCoords(vec![0.0, 0.0]);
//! assert!(dist(pendulum.space(), &end, &origin).unwrap() < 1e-4);
//! ```

pub mod builtins;
pub mod certify;
pub mod chainrec;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod geometry;
pub mod rng;

pub use error::{CoreError, Result};
