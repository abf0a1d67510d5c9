//! Contextuality toolkit for multiqudit ray geometry.
//!
//! The crate builds and checks the objects that connect Kochen-Specker
//! contextuality with entanglement on composite systems:
//!
//! * [`rays`] — complex rays, tensor products, Bloch coordinates and
//!   product-structure detection;
//! * [`scenario`] — contextuality scenarios (hypergraphs), KS-colouring
//!   search and classicality (convex-hull) tests;
//! * [`colouring`] — the all-north colouring of product rays, product-basis
//!   generation and valuations on observables with product eigenbases;
//! * [`ontmodel`] — an executable outcome-deterministic hidden-variable
//!   model for product states and unentangled measurements;
//! * [`catalog`] — concrete ray families (Peres 33/57, Peres-Mermin 24,
//!   a two-qubit KS set without fully entangled bases, qubit-qutrit
//!   unentangled KS sets);
//! * [`bell`] — Bell scenarios, local polytopes and the Bell-scenario to
//!   contextuality-scenario correspondence.
//!
//! All values are immutable after construction and safe to share across
//! threads. Randomised operations take explicit seeds and reproduce the
//! same results for the same seed on every platform.

pub mod bell;
pub mod catalog;
pub mod cli;
pub mod colouring;
pub mod linalg;
pub mod ontmodel;
pub mod rays;
pub mod scenario;

mod simplex;

pub use rays::{Basis, BlochPoint, ProductRay, Ray};
pub use scenario::{Colouring, DensityOperator, ProbModel, RayAssignment, Scenario};
