//! Simulation laboratory for the orthant and half-orthant percolation models
//! on Z^d.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: vertices, edge semantics, reproducible per-site randomness;
//! * [`cone`]: exact cone, ball and slab geometry;
//! * [`reach`]: window-truncated reachability, escape events and profiles;
//! * [`explore`]: the exploration decision trees `T_k`;
//! * [`oracle`]: exact enumeration on small windows;
//! * [`osss`]: influences, revealments and the OSSS / Russo checks;
//! * [`estimate`]: Monte Carlo curves, decay fits, critical points, shape;
//! * [`walk`]: the random walk on the orthant cluster.

pub mod cone;
pub mod error;
pub mod estimate;
pub mod explore;
pub mod lattice;
pub mod oracle;
pub mod osss;
pub mod reach;
pub mod walk;

pub use cone::{Cone, Eta, Window};
pub use error::Error;
pub use lattice::{ModelKind, SiteField, Sites, Vertex};
