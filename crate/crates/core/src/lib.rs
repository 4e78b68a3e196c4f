//! Mean curvature flow of spacelike graphs in de Sitter space.
//!
//! Graphs `t = u(x)` over `R^n` in the metric `e^{2t}|dx|^2 - dt^2` are evolved with
//! an explicit finite-difference scheme and checked against the evolution identities
//! and estimates that govern the flow.

pub mod discrete;
pub mod dsgeom;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod io;
pub mod oracles;

pub use error::{Error, Result};
