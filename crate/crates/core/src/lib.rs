//! Numerical engine for conformal and isometric pairs of submanifolds.
//!
//! Immersions are maps from a chart grid into a flat space, evaluated as
//! truncated Taylor jets. On top of that sit the light-cone model of
//! conformal geometry, conformal invariants of single immersions, the
//! fiberwise construction for isometric pairs, ruled extensions, and a
//! manifest-driven command line runner.

pub mod chart;
pub mod cli;
pub mod conformal;
pub mod error;
pub mod expr;
pub mod extension;
pub mod geometry;
pub mod jets;
pub mod lightcone;
pub mod linalg;
pub mod pair;
pub mod taylor;

pub use error::{Error, Result};
