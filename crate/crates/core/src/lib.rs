//! Adaptive isogeometric analysis on multi-patch geometries with T-junctions.

#![allow(clippy::needless_range_loop)]

pub mod adapt;
pub mod app;
pub mod assembly;
pub mod basis;
pub mod checks;
pub mod coupling;
pub mod error;
pub mod field;
pub mod geometry;
pub mod problems;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod splines;

pub use error::{Error, Result};
