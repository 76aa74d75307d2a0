//! Numerical laboratory for the focusing cubic Schrödinger equation in three
//! dimensions, outside a ball with Dirichlet data or on all of space, for
//! radial solutions.

pub mod checkpoint;
pub mod config;
pub mod cutoffs;
pub mod detector;
pub mod error;
pub mod evolve;
pub mod experiment;
pub mod grid;
pub mod ground_state;
pub mod morawetz;
pub mod numerics;
pub mod random;
pub mod series;
pub mod tridiag;

pub use error::{NlsError, Result};
pub use grid::{NormSet, RadialField, RadialGrid};
