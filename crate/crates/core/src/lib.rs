//! Annealed-complexity phase diagrams for the elastic manifold and for soft
//! spins in an anisotropic well.
//!
//! The crate is organised bottom-up: [`measures`] holds the measure types,
//! [`freeconv`] the semicircle free convolution, [`mde`] the vector Dyson
//! equation of the elastic-manifold block model, [`complexity`] the phase
//! diagrams built on top of them and [`montecarlo`] the sampling checks.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;
pub mod cli;
pub mod complexity;
pub mod freeconv;
pub mod mde;
pub mod measures;
pub mod montecarlo;
pub mod numerics;

pub use error::{AtlasError, Result};
pub use measures::{DiscreteMeasure, GriddedDensity, LatticeSpec, MeasureSpec};
