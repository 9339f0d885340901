//! Numerical toolkit for contraction analysis of time-varying ODEs: matrix
//! measures, example systems, trajectory simulation and property checks.

pub mod domain;
pub mod format;
pub mod error;
pub mod matrix;
pub mod measures;
pub mod models;
pub mod simulate;
pub mod verify;

pub use domain::{DomainKind, DomainSpec, NestedFamily};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use measures::{BaseNorm, MeasureSpec, RegionBound, RegionGrid};
pub use models::{BioParams, ModelSpec, SystemModel};
