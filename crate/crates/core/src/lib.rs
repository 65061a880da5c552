//! Shape-constrained, design-based estimation of survey domain means.
//!
//! Hájek domain means are projected onto the cone `{θ : A θ ≥ 0}` of an
//! irreducible constraint matrix `A` in the metric of the estimated relative
//! domain sizes. Variances come from Taylor linearization with the projection
//! face held fixed, or from replicate weights.

pub mod cone;
pub mod constraints;
pub mod error;
pub mod estimation;
mod linalg;
pub mod variance;

pub use error::{Error, Result};
