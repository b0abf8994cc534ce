//! Basis functions and design-matrix assembly.

mod basis;
mod bspline;
mod matrix;

pub use basis::{quantile, r_sequence, radial_basis, BasisKind, RSequence};
pub use bspline::bspline_basis;
pub use matrix::{build_design, CovariateBlock, DesignMatrix, RadialColumn, RadialKnot};
