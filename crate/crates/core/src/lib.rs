//! Spatially adaptive knot selection for bivariate radial-basis splines fitted
//! as downweighted Poisson point-process models.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: points, polygons, Euclidean and obstacle-aware geodesic
//!   distances, distance-to-feature covariates.
//! * [`design`]: radial and B-spline bases, range-parameter sequences and
//!   design-matrix assembly.
//! * [`fit`]: weighted Poisson IRLS, information criteria and prediction.
//! * [`ppm`]: pseudo-absence grids, quadrature weights and grid-resolution
//!   convergence.
//! * [`salsa`]: the adaptive knot search (initialise, simplify, exchange,
//!   improve, range selection).
//! * [`modelavg`]: the fixed-knot model-averaging baseline with AICc weights.
//! * [`terms`]: one-dimensional covariate terms (smooths and factor thresholds).
//! * [`io`]: CSV, GeoJSON and JSON document formats shared with the CLI.

// Numeric kernels index several parallel arrays; NaN-aware `!(a > b)` checks are deliberate.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod design;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod io;
pub mod modelavg;
pub mod ppm;
pub mod salsa;
pub mod terms;

pub use error::{Error, Result};
