use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// B-spline basis matrix with clamped boundary knots at `boundary`.
///
/// Returns one row per `x` and `interior.len() + degree + 1` columns. Values
/// outside the boundary are clamped to it. Uses the Cox–de Boor recurrence in
/// its triangular (non-zero functions only) form.
pub fn bspline_basis(x: &[f64], interior: &[f64], degree: usize, boundary: (f64, f64)) -> Result<DMatrix<f64>> {
    let (lo, hi) = boundary;
    if degree < 1 {
        return Err(Error::invalid("B-spline degree must be at least 1"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!("invalid B-spline boundary [{lo}, {hi}]")));
    }
    if interior.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("interior knots must be strictly increasing"));
    }
    if let Some(k) = interior.iter().find(|&&k| !(k > lo && k < hi)) {
        return Err(Error::invalid(format!("interior knot {k} is outside ({lo}, {hi})")));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("cannot evaluate B-spline at {v}")));
    }

    let mut knots = vec![lo; degree + 1];
    knots.extend_from_slice(interior);
    knots.extend(std::iter::repeat_n(hi, degree + 1));
    let n_basis = interior.len() + degree + 1;

    let mut out = DMatrix::zeros(x.len(), n_basis);
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    let mut values = vec![0.0; degree + 1];
    for (row, &xv) in x.iter().enumerate() {
        let u = xv.clamp(lo, hi);
        // Last span is closed on the right so x == hi evaluates.
        let span = if u >= hi {
            n_basis - 1
        } else {
            degree + knots[degree + 1..=n_basis].partition_point(|&k| k <= u)
        };
        values[0] = 1.0;
        for j in 1..=degree {
            left[j] = u - knots[span + 1 - j];
            right[j] = knots[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { values[r] / denom };
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        for (j, v) in values.iter().enumerate() {
            out[(row, span - degree + j)] = *v;
        }
    }
    Ok(out)
}
