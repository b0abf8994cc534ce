//! Small dense kernels used by the IRLS loop.

use nalgebra::{DMatrix, DVector};

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `X^T diag(weights) X`, exploiting symmetry.
pub(crate) fn weighted_gram(x: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let mut scaled = vec![0.0; n * p];
    for (dst, col) in scaled.chunks_exact_mut(n).zip(x.as_slice().chunks_exact(n)) {
        for ((d, v), w) in dst.iter_mut().zip(col).zip(weights) {
            *d = v * w;
        }
    }
    let mut g = DMatrix::zeros(p, p);
    for j in 0..p {
        let xj = x.column(j);
        let xj = xj.as_slice();
        for k in 0..=j {
            let v = dot(xj, &scaled[k * n..(k + 1) * n]);
            g[(j, k)] = v;
            g[(k, j)] = v;
        }
    }
    g
}

/// `X^T v`.
pub(crate) fn xt_vec(x: &DMatrix<f64>, v: &[f64]) -> DVector<f64> {
    DVector::from_iterator(x.ncols(), (0..x.ncols()).map(|j| dot(x.column(j).as_slice(), v)))
}

/// `X b`.
pub(crate) fn x_vec(x: &DMatrix<f64>, b: &DVector<f64>) -> Vec<f64> {
    let mut out = vec![0.0; x.nrows()];
    for (j, &bj) in b.iter().enumerate() {
        if bj == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(x.column(j).as_slice()) {
            *o += v * bj;
        }
    }
    out
}

/// Columns left unpivoted when a diagonally pivoted Cholesky of the
/// unit-diagonal scaled `gram` stops at a pivot below `tol * largest pivot`.
/// Empty when the matrix is numerically full rank.
pub(crate) fn dependent_columns(gram: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    let p = gram.nrows();
    let mut zero_cols = Vec::new();
    let scale: Vec<f64> = (0..p)
        .map(|j| {
            let d = gram[(j, j)];
            if d > 0.0 && d.is_finite() {
                1.0 / d.sqrt()
            } else {
                zero_cols.push(j);
                0.0
            }
        })
        .collect();
    if !zero_cols.is_empty() {
        return zero_cols;
    }
    let mut a = DMatrix::from_fn(p, p, |i, j| gram[(i, j)] * scale[i] * scale[j]);
    let mut perm: Vec<usize> = (0..p).collect();
    let mut max_pivot = 0.0f64;
    for k in 0..p {
        let (best, pivot) = (k..p)
            .map(|i| (i, a[(i, i)]))
            .fold((k, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        if k == 0 {
            max_pivot = pivot;
        }
        if !(pivot > tol * max_pivot) {
            let mut rest: Vec<usize> = perm[k..].to_vec();
            rest.sort_unstable();
            return rest;
        }
        if best != k {
            a.swap_rows(k, best);
            a.swap_columns(k, best);
            perm.swap(k, best);
        }
        let d = pivot.sqrt();
        a[(k, k)] = d;
        for i in (k + 1)..p {
            a[(i, k)] /= d;
        }
        for j in (k + 1)..p {
            let ljk = a[(j, k)];
            for i in j..p {
                let v = a[(i, k)] * ljk;
                a[(i, j)] -= v;
            }
        }
        for j in (k + 1)..p {
            for i in j..p {
                a[(j, i)] = a[(i, j)];
            }
        }
    }
    Vec::new()
}
