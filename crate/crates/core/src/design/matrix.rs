use std::collections::HashSet;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::basis::{BasisKind, RSequence};
use crate::error::{Error, Result};
use crate::geometry::DistanceMatrix;

/// One active knot: a column of the candidate distance matrix plus the index
/// of its range parameter in the [`RSequence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RadialKnot {
    pub candidate: usize,
    pub r_index: usize,
}

/// Provenance of one radial column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialColumn {
    pub candidate: usize,
    pub r_index: usize,
    pub r: f64,
}

/// Pre-evaluated non-spatial columns (factor indicators, B-spline blocks).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CovariateBlock {
    pub labels: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl CovariateBlock {
    pub fn new(labels: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != columns.len() {
            return Err(Error::invalid("covariate block labels and columns differ in length"));
        }
        if let Some(len) = columns.first().map(Vec::len) {
            if columns.iter().any(|c| c.len() != len) {
                return Err(Error::invalid("covariate block columns differ in length"));
            }
        }
        Ok(CovariateBlock { labels, columns })
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn rows(&self) -> Option<usize> {
        self.columns.first().map(Vec::len)
    }

    /// Appends the columns of `other`.
    pub fn extend(&mut self, other: CovariateBlock) {
        self.labels.extend(other.labels);
        self.columns.extend(other.columns);
    }
}

/// Column layout: intercept, covariate columns, then one radial column per
/// knot.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub labels: Vec<String>,
    pub n_covariate_columns: usize,
    pub radial: Vec<RadialColumn>,
    pub basis: Option<BasisKind>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    /// Index of the first radial column.
    pub fn radial_offset(&self) -> usize {
        1 + self.n_covariate_columns
    }

    /// Intercept-only design.
    pub fn intercept_only(n: usize) -> Self {
        DesignMatrix {
            x: DMatrix::from_element(n, 1, 1.0),
            labels: vec!["intercept".into()],
            n_covariate_columns: 0,
            radial: Vec::new(),
            basis: None,
        }
    }

    /// Writes the matrix as CSV with column labels in the header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let to_err = |e: csv::Error| Error::Parse { context: "design csv".into(), message: e.to_string() };
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.labels).map_err(to_err)?;
        for row in self.x.row_iter() {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<design csv>".into(), source: e })
    }
}

/// Assembles `[1 | covariates | radial]`.
///
/// `distances` has one row per data point and one column per candidate knot;
/// each knot contributes the basis evaluated on its column at its own `r`.
pub fn build_design(
    knots: &[RadialKnot],
    distances: &DistanceMatrix,
    rseq: &RSequence,
    covariates: Option<&CovariateBlock>,
) -> Result<DesignMatrix> {
    let n = distances.rows();
    let mut seen = HashSet::with_capacity(knots.len());
    for k in knots {
        if !seen.insert(k.candidate) {
            return Err(Error::invalid(format!("duplicate knot index {}", k.candidate)));
        }
        if k.candidate >= distances.cols() {
            return Err(Error::invalid(format!(
                "knot index {} outside {} candidates",
                k.candidate,
                distances.cols()
            )));
        }
        if k.r_index >= rseq.len() {
            return Err(Error::invalid(format!(
                "range index {} outside sequence of length {}",
                k.r_index,
                rseq.len()
            )));
        }
    }
    let n_cov = covariates.map_or(0, CovariateBlock::width);
    if let Some(rows) = covariates.and_then(CovariateBlock::rows) {
        if rows != n {
            return Err(Error::invalid(format!("covariate block has {rows} rows, distances have {n}")));
        }
    }

    let ncols = 1 + n_cov + knots.len();
    let mut x = DMatrix::zeros(n, ncols);
    x.column_mut(0).fill(1.0);
    let mut labels = Vec::with_capacity(ncols);
    labels.push("intercept".to_string());
    if let Some(block) = covariates {
        for (j, (label, col)) in block.labels.iter().zip(&block.columns).enumerate() {
            x.column_mut(1 + j).copy_from_slice(col);
            labels.push(label.clone());
        }
    }
    let kind = rseq.kind();
    let mut radial = Vec::with_capacity(knots.len());
    for (j, k) in knots.iter().enumerate() {
        let r = rseq.get(k.r_index);
        let mut col = x.column_mut(1 + n_cov + j);
        for i in 0..n {
            let h = distances.get(i, k.candidate);
            col[i] = if h.is_finite() { kind.eval(h, r) } else { 0.0 };
        }
        labels.push(format!("knot{}_r{}", k.candidate, k.r_index + 1));
        radial.push(RadialColumn { candidate: k.candidate, r_index: k.r_index, r });
    }
    Ok(DesignMatrix {
        x,
        labels,
        n_covariate_columns: n_cov,
        radial,
        basis: (!knots.is_empty()).then_some(kind),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{euclidean_distances, PointSet};

    fn setup() -> (DistanceMatrix, RSequence) {
        let pts = PointSet::from_xy(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, 0.5)]).unwrap();
        let h = euclidean_distances(&pts, &pts).unwrap();
        let rseq = RSequence::new(BasisKind::Exponential, vec![0.5, 1.0, 2.0]).unwrap();
        (h, rseq)
    }

    #[test]
    fn knot_at_data_point_gives_one() {
        let (h, rseq) = setup();
        let d = build_design(&[RadialKnot { candidate: 2, r_index: 1 }], &h, &rseq, None).unwrap();
        assert_eq!(d.x[(2, 1)], 1.0);
        assert!(d.x.column(1).iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn null_design_is_intercept() {
        let (h, rseq) = setup();
        let d = build_design(&[], &h, &rseq, None).unwrap();
        assert_eq!(d.ncols(), 1);
        assert!(d.x.iter().all(|v| *v == 1.0));
        assert_eq!(d.basis, None);
    }

    #[test]
    fn shape_and_provenance() {
        let (h, rseq) = setup();
        let knots = [
            RadialKnot { candidate: 0, r_index: 0 },
            RadialKnot { candidate: 3, r_index: 2 },
            RadialKnot { candidate: 4, r_index: 1 },
        ];
        let d = build_design(&knots, &h, &rseq, None).unwrap();
        assert_eq!((d.nrows(), d.ncols()), (5, 4));
        assert_eq!(
            d.radial.iter().map(|c| (c.candidate, c.r_index)).collect::<Vec<_>>(),
            vec![(0, 0), (3, 2), (4, 1)]
        );
        assert_eq!(d.labels, vec!["intercept", "knot0_r1", "knot3_r3", "knot4_r2"]);
    }

    #[test]
    fn duplicate_knots_rejected() {
        let (h, rseq) = setup();
        let knots = [RadialKnot { candidate: 1, r_index: 0 }, RadialKnot { candidate: 1, r_index: 2 }];
        assert!(build_design(&knots, &h, &rseq, None).is_err());
    }

    #[test]
    fn covariates_sit_between_intercept_and_radial() {
        let (h, rseq) = setup();
        let block = CovariateBlock::new(vec!["water".into()], vec![vec![0.0, 1.0, 0.0, 1.0, 1.0]]).unwrap();
        let d = build_design(&[RadialKnot { candidate: 0, r_index: 0 }], &h, &rseq, Some(&block)).unwrap();
        assert_eq!(d.labels, vec!["intercept", "water", "knot0_r1"]);
        assert_eq!(d.radial_offset(), 2);
        assert_eq!(d.x[(1, 1)], 1.0);
    }

    #[test]
    fn deterministic() {
        let (h, rseq) = setup();
        let knots = [RadialKnot { candidate: 4, r_index: 1 }, RadialKnot { candidate: 0, r_index: 2 }];
        let a = build_design(&knots, &h, &rseq, None).unwrap();
        let b = build_design(&knots, &h, &rseq, None).unwrap();
        assert!(a.x.iter().zip(b.x.iter()).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
}
