use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::point::PointSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricTag {
    Euclidean,
    Geodesic,
}

impl MetricTag {
    fn code(self) -> u8 {
        match self {
            MetricTag::Euclidean => 0,
            MetricTag::Geodesic => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(MetricTag::Euclidean),
            1 => Ok(MetricTag::Geodesic),
            other => Err(Error::Parse {
                context: "distance matrix header".into(),
                message: format!("unknown metric tag {other}"),
            }),
        }
    }
}

impl std::fmt::Display for MetricTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MetricTag::Euclidean => "euclidean",
            MetricTag::Geodesic => "geodesic",
        })
    }
}

impl std::str::FromStr for MetricTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(MetricTag::Euclidean),
            "geodesic" => Ok(MetricTag::Geodesic),
            other => Err(Error::invalid(format!("unknown distance metric '{other}'"))),
        }
    }
}

/// Dense row-major distance matrix in kilometres.
///
/// Unreachable geodesic pairs hold `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    metric: MetricTag,
}

impl DistanceMatrix {
    pub fn from_row_major(rows: usize, cols: usize, values: Vec<f64>, metric: MetricTag) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{} values for a {rows}x{cols} distance matrix",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::invalid(format!("distance entry {v} is not a non-negative number")));
        }
        Ok(DistanceMatrix { rows, cols, values, metric })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn metric(&self) -> MetricTag {
        self.metric
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    /// Copies column `j` into a new vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Restricts to the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> DistanceMatrix {
        let mut values = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            let row = self.row(i);
            values.extend(cols.iter().map(|&j| row[j]));
        }
        DistanceMatrix { rows: self.rows, cols: cols.len(), values, metric: self.metric }
    }

    pub fn select_rows(&self, rows: &[usize]) -> DistanceMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.cols);
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        DistanceMatrix { rows: rows.len(), cols: self.cols, values, metric: self.metric }
    }

    pub fn transpose(&self) -> DistanceMatrix {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.cols {
            values.extend((0..self.rows).map(|i| self.get(i, j)));
        }
        DistanceMatrix { rows: self.cols, cols: self.rows, values, metric: self.metric }
    }

    /// Largest absolute asymmetry `|d(i,j) - d(j,i)|` for a square matrix.
    pub fn max_asymmetry(&self) -> Option<f64> {
        if self.rows != self.cols {
            return None;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let (a, b) = (self.get(i, j), self.get(j, i));
                if a.is_finite() || b.is_finite() {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        Some(worst)
    }

    /// Binary export: little-endian `u64` rows, `u64` cols, `u8` metric tag
    /// (0 euclidean, 1 geodesic), then row-major `f64` values.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&(self.rows as u64).to_le_bytes())?;
        out.write_all(&(self.cols as u64).to_le_bytes())?;
        out.write_all(&[self.metric.code()])?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let parse_err = |e: std::io::Error| Error::Parse {
            context: "distance matrix".into(),
            message: e.to_string(),
        };
        let mut u64buf = [0u8; 8];
        input.read_exact(&mut u64buf).map_err(parse_err)?;
        let rows = u64::from_le_bytes(u64buf) as usize;
        input.read_exact(&mut u64buf).map_err(parse_err)?;
        let cols = u64::from_le_bytes(u64buf) as usize;
        let mut tag = [0u8; 1];
        input.read_exact(&mut tag).map_err(parse_err)?;
        let metric = MetricTag::from_code(tag[0])?;
        let n = rows.checked_mul(cols).ok_or_else(|| Error::Parse {
            context: "distance matrix".into(),
            message: "dimension overflow".into(),
        })?;
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            input.read_exact(&mut u64buf).map_err(parse_err)?;
            values.push(f64::from_le_bytes(u64buf));
        }
        DistanceMatrix::from_row_major(rows, cols, values, metric)
    }

    /// CSV export with a `row` index column followed by `c0..c{n-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["row".to_string()];
        header.extend((0..self.cols).map(|j| format!("c{j}")));
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.rows {
            let mut rec = vec![i.to_string()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse { context: "csv".into(), message: e.to_string() }
}

/// Straight-line distances between every point of `a` (rows) and `b` (columns).
pub fn euclidean_distances(a: &PointSet, b: &PointSet) -> Result<DistanceMatrix> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("euclidean distances need non-empty point sets"));
    }
    let mut values = Vec::with_capacity(a.len() * b.len());
    for p in a {
        values.extend(b.iter().map(|q| p.distance(q)));
    }
    Ok(DistanceMatrix { rows: a.len(), cols: b.len(), values, metric: MetricTag::Euclidean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use rand::{Rng, SeedableRng};

    #[test]
    fn self_distance_zero() {
        let a = PointSet::from_xy(&[(0.0, 0.0)]).unwrap();
        let d = euclidean_distances(&a, &a).unwrap();
        assert_eq!(d.values(), &[0.0]);
    }

    #[test]
    fn three_four_five() {
        let a = PointSet::from_xy(&[(0.0, 0.0)]).unwrap();
        let b = PointSet::from_xy(&[(3.0, 4.0)]).unwrap();
        assert_eq!(euclidean_distances(&a, &b).unwrap().get(0, 0), 5.0);
    }

    #[test]
    fn random_set_symmetric_with_zero_diagonal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let pts: Vec<Point> =
            (0..6).map(|_| Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0))).collect();
        let set = PointSet::new(pts.clone()).unwrap();
        let d = euclidean_distances(&set, &set).unwrap();
        for i in 0..6 {
            assert_eq!(d.get(i, i), 0.0);
            for j in 0..6 {
                let oracle = ((pts[i].x - pts[j].x).powi(2) + (pts[i].y - pts[j].y).powi(2)).sqrt();
                assert!((d.get(i, j) - oracle).abs() < 1e-12);
                assert_eq!(d.get(i, j), d.get(j, i));
            }
        }
    }

    #[test]
    fn empty_input_rejected() {
        let a = PointSet::new(vec![]).unwrap();
        let b = PointSet::from_xy(&[(0.0, 0.0)]).unwrap();
        assert!(euclidean_distances(&a, &b).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let d = DistanceMatrix::from_row_major(2, 3, vec![0.0, 1.0, 2.5, f64::INFINITY, 4.0, 5.0], MetricTag::Geodesic)
            .unwrap();
        let mut buf = Vec::new();
        d.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 8 + 1 + 6 * 8);
        assert_eq!(DistanceMatrix::read_binary(&buf[..]).unwrap(), d);
    }
}
