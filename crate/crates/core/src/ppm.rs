//! Point-process datasets: pseudo-absence lattices, the downweighted Poisson
//! response/weight encoding and the grid-resolution convergence check.
//!
//! Presence rows carry weight `1e-6` and response `1/w`; pseudo-absence rows
//! carry response 0 and an equal share of the region area as weight.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::BasisKind;
use crate::error::{Error, Result};
use crate::geometry::{euclidean_distances, point_in_polygon, Point, PointSet, Polygon};
use crate::salsa::{self, SalsaConfig};

/// Quadrature weight of every presence row.
pub const PRESENCE_WEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PpmDataset {
    /// Presences (expanded by multiplicity) followed by pseudo-absences.
    pub points: PointSet,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub is_presence: Vec<bool>,
    pub covariates: Vec<(String, Vec<f64>)>,
    pub region_area: f64,
    pub grid_spacing: Option<f64>,
    n_presence: usize,
}

impl PpmDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_presence(&self) -> usize {
        self.n_presence
    }

    pub fn n_pseudo(&self) -> usize {
        self.len() - self.n_presence
    }

    pub fn presences(&self) -> PointSet {
        self.points.subset(&(0..self.n_presence).collect::<Vec<_>>())
    }

    pub fn pseudo(&self) -> PointSet {
        self.points.subset(&(self.n_presence..self.len()).collect::<Vec<_>>())
    }

    pub fn covariate(&self, name: &str) -> Option<&[f64]> {
        self.covariates.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn with_grid_spacing(mut self, spacing: f64) -> Self {
        self.grid_spacing = Some(spacing);
        self
    }

    /// Adds or replaces a covariate column.
    pub fn set_covariate(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        check_covariate(name, &values, self.len())?;
        match self.covariates.iter_mut().find(|(n, _)| n == name) {
            Some((_, v)) => *v = values,
            None => self.covariates.push((name.to_string(), values)),
        }
        Ok(())
    }

    /// Closed-form intensity of the intercept-only fit, `sum(w y) / sum(w)`.
    pub fn null_intensity(&self) -> f64 {
        let swy: f64 = self.y.iter().zip(&self.w).map(|(a, b)| a * b).sum();
        swy / self.w.iter().sum::<f64>()
    }

    /// CSV with columns `x,y,response,weight,is_presence,<covariates...>`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let to_err = |e: csv::Error| Error::Parse { context: "dataset csv".into(), message: e.to_string() };
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> =
            ["x", "y", "response", "weight", "is_presence"].iter().map(|s| s.to_string()).collect();
        header.extend(self.covariates.iter().map(|(n, _)| n.clone()));
        w.write_record(&header).map_err(to_err)?;
        for i in 0..self.len() {
            let p = self.points.get(i);
            let mut rec = vec![
                p.x.to_string(),
                p.y.to_string(),
                self.y[i].to_string(),
                self.w[i].to_string(),
                (self.is_presence[i] as u8).to_string(),
            ];
            rec.extend(self.covariates.iter().map(|(_, v)| v[i].to_string()));
            w.write_record(&rec).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<dataset csv>".into(), source: e })
    }

    /// Sidecar metadata written next to the CSV.
    pub fn sidecar(&self) -> DatasetSidecar {
        DatasetSidecar {
            region_area: self.region_area,
            grid_spacing: self.grid_spacing,
            n_presence: self.n_presence,
            n_pseudo: self.n_pseudo(),
            presence_weight: PRESENCE_WEIGHT,
            covariates: self.covariates.iter().map(|(n, _)| n.clone()).collect(),
            provenance: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub region_area: f64,
    pub grid_spacing: Option<f64>,
    pub n_presence: usize,
    pub n_pseudo: usize,
    pub presence_weight: f64,
    pub covariates: Vec<String>,
    /// `(input path, sha256 hex)` pairs.
    #[serde(default)]
    pub provenance: Vec<(String, String)>,
}

fn check_covariate(name: &str, values: &[f64], n: usize) -> Result<()> {
    if values.len() != n {
        return Err(Error::invalid(format!("covariate '{name}' has {} values for {n} rows", values.len())));
    }
    let rows: Vec<usize> = values.iter().enumerate().filter(|(_, v)| !v.is_finite()).map(|(i, _)| i).collect();
    if !rows.is_empty() {
        return Err(Error::NonFiniteCovariate { name: name.to_string(), rows });
    }
    Ok(())
}

/// Regular square lattice anchored at the lower-left corner of the region's
/// bounding box, keeping nodes inside `region` and outside `exclusion`.
pub fn generate_pseudo_absences(region: &Polygon, exclusion: Option<&Polygon>, spacing: f64) -> Result<PointSet> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::invalid(format!("grid spacing must be positive, got {spacing}")));
    }
    let (lo, hi) = region.bbox();
    let nx = ((hi.x - lo.x) / spacing + 1e-9).floor() as usize + 1;
    let ny = ((hi.y - lo.y) / spacing + 1e-9).floor() as usize + 1;
    let mut points = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let p = Point::new(lo.x + i as f64 * spacing, lo.y + j as f64 * spacing);
            if point_in_polygon(&p, region) && !exclusion.is_some_and(|ex| point_in_polygon(&p, ex)) {
                points.push(p);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::invalid(format!("no pseudo-absence points survive at spacing {spacing}")));
    }
    PointSet::new(points)
}

/// Joins presences and pseudo-absences with the downweighted Poisson encoding.
///
/// Presences are expanded by multiplicity. `covariates` hold one value per
/// output row.
pub fn assemble_dataset(
    presences: &PointSet,
    pseudo: &PointSet,
    region_area: f64,
    covariates: Vec<(String, Vec<f64>)>,
) -> Result<PpmDataset> {
    if !(region_area > 0.0 && region_area.is_finite()) {
        return Err(Error::invalid(format!("region area must be positive, got {region_area}")));
    }
    if pseudo.is_empty() {
        return Err(Error::invalid("no pseudo-absence points"));
    }
    let presences = presences.expand();
    let n_presence = presences.len();
    let n_pseudo = pseudo.len();
    let points = presences.concat(&pseudo.expand());
    let n = points.len();
    for (name, values) in &covariates {
        check_covariate(name, values, n)?;
    }
    let pseudo_weight = region_area / n_pseudo as f64;
    let mut y = vec![1.0 / PRESENCE_WEIGHT; n_presence];
    y.extend(std::iter::repeat_n(0.0, n - n_presence));
    let mut w = vec![PRESENCE_WEIGHT; n_presence];
    w.extend(std::iter::repeat_n(pseudo_weight, n - n_presence));
    let mut is_presence = vec![true; n_presence];
    is_presence.extend(std::iter::repeat_n(false, n - n_presence));
    Ok(PpmDataset { points, y, w, is_presence, covariates, region_area, grid_spacing: None, n_presence })
}

/// One fixed-knot model used to probe likelihood convergence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    pub knots: usize,
    pub basis: BasisKind,
}

impl ConvergenceSpec {
    /// Start knots 10/20/30/40 crossed with both bases.
    pub fn standard_set() -> Vec<ConvergenceSpec> {
        [10, 20, 30, 40]
            .into_iter()
            .flat_map(|k| {
                [BasisKind::Gaussian, BasisKind::Exponential].into_iter().map(move |b| ConvergenceSpec { knots: k, basis: b })
            })
            .collect()
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.basis, self.knots)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub spacing: f64,
    pub spec: String,
    pub n_pseudo: usize,
    pub log_pl: f64,
    /// `|logPL(next finer) - logPL| / |logPL|`; `None` at the finest spacing.
    pub rel_change_to_finer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub chosen_spacing: f64,
    pub table: Vec<ConvergenceRow>,
    pub warning: Option<String>,
}

impl ConvergenceReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let to_err = |e: csv::Error| Error::Parse { context: "convergence csv".into(), message: e.to_string() };
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["spacing", "spec", "n_pseudo", "loglik", "rel_change_to_finer", "chosen"])
            .map_err(to_err)?;
        for row in &self.table {
            w.write_record([
                row.spacing.to_string(),
                row.spec.clone(),
                row.n_pseudo.to_string(),
                row.log_pl.to_string(),
                row.rel_change_to_finer.map_or(String::new(), |v| v.to_string()),
                ((row.spacing == self.chosen_spacing) as u8).to_string(),
            ])
            .map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<convergence csv>".into(), source: e })
    }
}

/// Picks the coarsest spacing whose next refinement changes the maximised
/// log-pseudolikelihood of every spec by less than `tolerance` (relative).
///
/// Each spec is a knot search with `K_min = K_max = knots`, started from a
/// space-filled set of the unique presence locations, Euclidean distances.
/// `spacings` must run coarse to fine.
pub fn grid_convergence(
    region: &Polygon,
    exclusion: Option<&Polygon>,
    presences: &PointSet,
    region_area: f64,
    spacings: &[f64],
    specs: &[ConvergenceSpec],
    config: &SalsaConfig,
    tolerance: f64,
) -> Result<ConvergenceReport> {
    if spacings.is_empty() || specs.is_empty() {
        return Err(Error::invalid("grid convergence needs spacings and model specs"));
    }
    if spacings.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("spacings must be strictly decreasing (coarse to fine)"));
    }
    let candidates = presences.dedup();
    let cand_dist = euclidean_distances(&candidates, &candidates)?;

    let datasets = spacings
        .par_iter()
        .map(|&spacing| {
            let pseudo = generate_pseudo_absences(region, exclusion, spacing)?;
            let data = assemble_dataset(presences, &pseudo, region_area, Vec::new())?.with_grid_spacing(spacing);
            let data_dist = euclidean_distances(&data.points, &candidates)?;
            Ok((pseudo.len(), data, data_dist))
        })
        .collect::<Result<Vec<_>>>()?;
    let n_pseudo: Vec<usize> = datasets.iter().map(|d| d.0).collect();
    let jobs: Vec<(usize, usize)> =
        (0..spacings.len()).flat_map(|si| (0..specs.len()).map(move |mi| (si, mi))).collect();
    let fitted = jobs
        .par_iter()
        .map(|&(si, mi)| {
            let (_, data, data_dist) = &datasets[si];
            let problem = salsa::SalsaProblem::new(data, &candidates, data_dist, &cand_dist, None)?;
            let spec = &specs[mi];
            let k = spec.knots.min(candidates.len());
            let rseq = crate::design::r_sequence(&cand_dist, config.r_count, spec.basis)?;
            let limits = salsa::KnotLimits { start: k, min: k, max: k };
            Ok(salsa::run_salsa2d(&problem, &rseq, limits, config)?.model.log_pl)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut ll = vec![vec![f64::NAN; spacings.len()]; specs.len()];
    for (&(si, mi), v) in jobs.iter().zip(fitted) {
        ll[mi][si] = v;
    }

    let mut table = Vec::new();
    for (si, &spacing) in spacings.iter().enumerate() {
        for (mi, spec) in specs.iter().enumerate() {
            let rel = (si + 1 < spacings.len()).then(|| (ll[mi][si + 1] - ll[mi][si]).abs() / ll[mi][si].abs());
            table.push(ConvergenceRow {
                spacing,
                spec: spec.label(),
                n_pseudo: n_pseudo[si],
                log_pl: ll[mi][si],
                rel_change_to_finer: rel,
            });
        }
    }
    let chosen = (0..spacings.len().saturating_sub(1))
        .find(|&si| (0..specs.len()).all(|mi| (ll[mi][si + 1] - ll[mi][si]).abs() / ll[mi][si].abs() < tolerance));
    let (chosen_spacing, warning) = match chosen {
        Some(si) => (spacings[si], None),
        None => {
            let finest = *spacings.last().unwrap();
            let msg = format!("no spacing met the {tolerance} relative tolerance; using the finest ({finest})");
            log::warn!("{msg}");
            (finest, Some(msg))
        }
    };
    Ok(ConvergenceReport { chosen_spacing, table, warning })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Polygon {
        Polygon::rectangle(Point::new(0.0, 0.0), Point::new(1.0, 1.0)).unwrap()
    }

    #[test]
    fn lattice_includes_boundary() {
        let pts = generate_pseudo_absences(&unit_square(), None, 0.5).unwrap();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts.get(0), Point::new(0.0, 0.0));
    }

    #[test]
    fn full_exclusion_is_an_error() {
        let big = Polygon::rectangle(Point::new(-1.0, -1.0), Point::new(2.0, 2.0)).unwrap();
        assert!(generate_pseudo_absences(&unit_square(), Some(&big), 0.5).is_err());
    }

    #[test]
    fn exclusion_removes_points() {
        let hole = Polygon::rectangle(Point::new(0.4, 0.4), Point::new(0.6, 0.6)).unwrap();
        let pts = generate_pseudo_absences(&unit_square(), Some(&hole), 0.5).unwrap();
        assert_eq!(pts.len(), 8);
    }

    #[test]
    fn survey_sized_weights() {
        let pres = PointSet::new(vec![Point::new(0.0, 0.0); 320]).unwrap();
        let pseudo = PointSet::new(vec![Point::new(1.0, 1.0); 9644]).unwrap();
        let d = assemble_dataset(&pres, &pseudo, 37872.0, Vec::new()).unwrap();
        assert!((d.w[320] - 3.92700).abs() < 5e-6);
        let total: f64 = d.w[320..].iter().sum();
        assert!((total / 37872.0 - 1.0).abs() < 1e-9);
        assert!(d.y[..320].iter().zip(&d.w[..320]).all(|(y, w)| y * w == 1.0));
        let expect = 320.0 / (37872.0 + 320.0 * 1e-6);
        assert!((d.null_intensity() / expect - 1.0).abs() < 1e-10);
    }

    #[test]
    fn minimal_dataset() {
        let pres = PointSet::from_xy(&[(0.0, 0.0)]).unwrap();
        let pseudo = PointSet::from_xy(&[(1.0, 1.0)]).unwrap();
        let d = assemble_dataset(&pres, &pseudo, 5.0, Vec::new()).unwrap();
        assert_eq!(d.y, vec![1e6, 0.0]);
        assert_eq!(d.w, vec![1e-6, 5.0]);
        assert_eq!(d.is_presence, vec![true, false]);
    }

    #[test]
    fn multiplicity_expands_presences() {
        let pres = PointSet::with_multiplicity(vec![Point::new(0.0, 0.0)], vec![3]).unwrap();
        let pseudo = PointSet::from_xy(&[(1.0, 1.0)]).unwrap();
        let d = assemble_dataset(&pres, &pseudo, 1.0, Vec::new()).unwrap();
        assert_eq!(d.n_presence(), 3);
    }

    #[test]
    fn nan_covariate_lists_rows() {
        let pres = PointSet::from_xy(&[(0.0, 0.0)]).unwrap();
        let pseudo = PointSet::from_xy(&[(1.0, 1.0), (2.0, 2.0)]).unwrap();
        let err = assemble_dataset(&pres, &pseudo, 1.0, vec![("rain".into(), vec![1.0, f64::NAN, f64::NAN])])
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteCovariate { rows, .. } if rows == vec![1, 2]));
    }

    #[test]
    fn csv_has_expected_header() {
        let pres = PointSet::from_xy(&[(0.0, 0.0)]).unwrap();
        let pseudo = PointSet::from_xy(&[(1.0, 1.0)]).unwrap();
        let d = assemble_dataset(&pres, &pseudo, 1.0, vec![("rain".into(), vec![3.0, 4.0])]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y,response,weight,is_presence,rain\n"));
    }
}
