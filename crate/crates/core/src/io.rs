//! File formats shared with the command-line tool: point and covariate CSVs,
//! GeoJSON regions and features, and the JSON model document.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::design::{build_design, BasisKind, CovariateBlock, RSequence, RadialKnot};
use crate::error::{Error, Result};
use crate::fit::{intensity, FittedModel};
use crate::geometry::{
    euclidean_distances, DistanceMatrix, DistanceProvider, Feature, GraphOptions, MetricTag, Point, PointSet, Polygon,
};
use crate::ppm::generate_pseudo_absences;
use crate::terms::{build_covariate_block, TermSpec};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse { context: path.display().to_string(), message: message.into() }
}

/// Numeric CSV with a mandatory header row.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers.iter().position(|h| h.eq_ignore_ascii_case(name)).map(|i| self.columns[i].as_slice())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

pub fn read_numeric_csv(path: &Path) -> Result<NumericTable> {
    let text = read_text(path)?;
    parse_numeric_csv(&text).map_err(|m| parse_err(path, m))
}

fn parse_numeric_csv(text: &str) -> std::result::Result<NumericTable, String> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err("missing header row".into());
    }
    let mut columns = vec![Vec::new(); headers.len()];
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| format!("row {}: column '{}' value '{field}' is not a number", i + 1, headers[j]))?;
            columns[j].push(v);
        }
    }
    Ok(NumericTable { headers, columns })
}

/// Presence locations from a CSV with `x` and `y` columns and an optional
/// integer `count` column (multiplicity).
pub fn read_points_csv(path: &Path) -> Result<PointSet> {
    let table = read_numeric_csv(path)?;
    let (x, y) = match (table.column("x"), table.column("y")) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(parse_err(path, "expected columns 'x' and 'y'")),
    };
    let points: Vec<Point> = x.iter().zip(y).map(|(&x, &y)| Point::new(x, y)).collect();
    if points.is_empty() {
        return Err(parse_err(path, "no points"));
    }
    match table.column("count") {
        Some(c) => {
            let counts = c
                .iter()
                .map(|&v| (v >= 1.0 && v.fract() == 0.0).then_some(v as usize))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| parse_err(path, "counts must be positive integers"))?;
            PointSet::with_multiplicity(points, counts)
        }
        None => PointSet::new(points),
    }
}

pub fn write_points_csv<W: std::io::Write>(points: &PointSet, out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io { path: "<points csv>".into(), source: e.into() };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y"]).map_err(io)?;
    for p in points {
        w.write_record([p.x.to_string(), p.y.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io { path: "<points csv>".into(), source: e })
}

/// Pre-computed covariates at sample locations (`x`, `y` plus named
/// columns). Values are transferred to other points by nearest sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    pub points: PointSet,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl CovariateTable {
    pub fn read(path: &Path) -> Result<Self> {
        let table = read_numeric_csv(path)?;
        let (x, y) = match (table.column("x"), table.column("y")) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(parse_err(path, "expected columns 'x' and 'y'")),
        };
        let points = PointSet::new(x.iter().zip(y).map(|(&x, &y)| Point::new(x, y)).collect())?;
        let columns = table
            .headers
            .iter()
            .zip(&table.columns)
            .filter(|(h, _)| !h.eq_ignore_ascii_case("x") && !h.eq_ignore_ascii_case("y"))
            .map(|(h, c)| (h.clone(), c.clone()))
            .collect();
        Ok(CovariateTable { points, columns })
    }

    /// Nearest-sample values at `targets` (ties to the earlier sample).
    pub fn sample(&self, targets: &PointSet) -> Result<Vec<(String, Vec<f64>)>> {
        if self.points.is_empty() {
            return Err(Error::invalid("covariate table has no rows"));
        }
        let src = self.points.points();
        let nearest: Vec<usize> = targets
            .points()
            .par_iter()
            .map(|t| {
                let mut best = 0;
                let mut bd = f64::INFINITY;
                for (i, s) in src.iter().enumerate() {
                    let d = (s.x - t.x).powi(2) + (s.y - t.y).powi(2);
                    if d < bd {
                        bd = d;
                        best = i;
                    }
                }
                best
            })
            .collect();
        Ok(self
            .columns
            .iter()
            .map(|(name, values)| (name.clone(), nearest.iter().map(|&i| values[i]).collect()))
            .collect())
    }
}

/// Polygons and line/point features read from a GeoJSON document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeoLayer {
    pub polygons: Vec<Polygon>,
    pub features: Vec<Feature>,
}

impl GeoLayer {
    /// All polygon parts merged into one even-odd polygon.
    pub fn region(&self) -> Result<Polygon> {
        let rings: Vec<Vec<Point>> = self.polygons.iter().flat_map(|p| p.rings().iter().cloned()).collect();
        if rings.is_empty() {
            return Err(Error::invalid("no polygon geometry in layer"));
        }
        Polygon::new(rings)
    }
}

pub fn read_geojson(path: &Path) -> Result<GeoLayer> {
    let text = read_text(path)?;
    parse_geojson(&text).map_err(|e| match e {
        Error::Parse { message, .. } => parse_err(path, message),
        other => other,
    })
}

pub fn parse_geojson(text: &str) -> Result<GeoLayer> {
    let bad = |m: String| Error::Parse { context: "geojson".into(), message: m };
    let root: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let mut layer = GeoLayer::default();
    collect_geojson(&root, &mut layer).map_err(bad)?;
    Ok(layer)
}

fn coord(v: &Value) -> std::result::Result<Point, String> {
    match v.as_array().map(Vec::as_slice) {
        Some([x, y, ..]) => match (x.as_f64(), y.as_f64()) {
            (Some(x), Some(y)) => Ok(Point::new(x, y)),
            _ => Err(format!("non-numeric coordinate {v}")),
        },
        _ => Err(format!("bad coordinate {v}")),
    }
}

fn coords(v: &Value) -> std::result::Result<Vec<Point>, String> {
    v.as_array().ok_or_else(|| format!("expected coordinate array, got {v}"))?.iter().map(coord).collect()
}

fn rings(v: &Value) -> std::result::Result<Vec<Vec<Point>>, String> {
    v.as_array().ok_or("expected ring array")?.iter().map(coords).collect()
}

fn collect_geojson(v: &Value, layer: &mut GeoLayer) -> std::result::Result<(), String> {
    let kind = v.get("type").and_then(Value::as_str).ok_or("object without 'type'")?;
    let c = v.get("coordinates");
    let need = || c.ok_or_else(|| format!("{kind} without coordinates"));
    match kind {
        "FeatureCollection" => {
            for f in v.get("features").and_then(Value::as_array).ok_or("FeatureCollection without features")? {
                collect_geojson(f, layer)?;
            }
        }
        "Feature" => {
            if let Some(g) = v.get("geometry").filter(|g| !g.is_null()) {
                collect_geojson(g, layer)?;
            }
        }
        "GeometryCollection" => {
            for g in v.get("geometries").and_then(Value::as_array).ok_or("GeometryCollection without geometries")? {
                collect_geojson(g, layer)?;
            }
        }
        "Polygon" => layer.polygons.push(Polygon::new(rings(need()?)?).map_err(|e| e.to_string())?),
        "MultiPolygon" => {
            for p in need()?.as_array().ok_or("bad MultiPolygon")? {
                layer.polygons.push(Polygon::new(rings(p)?).map_err(|e| e.to_string())?);
            }
        }
        "Point" => layer.features.push(Feature::Point(coord(need()?)?)),
        "MultiPoint" => layer.features.extend(coords(need()?)?.into_iter().map(Feature::Point)),
        "LineString" => layer.features.push(Feature::Polyline(coords(need()?)?)),
        "MultiLineString" => {
            for l in need()?.as_array().ok_or("bad MultiLineString")? {
                layer.features.push(Feature::Polyline(coords(l)?));
            }
        }
        other => return Err(format!("unsupported geometry type '{other}'")),
    }
    Ok(())
}

/// How geodesic distances were computed, so new locations can be placed on
/// the same graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSpec {
    pub region: Polygon,
    pub exclusion: Option<Polygon>,
    pub spacing: f64,
    pub connectivity: u8,
    pub attach_k: usize,
    pub max_attach_distance: Option<f64>,
}

impl GeodesicSpec {
    pub fn new(region: Polygon, exclusion: Option<Polygon>, spacing: f64, options: &GraphOptions) -> Self {
        GeodesicSpec {
            region,
            exclusion,
            spacing,
            connectivity: options.connectivity,
            attach_k: options.attach_k,
            max_attach_distance: options.max_attach_distance,
        }
    }

    pub fn options(&self) -> GraphOptions {
        GraphOptions {
            connectivity: self.connectivity,
            attach_k: self.attach_k,
            max_attach_distance: self.max_attach_distance,
        }
    }

    pub fn provider(&self, data: &PointSet, candidates: &PointSet) -> Result<DistanceProvider> {
        let lattice = generate_pseudo_absences(&self.region, None, self.spacing)?;
        DistanceProvider::geodesic(data, candidates, &lattice, self.spacing, self.exclusion.as_ref(), &self.options())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberDocument {
    pub weight: f64,
    pub labels: Vec<String>,
    pub coefficients: Vec<f64>,
    pub knots: Vec<RadialKnot>,
    pub log_pl: f64,
    pub bic: f64,
    pub aicc: Option<f64>,
}

impl MemberDocument {
    pub fn from_model(model: &FittedModel, weight: f64) -> Self {
        MemberDocument {
            weight,
            labels: model.labels.clone(),
            coefficients: model.coefficients.iter().copied().collect(),
            knots: model.radial.iter().map(|c| RadialKnot { candidate: c.candidate, r_index: c.r_index }).collect(),
            log_pl: model.log_pl,
            bic: model.bic,
            aicc: model.aicc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub log_pl: f64,
    pub bic: Option<f64>,
    pub aicc: Option<f64>,
    pub n_obs: usize,
    pub n_params: usize,
    pub n_knots: usize,
}

/// Everything needed to predict from a fitted spatial model (or ensemble).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub version: String,
    /// `salsa2d`, `average` or `fixed`.
    pub method: String,
    pub basis: BasisKind,
    pub metric: MetricTag,
    pub r_values: Vec<f64>,
    pub candidates: Vec<Point>,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
    pub members: Vec<MemberDocument>,
    #[serde(default)]
    pub geodesic: Option<GeodesicSpec>,
    /// Mean spatial contribution to the linear predictor over the data rows.
    #[serde(default)]
    pub spatial_reference: f64,
    pub summary: ModelSummary,
}

impl ModelDocument {
    pub fn read(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let doc: ModelDocument = serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
        doc.validate().map_err(|e| parse_err(path, e.to_string()))?;
        Ok(doc)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse { context: "model document".into(), message: e.to_string() })
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::invalid("model document has no members"));
        }
        let total: f64 = self.members.iter().map(|m| m.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("member weights sum to {total}")));
        }
        RSequence::new(self.basis, self.r_values.clone())?;
        for m in &self.members {
            if m.labels.len() != m.coefficients.len() {
                return Err(Error::invalid("member labels and coefficients differ in length"));
            }
            if m.knots.iter().any(|k| k.candidate >= self.candidates.len() || k.r_index >= self.r_values.len()) {
                return Err(Error::invalid("member knot outside the candidate set or range sequence"));
            }
        }
        if self.metric == MetricTag::Geodesic && self.geodesic.is_none() {
            return Err(Error::invalid("geodesic model without a graph specification"));
        }
        Ok(())
    }

    pub fn rseq(&self) -> Result<RSequence> {
        RSequence::new(self.basis, self.r_values.clone())
    }

    pub fn candidate_set(&self) -> Result<PointSet> {
        PointSet::new(self.candidates.clone())
    }

    /// Distances from `points` to the candidate knots under the model metric.
    pub fn distances(&self, points: &PointSet) -> Result<DistanceMatrix> {
        let cands = self.candidate_set()?;
        match (&self.metric, &self.geodesic) {
            (MetricTag::Geodesic, Some(spec)) => Ok(spec.provider(points, &cands)?.data_to_candidates),
            _ => euclidean_distances(points, &cands),
        }
    }

    /// Weighted intensity at `points`; `covariates` must name every column
    /// the model's terms use.
    pub fn predict(&self, points: &PointSet, covariates: &[(String, Vec<f64>)]) -> Result<Vec<f64>> {
        let d = self.distances(points)?;
        let block = if self.terms.is_empty() { None } else { Some(build_covariate_block(&self.terms, covariates)?) };
        self.predict_with(&d, block.as_ref())
    }

    pub fn predict_with(&self, distances: &DistanceMatrix, block: Option<&CovariateBlock>) -> Result<Vec<f64>> {
        if distances.cols() != self.candidates.len() || distances.metric() != self.metric {
            return Err(Error::invalid("distance matrix does not match the model's candidates or metric"));
        }
        let rseq = self.rseq()?;
        let mut out = vec![0.0; distances.rows()];
        for m in &self.members {
            let x = build_design(&m.knots, distances, &rseq, block)?;
            if x.labels != m.labels {
                return Err(Error::invalid(format!(
                    "rebuilt design columns {:?} do not match the model's {:?}",
                    x.labels, m.labels
                )));
            }
            for (i, o) in out.iter_mut().enumerate() {
                let eta: f64 = x.x.row(i).iter().zip(&m.coefficients).map(|(a, b)| a * b).sum();
                *o += m.weight * intensity(eta);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_csv() {
        let t = parse_numeric_csv("x, y ,count\n1,2,3\n4.5,6,1\n").unwrap();
        assert_eq!(t.headers, vec!["x", "y", "count"]);
        assert_eq!(t.column("Y").unwrap(), &[2.0, 6.0]);
        assert!(parse_numeric_csv("x,y\n1,abc\n").unwrap_err().contains("not a number"));
        assert!(parse_numeric_csv("x,y\n1,2,3\n").is_err());
    }

    #[test]
    fn geojson_kinds() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{},"geometry":{"type":"Polygon","coordinates":[[[0,0],[4,0],[4,4],[0,4],[0,0]],[[1,1],[2,1],[2,2],[1,2],[1,1]]]}},
            {"type":"Feature","geometry":{"type":"MultiPolygon","coordinates":[[[[10,10],[11,10],[11,11],[10,10]]]]}},
            {"type":"Feature","geometry":{"type":"LineString","coordinates":[[0,0],[1,1]]}},
            {"type":"Feature","geometry":{"type":"MultiPoint","coordinates":[[5,5],[6,6]]}},
            {"type":"Feature","geometry":null}
        ]}"#;
        let layer = parse_geojson(text).unwrap();
        assert_eq!(layer.polygons.len(), 2);
        assert_eq!(layer.features.len(), 3);
        let region = layer.region().unwrap();
        assert!((region.area() - (16.0 - 1.0 + 0.5)).abs() < 1e-12);
        assert!(parse_geojson(r#"{"type":"Circle"}"#).is_err());
        assert!(parse_geojson("not json").is_err());
    }

    #[test]
    fn covariate_sampling_uses_nearest() {
        let t = CovariateTable {
            points: PointSet::from_xy(&[(0.0, 0.0), (10.0, 0.0)]).unwrap(),
            columns: vec![("rain".into(), vec![1.0, 2.0])],
        };
        let s = t.sample(&PointSet::from_xy(&[(1.0, 0.0), (9.0, 1.0), (5.0, 0.0)]).unwrap()).unwrap();
        assert_eq!(s[0].1, vec![1.0, 2.0, 1.0]);
    }
}
