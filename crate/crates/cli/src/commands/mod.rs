pub mod fit;
pub mod grid;
pub mod predict;

use std::path::{Path, PathBuf};

use salsa2d::geometry::{distance_to_nearest_feature, point_in_polygon, Feature, PointSet, Polygon};
use salsa2d::io::{read_geojson, CovariateTable};

use crate::error::{CliError, CliResult};
use crate::manifest::Run;

pub struct Region {
    pub polygon: Polygon,
    pub exclusion: Option<Polygon>,
    pub area: f64,
}

/// Reads the region and exclusion layers. Without an explicit `area` the
/// exclusion's area is subtracted whole, i.e. it is assumed to lie inside
/// the region.
pub fn load_region(run: &mut Run, region: &Path, exclusion: Option<&Path>, area: Option<f64>) -> CliResult<Region> {
    run.input("region", region)?;
    let polygon = read_geojson(region)?.region()?;
    let exclusion = match exclusion {
        Some(p) => {
            run.input("exclusion", p)?;
            Some(read_geojson(p)?.region()?)
        }
        None => None,
    };
    let area = area.unwrap_or_else(|| polygon.area() - exclusion.as_ref().map_or(0.0, Polygon::area));
    if !(area > 0.0 && area.is_finite()) {
        return Err(CliError::Input(format!("region area must be positive, got {area}")));
    }
    Ok(Region { polygon, exclusion, area })
}

/// `name=value` pairs from repeatable flags.
pub fn split_pair<'a>(flag: &str, s: &'a str) -> CliResult<(&'a str, &'a str)> {
    s.split_once('=')
        .map(|(a, b)| (a.trim(), b.trim()))
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .ok_or_else(|| CliError::Input(format!("--{flag} expects name=value, got '{s}'")))
}

struct FeatureLayer {
    name: String,
    polygons: Vec<Polygon>,
    features: Vec<Feature>,
}

/// Covariate inputs: a sampled table plus distance-to-feature layers.
#[derive(Default)]
pub struct CovariateSources {
    table: Option<CovariateTable>,
    layers: Vec<FeatureLayer>,
}

impl CovariateSources {
    pub fn load(run: &mut Run, table: Option<&Path>, features: &[String]) -> CliResult<Self> {
        let table = match table {
            Some(p) => {
                run.input("covariates", p)?;
                Some(CovariateTable::read(p)?)
            }
            None => None,
        };
        let mut layers = Vec::new();
        for spec in features {
            let (name, path) = split_pair("feature", spec)?;
            let path = PathBuf::from(path);
            run.input(&format!("feature:{name}"), &path)?;
            let layer = read_geojson(&path)?;
            // Polygon outlines count as features; points inside are at distance 0.
            let mut feats = layer.features.clone();
            for poly in &layer.polygons {
                feats.extend(poly.rings().iter().map(|r| {
                    let mut ring = r.clone();
                    ring.extend(r.first().copied());
                    Feature::Polyline(ring)
                }));
            }
            if feats.is_empty() {
                return Err(CliError::Input(format!("{}: feature layer '{name}' has no geometry", path.display())));
            }
            layers.push(FeatureLayer { name: name.to_string(), polygons: layer.polygons, features: feats });
        }
        Ok(CovariateSources { table, layers })
    }

    /// Covariate columns at `points`, table columns first.
    pub fn sample(&self, points: &PointSet) -> CliResult<Vec<(String, Vec<f64>)>> {
        let mut out = match &self.table {
            Some(t) => t.sample(points)?,
            None => Vec::new(),
        };
        for layer in &self.layers {
            let mut d = distance_to_nearest_feature(points, &layer.features)?;
            for (v, p) in d.iter_mut().zip(points.iter()) {
                if layer.polygons.iter().any(|poly| point_in_polygon(p, poly)) {
                    *v = 0.0;
                }
            }
            if out.iter().any(|(n, _)| n == &layer.name) {
                return Err(CliError::Input(format!("covariate '{}' defined twice", layer.name)));
            }
            out.push((layer.name.clone(), d));
        }
        Ok(out)
    }
}

pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}
