use serde_json::json;

use salsa2d::design::quantile;
use salsa2d::geometry::PointSet;
use salsa2d::io::{read_points_csv, ModelDocument};
use salsa2d::terms::{partial_effect_from, EffectCurve, TermSpec};

use super::{csv_bytes, split_pair, CovariateSources};
use crate::args::{PartialArgs, PredictArgs};
use crate::error::{CliError, CliResult};
use crate::manifest::Run;

fn load_model(run: &mut Run, path: &std::path::Path) -> CliResult<ModelDocument> {
    run.input("model", path)?;
    Ok(ModelDocument::read(path)?)
}

pub fn predict(args: &PredictArgs, run: &mut Run) -> CliResult<()> {
    let doc = load_model(run, &args.model)?;
    run.input("points", &args.points)?;
    // Prediction rows are taken as listed; a count column is ignored.
    let points = PointSet::new(read_points_csv(&args.points)?.points().to_vec())?;
    let sources = CovariateSources::load(run, args.covariates.as_deref(), &args.features)?;
    let covariates = if doc.terms.is_empty() { Vec::new() } else { sources.sample(&points)? };
    run.phase("load");
    let lambda = doc.predict(&points, &covariates)?;
    run.phase("predict");

    let threshold = match args.top_percent {
        Some(p) if !(p > 0.0 && p < 100.0) => {
            return Err(CliError::Input(format!("--top-percent must be in (0, 100), got {p}")));
        }
        Some(p) => {
            let mut sorted = lambda.clone();
            sorted.sort_by(f64::total_cmp);
            Some(quantile(&sorted, 1.0 - p / 100.0))
        }
        None => None,
    };
    let mut header = vec!["x", "y", "intensity"];
    if threshold.is_some() {
        header.push("top");
    }
    let rows = points.iter().zip(&lambda).map(|(p, &l)| {
        let mut r = vec![p.x.to_string(), p.y.to_string(), l.to_string()];
        if let Some(t) = threshold {
            r.push((l > t).to_string());
        }
        r
    });
    let bytes = csv_bytes(&header, rows);
    let n = lambda.len();
    let mean = lambda.iter().sum::<f64>() / n as f64;
    run.summary(json!({
        "n_points": n,
        "mean_intensity": mean,
        "min_intensity": lambda.iter().copied().fold(f64::INFINITY, f64::min),
        "max_intensity": lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "top_threshold": threshold,
        "n_top": threshold.map(|t| lambda.iter().filter(|&&l| l > t).count()),
    }));
    run.output("predictions.csv", bytes);
    Ok(())
}

pub fn partial(args: &PartialArgs, run: &mut Run) -> CliResult<()> {
    let doc = load_model(run, &args.model)?;
    let term = doc.terms.iter().find(|t| t.covariate() == args.term).ok_or_else(|| {
        let known: Vec<&str> = doc.terms.iter().map(TermSpec::covariate).collect();
        CliError::Input(format!("model has no term for '{}' (terms: {known:?})", args.term))
    })?;
    let grid = match (&args.values, term) {
        (Some(v), _) if !v.is_empty() => v.clone(),
        (_, TermSpec::Threshold(t)) => vec![t.range.0.min(t.chosen), t.chosen],
        _ => {
            if args.n < 2 {
                return Err(CliError::Input("--n must be at least 2".into()));
            }
            let (lo, hi) = term.range();
            (0..args.n).map(|i| lo + (hi - lo) * i as f64 / (args.n - 1) as f64).collect()
        }
    };

    let mut fixed: Vec<(String, f64)> = Vec::new();
    for f in &args.fixes {
        let (name, value) = split_pair("fix", f)?;
        let v: f64 = value.parse().map_err(|e| CliError::Input(format!("--fix {f}: {e}")))?;
        fixed.push((name.to_string(), v));
    }
    for t in &doc.terms {
        let name = t.covariate();
        if name != args.term && !fixed.iter().any(|(n, _)| n == name) {
            let (lo, hi) = t.range();
            log::info!("holding '{name}' at the middle of its range");
            fixed.push((name.to_string(), 0.5 * (lo + hi)));
        }
    }
    let offset = if args.no_spatial { 0.0 } else { doc.spatial_reference };

    let mut curve = EffectCurve { covariate: args.term.clone(), values: grid.clone(), intensity: vec![0.0; grid.len()], warnings: Vec::new() };
    for m in &doc.members {
        let c = partial_effect_from(&m.coefficients, &m.labels, &doc.terms, &args.term, &grid, &fixed, offset)?;
        for (o, l) in curve.intensity.iter_mut().zip(&c.intensity) {
            *o += m.weight * l;
        }
        if curve.warnings.is_empty() {
            curve.warnings = c.warnings;
        }
    }
    run.warnings(&curve.warnings);
    let mut bytes = Vec::new();
    curve.write_csv(&mut bytes)?;
    run.summary(json!({ "term": args.term, "rows": grid.len(), "fixed": fixed, "spatial_offset": offset }));
    let safe: String = args.term.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    run.output(&format!("partial_{safe}.csv"), bytes);
    Ok(())
}

