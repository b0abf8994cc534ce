//! One-dimensional covariate terms: quadratic B-spline smooths and binary
//! threshold factors, plus partial-effect curves.
//!
//! Smooth-term knots are chosen by a greedy search over covariate quantiles
//! (forward addition, backward pruning, strict criterion improvement). This
//! is a simplified stand-in for a full one-dimensional SALSA search; the
//! chosen knots live in [`SmoothTermSpec`] so a different search can be
//! swapped in without touching model assembly.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{bspline_basis, quantile, CovariateBlock, DesignMatrix};
use crate::error::{Error, Result};
use crate::fit::{fit_weighted_poisson_with, FitCriterion, FittedModel, IrlsOptions};
use crate::ppm::PpmDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnotSelection {
    Fixed,
    BicSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothTermSpec {
    pub covariate: String,
    pub degree: usize,
    pub interior_knots: Vec<f64>,
    /// Training range; evaluation clamps to it.
    pub boundary: (f64, f64),
    pub selection: KnotSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorThresholdSpec {
    pub covariate: String,
    pub candidates: Vec<f64>,
    /// The model column is the indicator `covariate < chosen`.
    pub chosen: f64,
    pub range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TermSpec {
    Linear { covariate: String, range: (f64, f64) },
    Smooth(SmoothTermSpec),
    Threshold(FactorThresholdSpec),
}

impl TermSpec {
    pub fn covariate(&self) -> &str {
        match self {
            TermSpec::Linear { covariate, .. } => covariate,
            TermSpec::Smooth(s) => &s.covariate,
            TermSpec::Threshold(t) => &t.covariate,
        }
    }

    pub fn range(&self) -> (f64, f64) {
        match self {
            TermSpec::Linear { range, .. } => *range,
            TermSpec::Smooth(s) => s.boundary,
            TermSpec::Threshold(t) => t.range,
        }
    }

    /// Column labels, in block order.
    pub fn labels(&self) -> Vec<String> {
        match self {
            TermSpec::Linear { covariate, .. } => vec![covariate.clone()],
            TermSpec::Smooth(s) => (1..s.n_columns() + 1).map(|j| format!("{}_s{j}", s.covariate)).collect(),
            TermSpec::Threshold(t) => vec![format!("{}<{}", t.covariate, t.chosen)],
        }
    }

    /// Evaluates the term's columns at `values`.
    pub fn columns(&self, values: &[f64]) -> Result<Vec<Vec<f64>>> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("covariate '{}' has non-finite value {v}", self.covariate())));
        }
        match self {
            TermSpec::Linear { .. } => Ok(vec![values.to_vec()]),
            TermSpec::Smooth(s) => s.columns(values),
            TermSpec::Threshold(t) => Ok(vec![values.iter().map(|&v| f64::from(u8::from(v < t.chosen))).collect()]),
        }
    }
}

impl SmoothTermSpec {
    /// Spec with fixed knots whose boundary is the range of `values`.
    pub fn fixed(covariate: &str, values: &[f64], interior_knots: Vec<f64>) -> Result<Self> {
        let boundary = finite_range(covariate, values)?;
        let spec = SmoothTermSpec {
            covariate: covariate.to_string(),
            degree: 2,
            interior_knots,
            boundary,
            selection: KnotSelection::Fixed,
        };
        if boundary.0 < boundary.1 {
            spec.columns(&[boundary.0])?;
        }
        Ok(spec)
    }

    /// Basis columns without the first B-spline, which the intercept absorbs.
    pub fn n_columns(&self) -> usize {
        if self.boundary.0 < self.boundary.1 {
            self.interior_knots.len() + self.degree
        } else {
            0
        }
    }

    fn columns(&self, values: &[f64]) -> Result<Vec<Vec<f64>>> {
        if self.n_columns() == 0 {
            return Ok(Vec::new());
        }
        let b = bspline_basis(values, &self.interior_knots, self.degree, self.boundary)?;
        Ok((1..b.ncols()).map(|j| b.column(j).iter().copied().collect()).collect())
    }
}

fn finite_range(name: &str, values: &[f64]) -> Result<(f64, f64)> {
    let bad: Vec<usize> = values.iter().enumerate().filter(|(_, v)| !v.is_finite()).map(|(i, _)| i).collect();
    if !bad.is_empty() {
        return Err(Error::NonFiniteCovariate { name: name.to_string(), rows: bad });
    }
    if values.is_empty() {
        return Err(Error::invalid(format!("covariate '{name}' has no values")));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

fn lookup<'a>(covariates: &'a [(String, Vec<f64>)], name: &str) -> Result<&'a [f64]> {
    covariates
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v.as_slice())
        .ok_or_else(|| Error::invalid(format!("unknown covariate '{name}'")))
}

/// Assembles the covariate block for `terms` from named covariate columns.
pub fn build_covariate_block(terms: &[TermSpec], covariates: &[(String, Vec<f64>)]) -> Result<CovariateBlock> {
    let mut labels = Vec::new();
    let mut columns = Vec::new();
    for t in terms {
        let values = lookup(covariates, t.covariate())?;
        labels.extend(t.labels());
        columns.extend(t.columns(values)?);
    }
    CovariateBlock::new(labels, columns)
}

/// `[1 | block]` with no radial columns.
pub fn covariate_design(n: usize, block: &CovariateBlock) -> Result<DesignMatrix> {
    if let Some(rows) = block.rows() {
        if rows != n {
            return Err(Error::invalid(format!("covariate block has {rows} rows, expected {n}")));
        }
    }
    let mut x = DMatrix::zeros(n, 1 + block.width());
    x.column_mut(0).fill(1.0);
    for (j, col) in block.columns.iter().enumerate() {
        x.column_mut(1 + j).copy_from_slice(col);
    }
    let mut labels = vec!["intercept".to_string()];
    labels.extend(block.labels.iter().cloned());
    Ok(DesignMatrix { x, labels, n_covariate_columns: block.width(), radial: Vec::new(), basis: None })
}

fn fit_block(data: &PpmDataset, base: Option<&CovariateBlock>, extra: CovariateBlock, irls: &IrlsOptions) -> Option<FittedModel> {
    let mut block = base.cloned().unwrap_or_default();
    block.extend(extra);
    let x = covariate_design(data.len(), &block).ok()?;
    fit_weighted_poisson_with(&x, &data.y, &data.w, irls, None).ok().filter(|m| m.converged)
}

fn score(criterion: FitCriterion, m: &Option<FittedModel>) -> f64 {
    m.as_ref().map_or(f64::INFINITY, |m| criterion.score(m))
}

fn improves(new: f64, old: f64) -> bool {
    new < old - 1e-9 * old.abs().max(1.0)
}

/// Options for the greedy one-dimensional knot search.
#[derive(Debug, Clone)]
pub struct KnotSearchOptions {
    pub max_knots: usize,
    /// Candidate knots are the `k / (n_quantiles + 1)` quantiles of the
    /// covariate over the pseudo-absence rows (its distribution across the
    /// region), `k = 1..=n_quantiles`.
    pub n_quantiles: usize,
    pub criterion: FitCriterion,
    pub irls: IrlsOptions,
}

impl Default for KnotSearchOptions {
    fn default() -> Self {
        KnotSearchOptions { max_knots: 5, n_quantiles: 19, criterion: FitCriterion::Bic, irls: IrlsOptions::default() }
    }
}

/// Candidate interior knots: distinct quantiles strictly inside the range.
pub fn quantile_candidates(values: &[f64], n_quantiles: usize) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let mut out: Vec<f64> = (1..=n_quantiles)
        .map(|k| quantile(&sorted, k as f64 / (n_quantiles + 1) as f64))
        .filter(|&q| q > lo && q < hi)
        .collect();
    out.dedup();
    out
}

/// Greedy forward/backward quantile-knot search for a quadratic B-spline
/// term, alongside the optional `base` covariate block.
pub fn select_knots_1d(
    data: &PpmDataset,
    covariate: &str,
    base: Option<&CovariateBlock>,
    opts: &KnotSearchOptions,
) -> Result<SmoothTermSpec> {
    let values = data
        .covariate(covariate)
        .ok_or_else(|| Error::invalid(format!("unknown covariate '{covariate}'")))?;
    let mut spec = SmoothTermSpec::fixed(covariate, values, Vec::new())?;
    if spec.boundary.0 == spec.boundary.1 {
        log::warn!("covariate '{covariate}' is constant; smooth term has no columns");
        return Ok(spec);
    }
    if opts.max_knots == 0 {
        return Ok(spec);
    }
    spec.selection = KnotSelection::BicSearch;
    let quadrature: Vec<f64> = values.iter().zip(&data.is_presence).filter(|(_, &p)| !p).map(|(&v, _)| v).collect();
    let candidates = quantile_candidates(&quadrature, opts.n_quantiles);

    let eval = |knots: &[f64]| -> f64 {
        let trial = SmoothTermSpec { interior_knots: knots.to_vec(), ..spec.clone() };
        let t = TermSpec::Smooth(trial);
        let block = t.columns(values).and_then(|c| CovariateBlock::new(t.labels(), c));
        score(opts.criterion, &block.ok().and_then(|b| fit_block(data, base, b, &opts.irls)))
    };
    let best_of = |options: Vec<Vec<f64>>| -> Option<(Vec<f64>, f64)> {
        let scores: Vec<f64> = options.par_iter().map(|k| eval(k)).collect();
        options.into_iter().zip(scores).fold(None, |acc, (k, s)| match acc {
            Some((_, bs)) if bs <= s => acc,
            _ => Some((k, s)),
        })
    };

    let mut knots: Vec<f64> = Vec::new();
    let mut current = eval(&knots);
    loop {
        let mut changed = false;
        if knots.len() < opts.max_knots {
            let adds: Vec<Vec<f64>> = candidates
                .iter()
                .filter(|c| !knots.contains(c))
                .map(|&c| {
                    let mut k = knots.clone();
                    k.push(c);
                    k.sort_by(f64::total_cmp);
                    k
                })
                .collect();
            if let Some((k, s)) = best_of(adds) {
                if improves(s, current) {
                    knots = k;
                    current = s;
                    changed = true;
                }
            }
        }
        while !knots.is_empty() {
            let drops: Vec<Vec<f64>> = (0..knots.len())
                .map(|i| {
                    let mut k = knots.clone();
                    k.remove(i);
                    k
                })
                .collect();
            match best_of(drops) {
                Some((k, s)) if improves(s, current) => {
                    knots = k;
                    current = s;
                    changed = true;
                }
                _ => break,
            }
        }
        if !changed {
            break;
        }
    }
    spec.interior_knots = knots;
    Ok(spec)
}

/// Fits one binary factor `covariate < t` per candidate threshold and keeps
/// the best; ties go to the smaller threshold.
pub fn select_threshold(
    data: &PpmDataset,
    covariate: &str,
    candidates: &[f64],
    base: Option<&CovariateBlock>,
    criterion: FitCriterion,
    irls: &IrlsOptions,
) -> Result<FactorThresholdSpec> {
    if candidates.is_empty() {
        return Err(Error::invalid("threshold selection needs at least one candidate"));
    }
    if let Some(c) = candidates.iter().find(|c| !c.is_finite()) {
        return Err(Error::invalid(format!("threshold candidate {c} is not finite")));
    }
    let values = data
        .covariate(covariate)
        .ok_or_else(|| Error::invalid(format!("unknown covariate '{covariate}'")))?;
    let range = finite_range(covariate, values)?;
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let make = |t: f64| FactorThresholdSpec { covariate: covariate.to_string(), candidates: sorted.clone(), chosen: t, range };

    let scores: Vec<f64> = sorted
        .par_iter()
        .map(|&t| {
            let term = TermSpec::Threshold(make(t));
            let block = term.columns(values).and_then(|c| CovariateBlock::new(term.labels(), c));
            score(criterion, &block.ok().and_then(|b| fit_block(data, base, b, irls)))
        })
        .collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    if sorted.len() > 1 && !scores[best].is_finite() {
        log::warn!("no threshold for '{covariate}' gave a usable fit; keeping the smallest");
    }
    Ok(make(sorted[best]))
}

/// Mean of the fitted spatial (radial) contribution to the linear predictor
/// over the design rows; partial effects hold the spatial term at this value.
pub fn spatial_reference(model: &FittedModel, design: &DesignMatrix) -> Result<f64> {
    if design.labels != model.labels {
        return Err(Error::invalid("design does not match the model"));
    }
    let off = model.radial_offset();
    let k = model.n_knots();
    if k == 0 || design.nrows() == 0 {
        return Ok(0.0);
    }
    let contrib = design.x.columns(off, k) * model.coefficients.rows(off, k);
    Ok(contrib.mean())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectCurve {
    pub covariate: String,
    pub values: Vec<f64>,
    pub intensity: Vec<f64>,
    pub warnings: Vec<String>,
}

impl EffectCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Io { path: "<effect csv>".into(), source: e.into() };
        let mut w = csv::Writer::from_writer(out);
        w.write_record([self.covariate.as_str(), "intensity"]).map_err(io)?;
        for (v, l) in self.values.iter().zip(&self.intensity) {
            w.write_record([v.to_string(), l.to_string()]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<effect csv>".into(), source: e })
    }
}

/// Intensity along `grid` for `covariate`, with every other term's covariate
/// held at `fixed` and the spatial term at `spatial_offset`.
///
/// Grid values outside a term's training range are clamped (with a warning).
/// A covariate that no term uses gives a constant curve.
pub fn partial_effect(
    model: &FittedModel,
    terms: &[TermSpec],
    covariate: &str,
    grid: &[f64],
    fixed: &[(String, f64)],
    spatial_offset: f64,
) -> Result<EffectCurve> {
    partial_effect_from(model.coefficients.as_slice(), &model.labels, terms, covariate, grid, fixed, spatial_offset)
}

/// [`partial_effect`] from raw coefficients and column labels (intercept
/// and covariate columns first, as in every design built here).
pub fn partial_effect_from(
    coefficients: &[f64],
    labels: &[String],
    terms: &[TermSpec],
    covariate: &str,
    grid: &[f64],
    fixed: &[(String, f64)],
    spatial_offset: f64,
) -> Result<EffectCurve> {
    let n = grid.len();
    let mut warnings = Vec::new();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for t in terms {
        let name = t.covariate();
        if columns.iter().any(|(c, _)| c == name) {
            continue;
        }
        let values = if name == covariate {
            let (lo, hi) = t.range();
            if grid.iter().any(|&g| g < lo || g > hi) {
                let msg = format!("grid for '{covariate}' extends outside the training range [{lo}, {hi}]; clamped");
                log::warn!("{msg}");
                warnings.push(msg);
            }
            grid.iter().map(|&g| g.clamp(lo, hi)).collect()
        } else {
            let v = fixed
                .iter()
                .find(|(c, _)| c == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::invalid(format!("no fixed value given for covariate '{name}'")))?;
            vec![v; n]
        };
        columns.push((name.to_string(), values));
    }
    let block = build_covariate_block(terms, &columns)?;
    let x = covariate_design(n, &block)?;
    let nc = x.ncols();
    if coefficients.len() != labels.len() || labels.len() < nc || labels[..nc] != x.labels[..] {
        return Err(Error::invalid("terms do not match the model's covariate columns"));
    }
    let intensity = (0..n)
        .map(|i| {
            let eta: f64 = x.x.row(i).iter().zip(&coefficients[..nc]).map(|(a, b)| a * b).sum();
            crate::fit::intensity(eta + spatial_offset)
        })
        .collect();
    Ok(EffectCurve { covariate: covariate.to_string(), values: grid.to_vec(), intensity, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_columns_drop_first_basis() {
        let values: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let s = SmoothTermSpec::fixed("x", &values, vec![5.0]).unwrap();
        assert_eq!(s.n_columns(), 3);
        let t = TermSpec::Smooth(s);
        assert_eq!(t.labels(), vec!["x_s1", "x_s2", "x_s3"]);
        let cols = t.columns(&values).unwrap();
        assert_eq!(cols.len(), 3);
        // At the lower boundary only the dropped first basis is non-zero.
        assert!(cols.iter().all(|c| c[0].abs() < 1e-15));
    }

    #[test]
    fn threshold_indicator() {
        let t = TermSpec::Threshold(FactorThresholdSpec {
            covariate: "water".into(),
            candidates: vec![3.0],
            chosen: 3.0,
            range: (0.0, 10.0),
        });
        assert_eq!(t.columns(&[1.0, 2.99, 3.0, 7.0]).unwrap(), vec![vec![1.0, 1.0, 0.0, 0.0]]);
        assert_eq!(t.labels(), vec!["water<3"]);
    }

    #[test]
    fn quantile_candidates_are_interior_and_distinct() {
        let v: Vec<f64> = (0..100).map(|i| (i / 10) as f64).collect();
        let c = quantile_candidates(&v, 19);
        assert!(c.iter().all(|&q| q > 0.0 && q < 9.0));
        assert!(c.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn unknown_covariate() {
        let t = [TermSpec::Linear { covariate: "a".into(), range: (0.0, 1.0) }];
        assert!(build_covariate_block(&t, &[("b".into(), vec![1.0])]).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let t = TermSpec::Smooth(SmoothTermSpec::fixed("rain", &[100.0, 300.0, 600.0], vec![300.0]).unwrap());
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"kind\":\"smooth\""));
        assert_eq!(serde_json::from_str::<TermSpec>(&s).unwrap(), t);
    }
}
