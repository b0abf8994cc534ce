//! Model averaging over fixed space-filled knot grids.
//!
//! Every member uses `K` space-filled knots sharing one range index. Members
//! within `delta_threshold` AICc units of the best are averaged with Akaike
//! weights.

use std::io::Write;

use rayon::prelude::*;

use crate::design::{build_design, CovariateBlock, RSequence, RadialKnot};
use crate::error::{Error, Result};
use crate::fit::{predict_intensity, FittedModel, IrlsOptions};
use crate::geometry::{DistanceMatrix, MetricTag};
use crate::salsa::{space_fill, SalsaProblem};

pub const DEFAULT_DELTA_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub model: FittedModel,
    pub n_knots: usize,
    pub r_index: usize,
    pub knots: Vec<RadialKnot>,
}

impl EnsembleMember {
    pub fn aicc(&self) -> f64 {
        self.model.aicc.unwrap_or(f64::INFINITY)
    }
}

/// Members that fitted, plus a warning for each that did not.
#[derive(Debug, Clone)]
pub struct GridFit {
    pub members: Vec<EnsembleMember>,
    pub warnings: Vec<String>,
    pub n_candidates: usize,
    pub metric: MetricTag,
}

/// Fits one member per `(K, r_index)` pair, in parallel.
pub fn fit_grid(problem: &SalsaProblem, k_list: &[usize], rseq: &RSequence, irls: &IrlsOptions) -> Result<GridFit> {
    if k_list.is_empty() {
        return Err(Error::invalid("model averaging needs at least one knot count"));
    }
    let nc = problem.candidates.len();
    if let Some(&k) = k_list.iter().find(|&&k| k == 0 || k > nc) {
        return Err(Error::invalid(format!("knot count {k} outside 1..={nc}")));
    }
    let layouts: Vec<Vec<usize>> =
        k_list.iter().map(|&k| space_fill(problem.candidates, k, problem.candidate_distances)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..k_list.len()).flat_map(|ki| (0..rseq.len()).map(move |r| (ki, r))).collect();
    let results: Vec<(usize, usize, Result<FittedModel>)> = jobs
        .par_iter()
        .map(|&(ki, r)| {
            let knots: Vec<RadialKnot> = layouts[ki].iter().map(|&c| RadialKnot { candidate: c, r_index: r }).collect();
            (ki, r, problem.fit(&knots, rseq, irls, None))
        })
        .collect();

    let mut members = Vec::new();
    let mut warnings = Vec::new();
    for (ki, r, res) in results {
        let k = k_list[ki];
        match res {
            Ok(model) if model.converged && model.aicc.is_some() => {
                let knots = layouts[ki].iter().map(|&c| RadialKnot { candidate: c, r_index: r }).collect();
                members.push(EnsembleMember { model, n_knots: k, r_index: r, knots });
            }
            Ok(model) => {
                let why = if model.converged { "AICc undefined" } else { "did not converge" };
                warnings.push(format!("member K={k} r={} excluded: {why}", r + 1));
            }
            Err(e) => warnings.push(format!("member K={k} r={} excluded: {e}", r + 1)),
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(GridFit { members, warnings, n_candidates: nc, metric: problem.data_distances.metric() })
}

/// Akaike weights over members with `delta <= threshold` (or `<` when
/// `strict`), referenced to the minimum AICc. Excluded members get weight 0.
pub fn aicc_weights(aicc: &[f64], threshold: f64, strict: bool) -> Result<Vec<f64>> {
    if aicc.is_empty() {
        return Err(Error::invalid("no members to weight"));
    }
    let best = aicc.iter().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::Numerical("no member has a finite AICc".into()));
    }
    let keep = |d: f64| if strict { d < threshold } else { d <= threshold };
    let raw: Vec<f64> = aicc
        .iter()
        .map(|&a| {
            let d = a - best;
            if keep(d) { (-d / 2.0).exp() } else { 0.0 }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

#[derive(Debug, Clone)]
pub struct AveragingEnsemble {
    /// Every fitted member, including those filtered out.
    pub members: Vec<EnsembleMember>,
    pub deltas: Vec<f64>,
    pub weights: Vec<f64>,
    pub delta_threshold: f64,
    pub rseq: RSequence,
    pub n_candidates: usize,
    pub metric: MetricTag,
}

impl AveragingEnsemble {
    pub fn new(grid: GridFit, rseq: RSequence, delta_threshold: f64, strict: bool) -> Result<Self> {
        let aicc: Vec<f64> = grid.members.iter().map(EnsembleMember::aicc).collect();
        let weights = aicc_weights(&aicc, delta_threshold, strict)?;
        let best = aicc.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(AveragingEnsemble {
            deltas: aicc.iter().map(|a| a - best).collect(),
            members: grid.members,
            weights,
            delta_threshold,
            rseq,
            n_candidates: grid.n_candidates,
            metric: grid.metric,
        })
    }

    /// Members entering the average.
    pub fn n_averaged(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    /// `sum_i w_i lambda_i(x)` at the rows of `distances` (locations ×
    /// candidates).
    pub fn predict(&self, distances: &DistanceMatrix, covariates: Option<&CovariateBlock>) -> Result<Vec<f64>> {
        if distances.cols() != self.n_candidates {
            return Err(Error::invalid(format!(
                "prediction distances have {} candidate columns, ensemble was fitted with {}",
                distances.cols(),
                self.n_candidates
            )));
        }
        if distances.metric() != self.metric {
            return Err(Error::invalid(format!(
                "prediction distances are {}, ensemble was fitted with {}",
                distances.metric(),
                self.metric
            )));
        }
        let mut out = vec![0.0; distances.rows()];
        for (m, &w) in self.members.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            let x = build_design(&m.knots, distances, &self.rseq, covariates)?;
            for (o, l) in out.iter_mut().zip(predict_intensity(&m.model, &x)?) {
                *o += w * l;
            }
        }
        Ok(out)
    }

    /// Log-pseudolikelihood evaluated at the averaged intensity.
    pub fn log_pl(&self, distances: &DistanceMatrix, covariates: Option<&CovariateBlock>, y: &[f64], w: &[f64]) -> Result<f64> {
        let lambda = self.predict(distances, covariates)?;
        if y.len() != lambda.len() || w.len() != lambda.len() {
            return Err(Error::invalid("response and weights must match the prediction rows"));
        }
        Ok(lambda
            .iter()
            .zip(y.iter().zip(w))
            .map(|(&l, (&yi, &wi))| wi * (if yi > 0.0 { yi * l.ln() } else { 0.0 } - l))
            .sum())
    }

    /// CSV with one row per fitted member: K, r index (1-based), logPL,
    /// AICc, delta, weight.
    pub fn write_summary<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Io { path: "<ensemble summary>".into(), source: e.into() };
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["K", "r_index", "logPL", "AICc", "delta", "weight"]).map_err(io)?;
        for ((m, d), wt) in self.members.iter().zip(&self.deltas).zip(&self.weights) {
            w.write_record([
                m.n_knots.to_string(),
                (m.r_index + 1).to_string(),
                format!("{:.6}", m.model.log_pl),
                format!("{:.6}", m.aicc()),
                format!("{d:.6}"),
                format!("{wt:.8}"),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<ensemble summary>".into(), source: e })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn equal_aicc_splits_evenly() {
        let w = aicc_weights(&[100.0, 100.0], 10.0, false).unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn weight_pair_fixture() {
        let w = aicc_weights(&[50.0, 58.679], 10.0, false).unwrap();
        assert_relative_eq!(w[0], 0.98712668, epsilon = 5e-6);
        assert_relative_eq!(w[1], 0.01287332, epsilon = 5e-6);
    }

    #[test]
    fn threshold_boundary() {
        let w = aicc_weights(&[0.0, 10.0001], 10.0, false).unwrap();
        assert_eq!(w, vec![1.0, 0.0]);
        let w = aicc_weights(&[0.0, 10.0], 10.0, false).unwrap();
        assert!(w[1] > 0.0);
        let w = aicc_weights(&[0.0, 10.0], 10.0, true).unwrap();
        assert_eq!(w[1], 0.0);
    }

    #[test]
    fn weights_sum_to_one() {
        let a = [3.0, 1.0, 7.5, 30.0, 2.2, 11.0];
        let w = aicc_weights(&a, 10.0, false).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(w[3], 0.0);
        // delta of exactly 10 is kept
        assert!(w[5] > 0.0);
    }

    #[test]
    fn no_finite_member() {
        assert!(aicc_weights(&[f64::INFINITY], 10.0, false).is_err());
        assert!(aicc_weights(&[], 10.0, false).is_err());
    }
}
