//! SALSA2D: adaptive selection of knot number, location and range for a
//! radial-basis spatial term.
//!
//! The search starts from a space-filled knot set (with a drop-step that
//! removes knots until the start model is well conditioned) and then loops
//! simplify → exchange → improve, re-selecting each knot's range index, until
//! no step strictly improves the criterion.
//!
//! All knot sets are kept sorted by candidate index. Candidate fits run in
//! parallel; acceptance is sequential, so results do not depend on the
//! thread count.

mod candidates;
mod residuals;
mod trace;

pub use candidates::{build_candidate_knots, space_fill, CandidateSet, PseudoKnotCount};
pub use residuals::{knot_region_residuals, RegionScore};
pub use trace::{KnotAction, SalsaTrace, StepKind, TraceEntry};

use std::collections::HashMap;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{build_design, BasisKind, CovariateBlock, DesignMatrix, RSequence, RadialKnot};
use crate::error::{Error, Result};
use crate::fit::{fit_weighted_poisson_with, FitCriterion, FittedModel, IrlsOptions};
use crate::geometry::{DistanceMatrix, PointSet};
use crate::ppm::PpmDataset;

/// When range indices are re-chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RSelectMode {
    /// Knots keep their range during simplify/exchange/improve; a separate
    /// coordinate search over range indices runs after each step.
    #[default]
    AfterEachStep,
    /// Additionally, every knot placed by exchange or improve is tried at
    /// every range index. Much slower.
    DuringSteps,
}

impl std::str::FromStr for RSelectMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "after_each_step" => Ok(RSelectMode::AfterEachStep),
            "during_steps" => Ok(RSelectMode::DuringSteps),
            other => Err(Error::invalid(format!("unknown r selection mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SalsaConfig {
    pub criterion: FitCriterion,
    /// Knot regions with the largest `|O - E|` offered to the exchange step.
    pub n_residual_candidates: usize,
    pub n_improve_neighbours: usize,
    pub r_select_mode: RSelectMode,
    pub max_outer_iterations: usize,
    /// Length of the range sequence built by callers.
    pub r_count: usize,
    /// Recorded for provenance; the search itself is deterministic.
    pub rng_seed: u64,
    /// Drop-step threshold on the largest radial variance inflation factor.
    pub max_vif: f64,
    pub irls: IrlsOptions,
}

impl Default for SalsaConfig {
    fn default() -> Self {
        SalsaConfig {
            criterion: FitCriterion::Bic,
            n_residual_candidates: 10,
            n_improve_neighbours: 5,
            r_select_mode: RSelectMode::AfterEachStep,
            max_outer_iterations: 20,
            r_count: 10,
            rng_seed: 0,
            max_vif: 1e8,
            irls: IrlsOptions::default(),
        }
    }
}

impl SalsaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_residual_candidates == 0 || self.n_improve_neighbours == 0 || self.max_outer_iterations == 0 {
            return Err(Error::invalid("SALSA counts must be at least 1"));
        }
        if self.r_count == 0 {
            return Err(Error::invalid("range sequence length must be at least 1"));
        }
        if !(self.max_vif > 1.0) {
            return Err(Error::invalid(format!("variance inflation cap must exceed 1, got {}", self.max_vif)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnotLimits {
    pub start: usize,
    pub min: usize,
    pub max: usize,
}

impl KnotLimits {
    pub fn validate(&self, n_candidates: usize) -> Result<()> {
        let KnotLimits { start, min, max } = *self;
        if !(2 <= min && min <= start && start <= max && max <= n_candidates) {
            return Err(Error::invalid(format!(
                "knot limits need 2 <= min ({min}) <= start ({start}) <= max ({max}) <= candidates ({n_candidates})"
            )));
        }
        Ok(())
    }
}

/// The search state: active knots (sorted by candidate index) with their
/// range indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotState {
    pub knots: Vec<RadialKnot>,
    pub basis: BasisKind,
    pub limits: KnotLimits,
}

impl KnotState {
    pub fn new(mut knots: Vec<RadialKnot>, basis: BasisKind, limits: KnotLimits) -> Result<Self> {
        knots.sort_by_key(|k| k.candidate);
        if knots.windows(2).any(|w| w[0].candidate == w[1].candidate) {
            return Err(Error::invalid("active knots must be distinct"));
        }
        Ok(KnotState { knots, basis, limits })
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn candidates(&self) -> Vec<usize> {
        self.knots.iter().map(|k| k.candidate).collect()
    }

    pub fn contains(&self, candidate: usize) -> bool {
        self.knots.binary_search_by_key(&candidate, |k| k.candidate).is_ok()
    }
}

/// Immutable inputs shared by every candidate fit.
pub struct SalsaProblem<'a> {
    pub data: &'a PpmDataset,
    pub candidates: &'a PointSet,
    /// Data points × candidates.
    pub data_distances: &'a DistanceMatrix,
    /// Candidates × candidates.
    pub candidate_distances: &'a DistanceMatrix,
    pub covariates: Option<&'a CovariateBlock>,
}

impl<'a> SalsaProblem<'a> {
    pub fn new(
        data: &'a PpmDataset,
        candidates: &'a PointSet,
        data_distances: &'a DistanceMatrix,
        candidate_distances: &'a DistanceMatrix,
        covariates: Option<&'a CovariateBlock>,
    ) -> Result<Self> {
        let nc = candidates.len();
        if nc == 0 {
            return Err(Error::invalid("no candidate knot locations"));
        }
        if data_distances.rows() != data.len() || data_distances.cols() != nc {
            return Err(Error::invalid(format!(
                "data distances are {}x{}, expected {}x{nc}",
                data_distances.rows(),
                data_distances.cols(),
                data.len()
            )));
        }
        if candidate_distances.rows() != nc || candidate_distances.cols() != nc {
            return Err(Error::invalid("candidate distances must be square over the candidate set"));
        }
        if data_distances.metric() != candidate_distances.metric() {
            return Err(Error::invalid("data and candidate distances use different metrics"));
        }
        if let Some(rows) = covariates.and_then(CovariateBlock::rows) {
            if rows != data.len() {
                return Err(Error::invalid(format!("covariates have {rows} rows, data has {}", data.len())));
            }
        }
        Ok(SalsaProblem { data, candidates, data_distances, candidate_distances, covariates })
    }

    pub fn design(&self, knots: &[RadialKnot], rseq: &RSequence) -> Result<DesignMatrix> {
        build_design(knots, self.data_distances, rseq, self.covariates)
    }

    pub fn fit(&self, knots: &[RadialKnot], rseq: &RSequence, irls: &IrlsOptions, start: Option<&DVector<f64>>) -> Result<FittedModel> {
        let x = self.design(knots, rseq)?;
        fit_weighted_poisson_with(&x, &self.data.y, &self.data.w, irls, start)
    }
}

#[derive(Debug, Clone)]
pub struct SalsaOutcome {
    pub model: FittedModel,
    pub state: KnotState,
    pub trace: SalsaTrace,
    pub initial_score: f64,
    pub final_score: f64,
    pub outer_iterations: usize,
    pub warnings: Vec<String>,
}

/// `new` beats `old` only by more than a relative 1e-9.
fn improves(new: f64, old: f64) -> bool {
    new < old - 1e-9 * old.abs().max(1.0)
}

/// One proposed knot set with its tie-breaking key.
struct Proposal {
    knots: Vec<RadialKnot>,
    action: KnotAction,
    /// Lower wins among equal scores: knot count, then candidate indices.
    tie: (usize, usize, usize),
}

/// Search state over a fixed problem. The step methods each run to their
/// own fixed point and return whether anything was accepted.
pub struct SalsaSearch<'p, 'a> {
    problem: &'p SalsaProblem<'a>,
    rseq: &'p RSequence,
    config: &'p SalsaConfig,
    state: KnotState,
    model: FittedModel,
    score: f64,
    cache: HashMap<Vec<(usize, usize)>, f64>,
    trace: SalsaTrace,
    outer: usize,
}

fn key(knots: &[RadialKnot]) -> Vec<(usize, usize)> {
    knots.iter().map(|k| (k.candidate, k.r_index)).collect()
}

fn sorted(mut knots: Vec<RadialKnot>) -> Vec<RadialKnot> {
    knots.sort_by_key(|k| k.candidate);
    knots
}

impl<'p, 'a> SalsaSearch<'p, 'a> {
    /// Starts from a fitted model of `state` (usually from [`initialise`]).
    pub fn new(
        problem: &'p SalsaProblem<'a>,
        rseq: &'p RSequence,
        config: &'p SalsaConfig,
        state: KnotState,
        model: FittedModel,
    ) -> Self {
        let score = config.criterion.score(&model);
        let mut cache = HashMap::new();
        cache.insert(key(&state.knots), score);
        SalsaSearch { problem, rseq, config, state, model, score, cache, trace: SalsaTrace::default(), outer: 0 }
    }

    pub fn state(&self) -> &KnotState {
        &self.state
    }

    pub fn model(&self) -> &FittedModel {
        &self.model
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn trace(&self) -> &SalsaTrace {
        &self.trace
    }

    /// Warm start mapped from the current model: shared knots keep their
    /// coefficients, new knots start at zero.
    fn warm_start(&self, knots: &[RadialKnot]) -> DVector<f64> {
        let off = self.model.radial_offset();
        let mut b = DVector::zeros(off + knots.len());
        b.rows_mut(0, off).copy_from(&self.model.coefficients.rows(0, off));
        for (j, k) in knots.iter().enumerate() {
            if let Some(i) = self.model.radial.iter().position(|c| c.candidate == k.candidate && c.r_index == k.r_index) {
                b[off + j] = self.model.coefficients[off + i];
            }
        }
        b
    }

    fn evaluate(&self, knots: &[RadialKnot]) -> Option<FittedModel> {
        let start = self.warm_start(knots);
        self.problem
            .fit(knots, self.rseq, &self.config.irls, Some(&start))
            .ok()
            .filter(|m| m.converged && self.config.criterion.score(m).is_finite())
    }

    /// Scores all proposals (in parallel, cached), adopts the best one if it
    /// strictly improves the current criterion, and logs the outcome.
    fn try_proposals(&mut self, step: StepKind, proposals: Vec<Proposal>) -> bool {
        if proposals.is_empty() {
            return false;
        }
        let fresh: Vec<(usize, Option<FittedModel>)> = proposals
            .par_iter()
            .enumerate()
            .filter(|(_, p)| !self.cache.contains_key(&key(&p.knots)))
            .map(|(i, p)| (i, self.evaluate(&p.knots)))
            .collect();
        let mut models: HashMap<usize, FittedModel> = HashMap::new();
        for (i, m) in fresh {
            let s = m.as_ref().map_or(f64::INFINITY, |m| self.config.criterion.score(m));
            self.cache.insert(key(&proposals[i].knots), s);
            if let Some(m) = m {
                models.insert(i, m);
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in proposals.iter().enumerate() {
            let s = self.cache[&key(&p.knots)];
            let better = match best {
                None => true,
                Some((b, bs)) => s < bs || (s == bs && p.tie < proposals[b].tie),
            };
            if better {
                best = Some((i, s));
            }
        }
        let (bi, bs) = best.expect("non-empty proposals");
        if !improves(bs, self.score) {
            self.trace.push(TraceEntry {
                outer: self.outer,
                step,
                action: KnotAction::NoChange,
                before: self.score,
                after: self.score,
                accepted: false,
                n_knots: self.state.len(),
            });
            return false;
        }
        let model = match models.remove(&bi) {
            Some(m) => m,
            None => match self.evaluate(&proposals[bi].knots) {
                Some(m) => m,
                None => return false,
            },
        };
        let after = self.config.criterion.score(&model);
        if !improves(after, self.score) {
            return false;
        }
        let p = proposals.into_iter().nth(bi).expect("index in range");
        self.trace.push(TraceEntry {
            outer: self.outer,
            step,
            action: p.action,
            before: self.score,
            after,
            accepted: true,
            n_knots: p.knots.len(),
        });
        self.state.knots = p.knots;
        self.model = model;
        self.score = after;
        true
    }

    pub fn simplify(&mut self) -> bool {
        let mut any = false;
        while self.state.len() > self.state.limits.min {
            let proposals = (0..self.state.len())
                .map(|j| {
                    let mut knots = self.state.knots.clone();
                    let removed = knots.remove(j);
                    Proposal {
                        knots,
                        action: KnotAction::Remove { candidate: removed.candidate },
                        tie: (self.state.len() - 1, removed.candidate, 0),
                    }
                })
                .collect();
            if !self.try_proposals(StepKind::Simplify, proposals) {
                break;
            }
            any = true;
        }
        any
    }

    /// Variants of a newly placed knot: its given range only, or every range
    /// when ranges are selected during steps.
    fn placements(&self, candidate: usize, r_index: usize) -> Vec<RadialKnot> {
        match self.config.r_select_mode {
            RSelectMode::AfterEachStep => vec![RadialKnot { candidate, r_index }],
            RSelectMode::DuringSteps => (0..self.rseq.len()).map(|r| RadialKnot { candidate, r_index: r }).collect(),
        }
    }

    fn intensity(&self) -> Vec<f64> {
        let x = self
            .problem
            .design(&self.state.knots, self.rseq)
            .expect("current knot set has a valid design");
        crate::fit::predict_intensity(&self.model, &x).expect("current model matches its design")
    }

    pub fn exchange(&mut self) -> bool {
        let mut any = false;
        loop {
            let remaining: Vec<usize> =
                (0..self.problem.candidates.len()).filter(|&c| !self.state.contains(c)).collect();
            if remaining.is_empty() {
                break;
            }
            let lambda = self.intensity();
            let regions = match knot_region_residuals(self.problem.data, self.problem.data_distances, &lambda, &remaining) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("exchange skipped: {e}");
                    break;
                }
            };
            let k = self.state.len();
            let middle = self.rseq.middle();
            let mut proposals = Vec::new();
            for region in regions.iter().take(self.config.n_residual_candidates) {
                let c = region.candidate;
                for j in 0..k {
                    let old = self.state.knots[j];
                    for knot in self.placements(c, old.r_index) {
                        let mut knots = self.state.knots.clone();
                        knots[j] = knot;
                        proposals.push(Proposal {
                            knots: sorted(knots),
                            action: KnotAction::Move { from: old.candidate, to: c },
                            tie: (k, c, old.candidate),
                        });
                    }
                }
                if k < self.state.limits.max {
                    for knot in self.placements(c, middle) {
                        let mut knots = self.state.knots.clone();
                        knots.push(knot);
                        proposals.push(Proposal {
                            knots: sorted(knots),
                            action: KnotAction::Add { candidate: c, r: knot.r_index },
                            tie: (k + 1, c, 0),
                        });
                    }
                }
            }
            if !self.try_proposals(StepKind::Exchange, proposals) {
                break;
            }
            any = true;
        }
        any
    }

    pub fn improve(&mut self) -> bool {
        let mut any = false;
        let nc = self.problem.candidates.len();
        loop {
            let k = self.state.len();
            let mut proposals = Vec::new();
            for j in 0..k {
                let old = self.state.knots[j];
                let row = self.problem.candidate_distances.row(old.candidate);
                let mut unused: Vec<usize> = (0..nc).filter(|&c| !self.state.contains(c)).collect();
                unused.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
                for &c in unused.iter().take(self.config.n_improve_neighbours) {
                    if !row[c].is_finite() {
                        continue;
                    }
                    for knot in self.placements(c, old.r_index) {
                        let mut knots = self.state.knots.clone();
                        knots[j] = knot;
                        proposals.push(Proposal {
                            knots: sorted(knots),
                            action: KnotAction::Move { from: old.candidate, to: c },
                            tie: (k, c, old.candidate),
                        });
                    }
                }
            }
            if !self.try_proposals(StepKind::Improve, proposals) {
                break;
            }
            any = true;
        }
        any
    }

    /// Coordinate search over range indices: each knot steps ±1 while that
    /// improves, others held fixed; cycles until a full pass changes nothing.
    pub fn select_r(&mut self) -> bool {
        if self.rseq.len() < 2 {
            return false;
        }
        let mut any = false;
        loop {
            let mut pass_changed = false;
            for j in 0..self.state.len() {
                for dir in [-1i64, 1] {
                    loop {
                        let cur = self.state.knots[j];
                        let next = cur.r_index as i64 + dir;
                        if next < 0 || next >= self.rseq.len() as i64 {
                            break;
                        }
                        let mut knots = self.state.knots.clone();
                        knots[j].r_index = next as usize;
                        let proposal = Proposal {
                            knots,
                            action: KnotAction::SetR { candidate: cur.candidate, from: cur.r_index, to: next as usize },
                            tie: (self.state.len(), cur.candidate, next as usize),
                        };
                        if !self.try_proposals_quiet(StepKind::SelectR, proposal) {
                            break;
                        }
                        pass_changed = true;
                    }
                }
            }
            if !pass_changed {
                break;
            }
            any = true;
        }
        any
    }

    /// Single-proposal variant that does not log rejections (the range
    /// search probes many single moves).
    fn try_proposals_quiet(&mut self, step: StepKind, proposal: Proposal) -> bool {
        let before = self.trace.entries.len();
        let accepted = self.try_proposals(step, vec![proposal]);
        if !accepted {
            self.trace.entries.truncate(before);
        }
        accepted
    }
}

/// Nearest-neighbour distance of each knot to the other active knots.
fn nearest_knot_distance(knots: &[RadialKnot], d: &DistanceMatrix) -> Vec<f64> {
    knots
        .iter()
        .map(|a| {
            knots
                .iter()
                .filter(|b| b.candidate != a.candidate)
                .map(|b| d.get(a.candidate, b.candidate))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Largest uncentred variance inflation factor over the radial columns,
/// `Cov_kk * sum_i w_i lambda_i x_ik^2`, with its column position.
pub fn radial_vif(model: &FittedModel, x: &DesignMatrix, w: &[f64]) -> Option<(usize, f64)> {
    let lambda = crate::fit::predict_intensity(model, x).ok()?;
    let off = model.radial_offset();
    let mut best: Option<(usize, f64)> = None;
    for j in 0..model.n_knots() {
        let col = x.x.column(off + j);
        let info: f64 = (0..col.len()).map(|i| w[i] * lambda[i] * col[i] * col[i]).sum();
        let vif = model.covariance[(off + j, off + j)] * info;
        if best.is_none_or(|(_, b)| vif > b) {
            best = Some((j, vif));
        }
    }
    best
}

/// Outcome of the initialisation with its drop-step log.
#[derive(Debug, Clone)]
pub struct Initialised {
    pub model: FittedModel,
    pub state: KnotState,
    pub dropped: Vec<usize>,
}

/// Fits the start model, dropping knots until the fit converges, has full
/// rank and its largest radial variance inflation factor is within
/// `config.max_vif`.
///
/// The knot dropped is the first rank-dependent radial column when the
/// design is rank deficient, the most crowded knot when the fit fails
/// numerically, and otherwise the knot with the largest coefficient variance.
pub fn initialise(problem: &SalsaProblem, rseq: &RSequence, mut state: KnotState, config: &SalsaConfig) -> Result<Initialised> {
    let mut dropped = Vec::new();
    loop {
        let x = problem.design(&state.knots, rseq)?;
        let drop_at = match fit_weighted_poisson_with(&x, &problem.data.y, &problem.data.w, &config.irls, None) {
            Ok(model) if model.converged => match radial_vif(&model, &x, &problem.data.w) {
                Some((_, vif)) if vif > config.max_vif => {
                    let off = model.radial_offset();
                    let j = (0..model.n_knots())
                        .max_by(|&a, &b| {
                            model.covariance[(off + a, off + a)]
                                .total_cmp(&model.covariance[(off + b, off + b)])
                                .then(b.cmp(&a))
                        })
                        .expect("at least one knot");
                    log::debug!("drop-step: vif {vif:.3e} exceeds {:.3e}", config.max_vif);
                    j
                }
                _ => return Ok(Initialised { model, state, dropped }),
            },
            Ok(_) => crowded(&state, problem),
            Err(Error::RankDeficient { columns }) => {
                let off = x.radial_offset();
                match columns.iter().find_map(|c| x.labels.iter().position(|l| l == c).filter(|&p| p >= off)) {
                    Some(p) => p - off,
                    None => return Err(Error::RankDeficient { columns }),
                }
            }
            Err(Error::Numerical(_)) => crowded(&state, problem),
            Err(e) => return Err(e),
        };
        if state.len() <= state.limits.min {
            return Err(Error::DropStepFailed { k_min: state.limits.min });
        }
        let removed = state.knots.remove(drop_at);
        dropped.push(removed.candidate);
    }
}

fn crowded(state: &KnotState, problem: &SalsaProblem) -> usize {
    let nn = nearest_knot_distance(&state.knots, problem.candidate_distances);
    (0..nn.len()).min_by(|&a, &b| nn[a].total_cmp(&nn[b]).then(a.cmp(&b))).unwrap_or(0)
}

/// Runs the full search from a space-filled start of `limits.start` knots.
pub fn run_salsa2d(problem: &SalsaProblem, rseq: &RSequence, limits: KnotLimits, config: &SalsaConfig) -> Result<SalsaOutcome> {
    config.validate()?;
    limits.validate(problem.candidates.len())?;
    let start = space_fill(problem.candidates, limits.start, problem.candidate_distances)?;
    let middle = rseq.middle();
    let knots = start.into_iter().map(|c| RadialKnot { candidate: c, r_index: middle }).collect();
    let state = KnotState::new(knots, rseq.kind(), limits)?;
    run_salsa2d_from(problem, rseq, state, config)
}

/// Runs the search from an explicit start state.
pub fn run_salsa2d_from(problem: &SalsaProblem, rseq: &RSequence, state: KnotState, config: &SalsaConfig) -> Result<SalsaOutcome> {
    config.validate()?;
    state.limits.validate(problem.candidates.len())?;
    if state.len() != state.limits.start {
        return Err(Error::invalid("start state size differs from the start knot count"));
    }
    if state.knots.iter().any(|k| k.candidate >= problem.candidates.len() || k.r_index >= rseq.len()) {
        return Err(Error::invalid("start knot outside the candidate set or range sequence"));
    }

    let mut trace = SalsaTrace::default();
    let init = initialise(problem, rseq, state, config)?;
    let initial_score = config.criterion.score(&init.model);
    trace.push(TraceEntry {
        outer: 0,
        step: StepKind::Initialise,
        action: KnotAction::Start { knots: init.state.candidates() },
        before: initial_score,
        after: initial_score,
        accepted: false,
        n_knots: init.state.len(),
    });
    for &c in &init.dropped {
        trace.push(TraceEntry {
            outer: 0,
            step: StepKind::DropStep,
            action: KnotAction::Drop { candidate: c },
            before: initial_score,
            after: initial_score,
            accepted: false,
            n_knots: init.state.len(),
        });
    }

    let mut search = SalsaSearch::new(problem, rseq, config, init.state, init.model);
    search.trace = trace;
    let after_each = |s: &mut SalsaSearch| s.select_r();

    let mut warnings = Vec::new();
    let mut converged = false;
    while search.outer < config.max_outer_iterations {
        search.outer += 1;
        let mut improved = false;
        improved |= search.simplify();
        improved |= after_each(&mut search);
        improved |= search.exchange();
        improved |= after_each(&mut search);
        improved |= search.improve();
        improved |= after_each(&mut search);
        log::info!(
            "salsa2d pass {}: {} knots, {} = {:.4}",
            search.outer,
            search.state.len(),
            config.criterion,
            search.score
        );
        if !improved {
            converged = true;
            break;
        }
    }
    if !converged {
        let msg = format!("outer iteration cap {} reached; returning best model so far", config.max_outer_iterations);
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let final_score = search.score;
    Ok(SalsaOutcome {
        model: search.model,
        state: search.state,
        trace: search.trace,
        initial_score,
        final_score,
        outer_iterations: search.outer,
        warnings,
    })
}
