use std::time::Instant;

use serde_json::json;

use salsa2d::design::{r_sequence, BasisKind, CovariateBlock, RSequence};
use salsa2d::fit::FittedModel;
use salsa2d::geometry::{DistanceProvider, GraphOptions, MetricTag, PointSet};
use salsa2d::io::{read_points_csv, GeodesicSpec, MemberDocument, ModelDocument, ModelSummary};
use salsa2d::modelavg::{fit_grid, AveragingEnsemble};
use salsa2d::ppm::{assemble_dataset, generate_pseudo_absences, PpmDataset};
use salsa2d::salsa::{build_candidate_knots, run_salsa2d, KnotLimits, PseudoKnotCount, SalsaConfig, SalsaProblem};
use salsa2d::terms::{
    build_covariate_block, select_knots_1d, select_threshold, spatial_reference, KnotSearchOptions, TermSpec,
};

use super::{csv_bytes, load_region, split_pair, CovariateSources, Region};
use crate::args::{FitArgs, Method};
use crate::error::{CliError, CliResult};
use crate::manifest::Run;

struct Context<'a> {
    args: &'a FitArgs,
    region: &'a Region,
    data: &'a PpmDataset,
    candidates: &'a PointSet,
    terms: &'a [TermSpec],
    block: Option<&'a CovariateBlock>,
    config: &'a SalsaConfig,
}

pub fn run(args: &FitArgs, run: &mut Run) -> CliResult<()> {
    let region = load_region(run, &args.region, args.exclusion.as_deref(), args.area)?;
    run.input("presences", &args.presences)?;
    let presences = read_points_csv(&args.presences)?;
    let sources = CovariateSources::load(run, args.covariates.as_deref(), &args.features)?;
    let pseudo = generate_pseudo_absences(&region.polygon, region.exclusion.as_ref(), args.spacing)?;
    let mut data = assemble_dataset(&presences, &pseudo, region.area, Vec::new())?.with_grid_spacing(args.spacing);
    for (name, values) in sources.sample(&data.points)? {
        data.set_covariate(&name, values)?;
    }
    let count = match args.pseudo_knots {
        Some(n) => PseudoKnotCount::Fixed(n),
        None => PseudoKnotCount::Fraction(args.pseudo_fraction),
    };
    let candidates = build_candidate_knots(&presences, &pseudo, count)?;
    log::info!(
        "{} presence rows, {} pseudo-absences, {} legal knot positions",
        data.n_presence(),
        data.n_pseudo(),
        candidates.points.len()
    );
    run.phase("load");

    let config = SalsaConfig {
        criterion: args.criterion,
        n_residual_candidates: args.exchange_regions,
        n_improve_neighbours: args.improve_neighbours,
        r_select_mode: args.r_select,
        max_outer_iterations: args.max_outer,
        r_count: args.r_count,
        rng_seed: args.seed,
        max_vif: args.max_vif,
        ..SalsaConfig::default()
    };
    config.validate()?;

    let terms = select_terms(args, &data, &config)?;
    let block = if terms.is_empty() { None } else { Some(build_covariate_block(&terms, &data.covariates)?) };
    run.phase("terms");

    let ctx = Context {
        args,
        region: &region,
        data: &data,
        candidates: &candidates.points,
        terms: &terms,
        block: block.as_ref(),
        config: &config,
    };
    if args.sweep {
        return sweep(&ctx, run);
    }
    let (provider, geodesic) = distances(&ctx, args.distance)?;
    run.phase("distances");
    let rseq = r_sequence(&provider.candidates_to_candidates, args.r_count, args.basis)?;
    let problem = SalsaProblem::new(
        &data,
        &candidates.points,
        &provider.data_to_candidates,
        &provider.candidates_to_candidates,
        block.as_ref(),
    )?;
    match args.method {
        Method::Salsa2d => fit_salsa(&ctx, run, &problem, &rseq, geodesic),
        Method::Average => fit_average(&ctx, run, &problem, &rseq, geodesic),
    }
}

/// Linear terms as given, then thresholds, then smooths; each selection
/// conditions on the terms already chosen.
fn select_terms(args: &FitArgs, data: &PpmDataset, config: &SalsaConfig) -> CliResult<Vec<TermSpec>> {
    let mut terms: Vec<TermSpec> = Vec::new();
    let base = |terms: &[TermSpec]| -> CliResult<Option<CovariateBlock>> {
        if terms.is_empty() {
            Ok(None)
        } else {
            Ok(Some(build_covariate_block(terms, &data.covariates)?))
        }
    };
    let need = |name: &str| -> CliResult<&[f64]> {
        data.covariate(name).ok_or_else(|| {
            CliError::Input(format!("term uses covariate '{name}', which no --covariates column or --feature provides"))
        })
    };
    for name in &args.linear {
        let v = need(name)?;
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        terms.push(TermSpec::Linear { covariate: name.clone(), range: (lo, hi) });
    }
    for spec in &args.threshold {
        let (name, list) = split_pair("threshold", spec)?;
        need(name)?;
        let cutoffs = list
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CliError::Input(format!("--threshold {spec}: {e}")))?;
        let chosen = select_threshold(data, name, &cutoffs, base(&terms)?.as_ref(), config.criterion, &config.irls)?;
        log::info!("threshold for '{name}': {}", chosen.chosen);
        terms.push(TermSpec::Threshold(chosen));
    }
    let opts = KnotSearchOptions {
        max_knots: args.smooth_max_knots,
        n_quantiles: args.smooth_quantiles,
        criterion: config.criterion,
        irls: config.irls.clone(),
    };
    for name in &args.smooth {
        need(name)?;
        let chosen = select_knots_1d(data, name, base(&terms)?.as_ref(), &opts)?;
        log::info!("smooth knots for '{name}': {:?}", chosen.interior_knots);
        terms.push(TermSpec::Smooth(chosen));
    }
    Ok(terms)
}

fn distances(ctx: &Context, metric: MetricTag) -> CliResult<(DistanceProvider, Option<GeodesicSpec>)> {
    match metric {
        MetricTag::Euclidean => Ok((DistanceProvider::euclidean(&ctx.data.points, ctx.candidates)?, None)),
        MetricTag::Geodesic => {
            let options = GraphOptions {
                connectivity: ctx.args.connectivity,
                attach_k: ctx.args.attach_k,
                ..GraphOptions::default()
            };
            let spacing = ctx.args.graph_spacing.unwrap_or(ctx.args.spacing);
            let spec = GeodesicSpec::new(ctx.region.polygon.clone(), ctx.region.exclusion.clone(), spacing, &options);
            let provider = spec.provider(&ctx.data.points, ctx.candidates)?;
            Ok((provider, Some(spec)))
        }
    }
}

/// Clamps the knot limits to the candidate count.
fn limits(args: &FitArgs, start: usize, n_candidates: usize, run: &mut Run) -> KnotLimits {
    let max = args.max_knots.min(n_candidates);
    let start_c = start.min(max);
    let min = args.min_knots.min(start_c);
    if max != args.max_knots || start_c != start || min != args.min_knots {
        run.warn(format!(
            "knot limits clamped to start={start_c} min={min} max={max} ({n_candidates} legal positions)"
        ));
    }
    KnotLimits { start: start_c, min, max }
}

#[allow(clippy::too_many_arguments)]
fn document(
    ctx: &Context,
    method: &str,
    rseq: &RSequence,
    metric: MetricTag,
    geodesic: Option<GeodesicSpec>,
    members: Vec<MemberDocument>,
    spatial_reference: f64,
    summary: ModelSummary,
) -> ModelDocument {
    ModelDocument {
        version: env!("CARGO_PKG_VERSION").into(),
        method: method.into(),
        basis: rseq.kind(),
        metric,
        r_values: rseq.values().to_vec(),
        candidates: ctx.candidates.points().to_vec(),
        terms: ctx.terms.to_vec(),
        members,
        geodesic,
        spatial_reference,
        summary,
    }
}

fn knots_csv(model: &FittedModel, candidates: &PointSet) -> Vec<u8> {
    csv_bytes(
        &["candidate", "x", "y", "r_index", "r", "coefficient"],
        model.radial.iter().enumerate().map(|(j, c)| {
            let p = candidates.get(c.candidate);
            vec![
                c.candidate.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                (c.r_index + 1).to_string(),
                c.r.to_string(),
                model.coefficients[model.radial_offset() + j].to_string(),
            ]
        }),
    )
}

fn fit_salsa(
    ctx: &Context,
    run: &mut Run,
    problem: &SalsaProblem,
    rseq: &RSequence,
    geodesic: Option<GeodesicSpec>,
) -> CliResult<()> {
    let limits = limits(ctx.args, ctx.args.start_knots, ctx.candidates.len(), run);
    let outcome = run_salsa2d(problem, rseq, limits, ctx.config)?;
    run.phase("search");
    run.warnings(&outcome.warnings);
    let model = &outcome.model;
    let sref = spatial_reference(model, &problem.design(&outcome.state.knots, rseq)?)?;
    let summary = ModelSummary {
        log_pl: model.log_pl,
        bic: Some(model.bic),
        aicc: model.aicc,
        n_obs: model.n_obs,
        n_params: model.n_params,
        n_knots: model.n_knots(),
    };
    run.summary(json!({
        "method": "salsa2d",
        "basis": rseq.kind(),
        "distance": ctx.args.distance,
        "start_knots": limits.start,
        "end_knots": model.n_knots(),
        "log_pl": model.log_pl,
        "bic": model.bic,
        "aicc": model.aicc,
        "initial_score": outcome.initial_score,
        "final_score": outcome.final_score,
        "outer_iterations": outcome.outer_iterations,
        "n_candidates": ctx.candidates.len(),
        "n_obs": model.n_obs,
    }));
    let doc = document(
        ctx,
        "salsa2d",
        rseq,
        problem.data_distances.metric(),
        geodesic,
        vec![MemberDocument::from_model(model, 1.0)],
        sref,
        summary,
    );
    let mut trace = Vec::new();
    outcome.trace.write_jsonl(&mut trace)?;
    run.output("model.json", (doc.to_json()? + "\n").into_bytes());
    run.output("trace.jsonl", trace);
    run.output("knots.csv", knots_csv(model, ctx.candidates));
    Ok(())
}

fn fit_average(
    ctx: &Context,
    run: &mut Run,
    problem: &SalsaProblem,
    rseq: &RSequence,
    geodesic: Option<GeodesicSpec>,
) -> CliResult<()> {
    let n = ctx.candidates.len();
    let k_list: Vec<usize> = ctx.args.k_list.iter().copied().filter(|&k| k >= 1 && k <= n).collect();
    if k_list.len() != ctx.args.k_list.len() {
        run.warn(format!("knot counts outside 1..={n} skipped"));
    }
    let grid = fit_grid(problem, &k_list, rseq, &ctx.config.irls)?;
    run.warnings(&grid.warnings);
    let ensemble = AveragingEnsemble::new(grid, rseq.clone(), ctx.args.delta, ctx.args.strict_delta)?;
    run.phase("search");
    let log_pl = ensemble.log_pl(problem.data_distances, ctx.block, &ctx.data.y, &ctx.data.w)?;

    let mut members = Vec::new();
    let mut sref = 0.0;
    for (m, &w) in ensemble.members.iter().zip(&ensemble.weights) {
        if w > 0.0 {
            members.push(MemberDocument::from_model(&m.model, w));
            sref += w * spatial_reference(&m.model, &problem.design(&m.knots, rseq)?)?;
        }
    }
    let best = ensemble
        .deltas
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| &ensemble.members[i])
        .expect("ensemble has members");
    let summary = ModelSummary {
        log_pl,
        bic: None,
        aicc: None,
        n_obs: ctx.data.len(),
        n_params: best.model.n_params,
        n_knots: best.n_knots,
    };
    run.summary(json!({
        "method": "average",
        "basis": rseq.kind(),
        "distance": ctx.args.distance,
        "log_pl": log_pl,
        "n_fitted": ensemble.members.len(),
        "n_averaged": ensemble.n_averaged(),
        "best_knots": best.n_knots,
        "best_r_index": best.r_index + 1,
        "best_aicc": best.aicc(),
    }));
    let doc = document(ctx, "average", rseq, problem.data_distances.metric(), geodesic, members, sref, summary);
    let mut table = Vec::new();
    ensemble.write_summary(&mut table)?;
    run.output("model.json", (doc.to_json()? + "\n").into_bytes());
    run.output("ensemble.csv", table);
    Ok(())
}

/// Start knots × basis × distance, one knot search each.
fn sweep(ctx: &Context, run: &mut Run) -> CliResult<()> {
    let mut rows = Vec::new();
    for metric in [MetricTag::Euclidean, MetricTag::Geodesic] {
        let (provider, _) = distances(ctx, metric)?;
        run.phase(&format!("distances:{metric}"));
        let problem = SalsaProblem::new(
            ctx.data,
            ctx.candidates,
            &provider.data_to_candidates,
            &provider.candidates_to_candidates,
            ctx.block,
        )?;
        for basis in [BasisKind::Exponential, BasisKind::Gaussian] {
            let rseq = r_sequence(&provider.candidates_to_candidates, ctx.args.r_count, basis)?;
            for &start in &ctx.args.sweep_starts {
                let limits = limits(ctx.args, start, ctx.candidates.len(), run);
                let t0 = Instant::now();
                let outcome = run_salsa2d(&problem, &rseq, limits, ctx.config)?;
                let minutes = t0.elapsed().as_secs_f64() / 60.0;
                log::info!("{metric} {basis} start {start}: {} knots, BIC {:.3}", outcome.model.n_knots(), outcome.model.bic);
                rows.push(vec![
                    title(&metric.to_string()),
                    title(&basis.to_string()),
                    start.to_string(),
                    outcome.model.n_knots().to_string(),
                    format!("{:.4}", outcome.model.log_pl),
                    format!("{:.4}", outcome.model.bic),
                    format!("{minutes:.3}"),
                ]);
            }
        }
        run.phase(&format!("sweep:{metric}"));
    }
    run.summary(json!({ "method": "sweep", "rows": rows.len() }));
    run.output(
        "sweep.csv",
        csv_bytes(&["distance", "basis", "start_knots", "end_knots", "loglik", "bic", "minutes"], rows),
    );
    Ok(())
}

fn title(s: &str) -> String {
    let mut c = s.chars();
    c.next().map_or_else(String::new, |f| f.to_uppercase().collect::<String>() + c.as_str())
}
