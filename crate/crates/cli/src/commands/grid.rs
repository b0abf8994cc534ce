use salsa2d::io::{read_points_csv, write_points_csv};
use salsa2d::ppm::{generate_pseudo_absences, grid_convergence, ConvergenceSpec};
use salsa2d::salsa::SalsaConfig;
use salsa2d::design::BasisKind;
use serde_json::json;

use super::load_region;
use crate::args::GridArgs;
use crate::error::{CliError, CliResult};
use crate::manifest::Run;

pub fn run(args: &GridArgs, run: &mut Run) -> CliResult<()> {
    let region = load_region(run, &args.region, args.exclusion.as_deref(), args.area)?;
    if !(args.spacing_scale > 0.0 && args.spacing_scale.is_finite()) {
        return Err(CliError::Input(format!("--spacing-scale must be positive, got {}", args.spacing_scale)));
    }

    let (spacing, report) = match &args.spacings {
        None => (args.spacing.expect("clap requires one of spacing/spacings") * args.spacing_scale, None),
        Some(ladder) => {
            let presences_path = args.presences.as_deref().expect("clap requires presences with spacings");
            run.input("presences", presences_path)?;
            let presences = read_points_csv(presences_path)?;
            let spacings: Vec<f64> = ladder.iter().map(|s| s * args.spacing_scale).collect();
            let specs: Vec<ConvergenceSpec> = args
                .probe_knots
                .iter()
                .flat_map(|&k| {
                    [BasisKind::Gaussian, BasisKind::Exponential].map(|basis| ConvergenceSpec { knots: k, basis })
                })
                .collect();
            let config = SalsaConfig { r_count: args.r_count, rng_seed: args.seed, ..SalsaConfig::default() };
            run.phase("load");
            let report = grid_convergence(
                &region.polygon,
                region.exclusion.as_ref(),
                &presences,
                region.area,
                &spacings,
                &specs,
                &config,
                args.tolerance,
            )?;
            run.phase("convergence");
            if let Some(w) = &report.warning {
                run.warn(w.clone());
            }
            (report.chosen_spacing, Some(report))
        }
    };

    let pseudo = generate_pseudo_absences(&region.polygon, region.exclusion.as_ref(), spacing)?;
    let mut grid_csv = Vec::new();
    write_points_csv(&pseudo, &mut grid_csv)?;
    run.output("pseudo_absences.csv", grid_csv);
    if let Some(report) = &report {
        let mut table = Vec::new();
        report.write_csv(&mut table)?;
        run.output("convergence.csv", table);
    }
    run.summary(json!({
        "spacing": spacing,
        "n_pseudo": pseudo.len(),
        "region_area": region.area,
        "quadrature_weight": region.area / pseudo.len() as f64,
        "convergence_rows": report.as_ref().map(|r| r.table.len()),
    }));
    Ok(())
}
