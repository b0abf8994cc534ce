use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use salsa2d::design::BasisKind;
use salsa2d::fit::FitCriterion;
use salsa2d::geometry::MetricTag;
use salsa2d::salsa::RSelectMode;

#[derive(Debug, Parser)]
#[command(name = "salsa2d", version, about = "Adaptive knot selection for radial-basis point-process models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Build a pseudo-absence grid, optionally choosing its spacing by
    /// likelihood convergence.
    Grid(GridArgs),
    /// Fit a spatial model by adaptive knot search or model averaging.
    Fit(FitArgs),
    /// Predict intensity at new locations from a model document.
    Predict(PredictArgs),
    /// Partial relationship between intensity and one covariate.
    Partial(PartialArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Grid(_) => "grid",
            Command::Fit(_) => "fit",
            Command::Predict(_) => "predict",
            Command::Partial(_) => "partial",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Grid(a) => &a.common,
            Command::Fit(a) => &a.common,
            Command::Predict(a) => &a.common,
            Command::Partial(a) => &a.common,
        }
    }
}

/// Options shared by every subcommand.
#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Flat `key = value` file; keys are long flag names. Flags given on the
    /// command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "SALSA2D_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// More log output (-v info, -vv debug).
    #[arg(long, short = 'v', action = clap::ArgAction::Count)]
    #[serde(skip)]
    pub verbose: u8,
}

fn parse_from_str<T>(s: &str) -> Result<T, String>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct GridArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Study region (GeoJSON polygon layer).
    #[arg(long)]
    pub region: PathBuf,
    /// Area removed from the region (GeoJSON polygon layer).
    #[arg(long)]
    pub exclusion: Option<PathBuf>,
    /// Region area; defaults to the polygon area minus the exclusion area.
    #[arg(long)]
    pub area: Option<f64>,
    /// Single grid spacing: writes the grid only.
    #[arg(long, conflicts_with = "spacings", required_unless_present = "spacings")]
    pub spacing: Option<f64>,
    /// Coarse-to-fine spacing ladder for the convergence study.
    #[arg(long, value_delimiter = ',', requires = "presences")]
    pub spacings: Option<Vec<f64>>,
    /// Multiplies every spacing (to rescale a ladder to the study units).
    #[arg(long, default_value_t = 1.0)]
    pub spacing_scale: f64,
    /// Presence locations (CSV with x, y and optional count).
    #[arg(long)]
    pub presences: Option<PathBuf>,
    /// Relative log-likelihood change accepted as converged.
    #[arg(long, default_value_t = 0.005)]
    pub tolerance: f64,
    /// Knot counts of the fixed-knot probe models.
    #[arg(long, value_delimiter = ',', default_values_t = vec![10, 20, 30, 40])]
    pub probe_knots: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub r_count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Salsa2d,
    Average,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub presences: PathBuf,
    #[arg(long)]
    pub region: PathBuf,
    #[arg(long)]
    pub exclusion: Option<PathBuf>,
    #[arg(long)]
    pub area: Option<f64>,
    /// Pseudo-absence grid spacing.
    #[arg(long)]
    pub spacing: f64,
    #[arg(long, value_enum, default_value_t = Method::Salsa2d)]
    pub method: Method,
    /// Run the full start-knot × basis × distance sweep instead of one fit.
    #[arg(long)]
    pub sweep: bool,
    /// Start-knot counts visited by `--sweep`.
    #[arg(long, value_delimiter = ',', default_values_t = (1..=12).map(|i| 5 * i).collect::<Vec<usize>>())]
    pub sweep_starts: Vec<usize>,
    #[arg(long, value_parser = parse_from_str::<BasisKind>, default_value = "gaussian")]
    pub basis: BasisKind,
    #[arg(long, value_parser = parse_from_str::<MetricTag>, default_value = "euclidean")]
    pub distance: MetricTag,
    /// Lattice spacing of the geodesic graph; defaults to `--spacing`.
    #[arg(long)]
    pub graph_spacing: Option<f64>,
    #[arg(long, default_value_t = 8)]
    pub connectivity: u8,
    #[arg(long, default_value_t = 4)]
    pub attach_k: usize,
    #[arg(long, default_value_t = 40)]
    pub start_knots: usize,
    #[arg(long, default_value_t = 2)]
    pub min_knots: usize,
    #[arg(long, default_value_t = 100)]
    pub max_knots: usize,
    /// Length of the range-parameter sequence.
    #[arg(long, default_value_t = 10)]
    pub r_count: usize,
    #[arg(long, value_parser = parse_from_str::<FitCriterion>, default_value = "bic")]
    pub criterion: FitCriterion,
    #[arg(long, value_parser = parse_from_str::<RSelectMode>, default_value = "after-each-step")]
    pub r_select: RSelectMode,
    #[arg(long, default_value_t = 20)]
    pub max_outer: usize,
    /// Knot regions offered to the exchange step.
    #[arg(long, default_value_t = 10)]
    pub exchange_regions: usize,
    /// Nearest legal positions tried by the improve step.
    #[arg(long, default_value_t = 5)]
    pub improve_neighbours: usize,
    #[arg(long, default_value_t = 1e8)]
    pub max_vif: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Share of legal knot positions taken from the pseudo-absence grid.
    #[arg(long, default_value_t = 0.2)]
    pub pseudo_fraction: f64,
    /// Fixed number of pseudo-absence knot positions (overrides the fraction).
    #[arg(long)]
    pub pseudo_knots: Option<usize>,
    /// Knot counts of the averaged fixed-knot models.
    #[arg(long, value_delimiter = ',', default_values_t = (1..=12).map(|i| 5 * i).collect::<Vec<usize>>())]
    pub k_list: Vec<usize>,
    /// Largest AICc difference entering the average.
    #[arg(long, default_value_t = 10.0)]
    pub delta: f64,
    /// Exclude members at exactly `--delta`.
    #[arg(long)]
    pub strict_delta: bool,
    /// Covariates sampled at point locations (CSV with x, y and named columns).
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// Distance-to-feature covariate, `name=layer.geojson`. Repeatable.
    #[arg(long = "feature")]
    pub features: Vec<String>,
    /// Linear term for a covariate. Repeatable.
    #[arg(long)]
    pub linear: Vec<String>,
    /// Quadratic B-spline term with knots chosen by the criterion. Repeatable.
    #[arg(long)]
    pub smooth: Vec<String>,
    /// Binary factor `name < t`, with `t` chosen from the listed cutoffs:
    /// `name=1,2,3`. Repeatable.
    #[arg(long)]
    pub threshold: Vec<String>,
    #[arg(long, default_value_t = 5)]
    pub smooth_max_knots: usize,
    #[arg(long, default_value_t = 19)]
    pub smooth_quantiles: usize,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct PredictArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Model document written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Prediction locations (CSV with x, y).
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    #[arg(long = "feature")]
    pub features: Vec<String>,
    /// Flag locations whose intensity exceeds the `100 - p` percentile.
    #[arg(long)]
    pub top_percent: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct PartialArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: PathBuf,
    /// Covariate to vary.
    #[arg(long)]
    pub term: String,
    /// Explicit values, comma separated; defaults to an even grid over the
    /// training range (two levels for a threshold factor).
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Value for another covariate, `name=value`; defaults to the middle of
    /// its training range. Repeatable.
    #[arg(long = "fix")]
    pub fixes: Vec<String>,
    /// Hold the spatial term at zero instead of its mean over the data.
    #[arg(long)]
    pub no_spatial: bool,
}
