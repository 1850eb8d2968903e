//! Forecast verification: latitude-weighted RMSE, anomaly correlation,
//! skill scores against a baseline and scorecard tables.

mod climatology;
mod forecast;
mod metrics;
mod report;
mod skill;

pub use climatology::{climatology_fit, Climatology, ClimatologyAccumulator, CLIMATOLOGY_ARRAY, DAYS};
pub use forecast::{model_forecasts, truth_forecasts, valid_times};
pub use metrics::{acc, rmse, ForecastArray, LatLonBox, MetricTable, PointWeights};
pub use report::{evaluate, ChannelKey, EvalReport, ReportMeta, REPORT_HEADER};
pub use skill::{
    scorecard, skill_scores, Metric, Scorecard, ScorecardCell, ScorecardRow, SkillCell, SkillScores, SummaryRow,
};

use thiserror::Error;

use crate::datastore::DatastoreError;
use crate::geodesy::GridSpec;
use crate::graphnet::GraphNetError;
use crate::training::TrainError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no initialization times to evaluate")]
    NoInits,
    #[error("zero anomaly variance for channel {channel}, lead index {lead}, init index {init}")]
    ZeroAnomalyVariance { channel: usize, lead: usize, init: usize },
    #[error("region: {0}")]
    Region(String),
    #[error("climatology has no samples for day of year {0}")]
    MissingDay(usize),
    #[error("reference period: {0}")]
    Reference(String),
    #[error("reports do not cover the same cells: {0}")]
    Coverage(String),
    #[error("format: {0}")]
    Format(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Data(#[from] DatastoreError),
    #[error(transparent)]
    Model(#[from] GraphNetError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// A report restricted to grid points inside `region`, with area weights
/// renormalized there.
pub fn region_mask_eval(
    forecast: &ForecastArray,
    truth: &ForecastArray,
    clim: Option<&ForecastArray>,
    grid: &GridSpec,
    region: &LatLonBox,
    meta: ReportMeta,
) -> Result<EvalReport, EvalError> {
    let w = PointWeights::region(grid, region)?;
    evaluate(forecast, truth, clim, &w, meta)
}
