use chrono::{DateTime, Utc};
use rayon::prelude::*;

use crate::graphnet::{rollout, Graph, GraphNetParams, ModelNorm};
use crate::training::SplitData;

use super::{EvalError, ForecastArray};

/// Model rollouts from each init, in native units of the predicted channels.
pub fn model_forecasts(
    params: &GraphNetParams<f32>,
    graph: &Graph,
    norm: &ModelNorm<f32>,
    data: &SplitData,
    inits: &[usize],
    horizon: usize,
) -> Result<ForecastArray, EvalError> {
    let b = &data.builder;
    let np = b.grid.len();
    let nc = b.layout.n_predicted();
    let runs = inits
        .par_iter()
        .map(|&t| -> Result<Vec<f32>, EvalError> {
            let w = data.window(t, horizon)?;
            let pair = b.pair(w, t - 1, horizon)?;
            let states = rollout(params, graph, norm, &b.layout, &pair, horizon)?;
            Ok(states.iter().flat_map(|s| b.unstate(s)).collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    ForecastArray::from_vec([inits.len(), horizon, nc, np], runs.concat())
}

/// Verifying states t+1..=t+horizon for each init.
pub fn truth_forecasts(data: &SplitData, inits: &[usize], horizon: usize) -> Result<ForecastArray, EvalError> {
    let b = &data.builder;
    let mut out = Vec::new();
    for &t in inits {
        let w = data.window(t, horizon)?;
        for s in b.targets(w, horizon) {
            out.extend(b.unstate(&s));
        }
    }
    ForecastArray::from_vec([inits.len(), horizon, b.layout.n_predicted(), b.grid.len()], out)
}

/// Validity times of each (init, lead).
pub fn valid_times(data: &SplitData, inits: &[usize], horizon: usize) -> Result<Vec<Vec<DateTime<Utc>>>, EvalError> {
    inits
        .iter()
        .map(|&t| (1..=horizon).map(|k| Ok(data.builder.time.time_at(t + k)?)).collect())
        .collect()
}
