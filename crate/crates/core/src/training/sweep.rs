use crate::evaluation::{model_forecasts, rmse, truth_forecasts, EvalError, PointWeights};
use crate::graphnet::stats_indices;

use super::{SplitData, Trainer};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Rollout lengths to fine-tune at; 1 keeps the base model unchanged.
    pub t_list: Vec<usize>,
    pub finetune_steps: usize,
    pub lr: f64,
    /// Longest evaluated rollout.
    pub horizon: usize,
}

/// RMSE by rollout horizon for one fine-tuning length. Each channel's RMSE
/// is divided by its standard deviation before averaging over channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub t_train: usize,
    pub rmse: Vec<f64>,
}

/// Normalized RMSE curve of the trainer's current parameters.
pub fn rmse_curve(trainer: &Trainer, eval: &SplitData, inits: &[usize], horizon: usize) -> Result<Vec<f64>, EvalError> {
    let f = model_forecasts(&trainer.params, &trainer.graph, &trainer.norm, eval, inits, horizon)?;
    let t = truth_forecasts(eval, inits, horizon)?;
    let table = rmse(&f, &t, &PointWeights::global(&eval.builder.grid))?;
    let idx = stats_indices(&trainer.stats, &trainer.config.model.layout)?;
    Ok((0..horizon)
        .map(|k| {
            idx.iter()
                .enumerate()
                .map(|(j, &s)| table.get(j, k) / trainer.stats.std[s])
                .sum::<f64>()
                / idx.len() as f64
        })
        .collect())
}

/// Fine-tunes a copy of `base` at each rollout length in the list and
/// evaluates it at every horizon up to `cfg.horizon`.
pub fn ar_sweep(
    base: &Trainer,
    train: &SplitData,
    eval: &SplitData,
    inits: &[usize],
    cfg: &SweepConfig,
) -> Result<Vec<SweepCurve>, EvalError> {
    cfg.t_list
        .iter()
        .map(|&t_train| {
            let mut model = base.clone();
            if t_train > 1 {
                for _ in 0..cfg.finetune_steps {
                    model.train_step(train, cfg.lr, t_train)?;
                }
            }
            Ok(SweepCurve {
                t_train,
                rmse: rmse_curve(&model, eval, inits, cfg.horizon)?,
            })
        })
        .collect()
}
