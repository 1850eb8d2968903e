//! The weighted multi-step objective, the curriculum schedule and the
//! backpropagation-through-time trainer.

mod curriculum;
mod data;
mod loss;
mod sweep;
mod trainer;
mod weights;

pub use curriculum::{Curriculum, Phase, ScheduleStep};
pub use data::{SplitData, TrainBatch};
pub use loss::{loss, loss_on_tape};
pub use sweep::{ar_sweep, rmse_curve, SweepConfig, SweepCurve};
pub use trainer::{StepRecord, TrainConfig, Trainer, METRICS_HEADER};
pub use weights::{channel_weights, latitude_weights, level_weights, point_weights, surface_weight, LossWeights};

use thiserror::Error;

use crate::datastore::DatastoreError;
use crate::diffcore::TensorError;
use crate::graphnet::GraphNetError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite loss {loss} at step {step}")]
    NonFiniteLoss { step: usize, loss: f64 },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Model(#[from] GraphNetError),
    #[error(transparent)]
    Data(#[from] DatastoreError),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

impl TrainError {
    pub(crate) fn io(what: &str) -> impl Fn(std::io::Error) -> Self + '_ {
        move |e| TrainError::Io(what.to_string(), e)
    }
}
