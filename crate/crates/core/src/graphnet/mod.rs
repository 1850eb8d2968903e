//! Encode–process–decode graph network on the grid and multi-mesh, with the
//! residual state update and autoregressive rollout.

mod inputs;
mod layout;
mod model;
mod params;

pub use inputs::{constant_features, forcing_features, InputBuilder};
pub use layout::{ChannelLayout, N_CONSTANTS, N_FORCINGS, PRESSURE_LEVELS};
pub use model::{
    embed_grid, embed_static, grid2mesh, mesh2grid, predict_step, processor, rollout, rollout_on_tape, stats_indices,
    Graph, Latents, ModelNorm, StatePair, StaticLatents,
};
pub use params::{GraphNetParams, ModelConfig, ParamVars, ProcessorLayer};

use thiserror::Error;

use crate::datastore::DatastoreError;
use crate::diffcore::TensorError;

#[derive(Debug, Error)]
pub enum GraphNetError {
    #[error("layout mismatch: {0}")]
    Layout(String),
    #[error("non-finite prediction in channel {channel} at step {step}")]
    NonFinite { channel: usize, step: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DatastoreError),
}
