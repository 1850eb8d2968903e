//! Dense tensors, a reverse-mode tape, MLP building blocks and the AdamW
//! optimizer with global gradient-norm clipping.

mod kernels;
mod mlp;
mod optim;
mod tape;
mod tensor;

pub(crate) use mlp::mlp_tail;
pub use mlp::{layer_norm, mlp_apply, mlp_forward, swish, MlpParams, MlpVars, LAYER_NORM_EPS};
pub use optim::{adamw_step, clip_grad_norm, global_norm, AdamWConfig, OptimizerState};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use thiserror::Error;

/// Floating point element type of tensors; `f32` for training, `f64` for
/// gradient verification.
pub trait Real:
    num_traits::Float + num_traits::FromPrimitive + Default + Debug + Display + Send + Sync + Sum + 'static
{
    fn of(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).unwrap()
    }
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("tensor of shape {shape:?} needs {expected} values, got {got}")]
    BadLength {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },
    #[error("non-finite gradient in parameter {param} at optimizer step {step}")]
    NonFiniteGradient { param: usize, step: u64 },
    #[error("index {index} out of range for {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
}
