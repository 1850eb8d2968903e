use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Real, Tape, Tensor, TensorError, Var};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Two-layer perceptron `W2·swish(W1·x + b1) + b2`, optionally followed by
/// LayerNorm. Weights are stored `[fan_in, fan_out]` and applied to row
/// vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    pub w1: Tensor<T>,
    pub b1: Tensor<T>,
    pub w2: Tensor<T>,
    pub b2: Tensor<T>,
    pub norm: Option<(Tensor<T>, Tensor<T>)>,
}

fn truncated_normal<T: Real, R: Rng>(rng: &mut R, shape: &[usize], std: f64) -> Tensor<T> {
    let n = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    while data.len() < n {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= 2.0 {
            data.push(T::of(z * std));
        }
    }
    Tensor::from_vec(shape, data).unwrap()
}

impl<T: Real> MlpParams<T> {
    pub fn init<R: Rng>(rng: &mut R, d_in: usize, hidden: usize, d_out: usize, layer_norm: bool) -> Self {
        Self {
            w1: truncated_normal(rng, &[d_in, hidden], 1.0 / (d_in as f64).sqrt()),
            b1: Tensor::zeros(&[hidden]),
            w2: truncated_normal(rng, &[hidden, d_out], 1.0 / (hidden as f64).sqrt()),
            b2: Tensor::zeros(&[d_out]),
            norm: layer_norm.then(|| (Tensor::full(&[d_out], T::one()), Tensor::zeros(&[d_out]))),
        }
    }

    pub fn zeros(d_in: usize, hidden: usize, d_out: usize, layer_norm: bool) -> Self {
        Self {
            w1: Tensor::zeros(&[d_in, hidden]),
            b1: Tensor::zeros(&[hidden]),
            w2: Tensor::zeros(&[hidden, d_out]),
            b2: Tensor::zeros(&[d_out]),
            norm: layer_norm.then(|| (Tensor::full(&[d_out], T::one()), Tensor::zeros(&[d_out]))),
        }
    }

    pub fn d_in(&self) -> usize {
        self.w1.shape()[0]
    }

    pub fn hidden_size(&self) -> usize {
        self.w1.shape()[1]
    }

    pub fn d_out(&self) -> usize {
        self.w2.shape()[1]
    }

    /// Tensors in a fixed order: w1, b1, w2, b2, then gamma, beta.
    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut v = vec![&self.w1, &self.b1, &self.w2, &self.b2];
        if let Some((g, b)) = &self.norm {
            v.push(g);
            v.push(b);
        }
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2];
        if let Some((g, b)) = &mut self.norm {
            v.push(g);
            v.push(b);
        }
        v
    }

    /// Which of [`Self::tensors`] are weight matrices.
    pub fn matrix_mask(&self) -> Vec<bool> {
        let mut v = vec![true, false, true, false];
        if self.norm.is_some() {
            v.extend([false, false]);
        }
        v
    }

    pub fn cast<U: Real>(&self) -> MlpParams<U> {
        MlpParams {
            w1: self.w1.cast(),
            b1: self.b1.cast(),
            w2: self.w2.cast(),
            b2: self.b2.cast(),
            norm: self.norm.as_ref().map(|(g, b)| (g.cast(), b.cast())),
        }
    }

    /// Records the parameters on a tape as trainable leaves.
    pub fn record(&self, tape: &mut Tape<T>) -> MlpVars {
        MlpVars {
            w1: tape.param(self.w1.clone()),
            b1: tape.param(self.b1.clone()),
            w2: tape.param(self.w2.clone()),
            b2: tape.param(self.b2.clone()),
            norm: self
                .norm
                .as_ref()
                .map(|(g, b)| (tape.param(g.clone()), tape.param(b.clone()))),
        }
    }
}

/// Tape handles of an [`MlpParams`].
#[derive(Debug, Clone)]
pub struct MlpVars {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
    pub norm: Option<(Var, Var)>,
}

impl MlpVars {
    pub fn vars(&self) -> Vec<Var> {
        let mut v = vec![self.w1, self.b1, self.w2, self.b2];
        if let Some((g, b)) = self.norm {
            v.push(g);
            v.push(b);
        }
        v
    }
}

/// Second layer and optional LayerNorm applied to a first-layer pre-activation.
pub(crate) fn mlp_tail<T: Real>(tape: &mut Tape<T>, p: &MlpVars, pre: Var) -> Result<Var, TensorError> {
    let h = tape.add_bias(pre, p.b1)?;
    let h = tape.swish(h);
    let y = tape.matmul(h, p.w2)?;
    let y = tape.add_bias(y, p.b2)?;
    match p.norm {
        Some((g, b)) => tape.layer_norm(y, g, b, T::of(LAYER_NORM_EPS)),
        None => Ok(y),
    }
}

pub fn mlp_forward<T: Real>(tape: &mut Tape<T>, p: &MlpVars, x: Var) -> Result<Var, TensorError> {
    let pre = tape.matmul(x, p.w1)?;
    mlp_tail(tape, p, pre)
}

pub fn mlp_apply<T: Real>(params: &MlpParams<T>, x: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    let mut tape = Tape::new();
    let p = params.record(&mut tape);
    let xv = tape.constant(x.clone());
    let y = mlp_forward(&mut tape, &p, xv)?;
    Ok(tape.value(y).clone())
}

pub fn layer_norm<T: Real>(x: &Tensor<T>, gamma: &Tensor<T>, beta: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    let mut tape = Tape::new();
    let (x, g, b) = (tape.constant(x.clone()), tape.constant(gamma.clone()), tape.constant(beta.clone()));
    let y = tape.layer_norm(x, g, b, T::of(LAYER_NORM_EPS))?;
    Ok(tape.value(y).clone())
}

pub fn swish<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let mut tape = Tape::new();
    let v = tape.constant(x.clone());
    let y = tape.swish(v);
    tape.value(y).clone()
}
