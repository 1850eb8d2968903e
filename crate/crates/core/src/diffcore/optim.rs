use super::{Real, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub clip_norm: Option<f64>,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay: 0.1,
            clip_norm: Some(32.0),
        }
    }
}

/// Step count and per-parameter first/second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(shapes: &[&[usize]]) -> Self {
        Self {
            step: 0,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }
}

pub fn global_norm<T: Real>(grads: &[Tensor<T>]) -> f64 {
    grads.iter().map(|g| g.sum_sq()).sum::<f64>().sqrt()
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Real>(grads: &mut [Tensor<T>], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let k = T::of(max_norm / norm);
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v = *v * k;
            }
        }
    }
    norm
}

/// One AdamW update with bias correction. Gradients are clipped in place
/// first; decoupled weight decay applies where `decay_mask` is set. Returns
/// the pre-clip gradient norm.
pub fn adamw_step<T: Real>(
    state: &mut OptimizerState<T>,
    cfg: &AdamWConfig,
    params: &mut [&mut Tensor<T>],
    grads: &mut [Tensor<T>],
    decay_mask: &[bool],
    lr: f64,
) -> Result<f64, TensorError> {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), decay_mask.len());
    assert_eq!(params.len(), state.m.len());
    for (i, (p, g)) in params.iter().zip(grads.iter()).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(TensorError::ShapeMismatch {
                op: "adamw_step",
                left: p.shape().to_vec(),
                right: g.shape().to_vec(),
            });
        }
        if !g.is_finite() {
            return Err(TensorError::NonFiniteGradient {
                param: i,
                step: state.step + 1,
            });
        }
    }
    let norm = match cfg.clip_norm {
        Some(c) => clip_grad_norm(grads, c),
        None => global_norm(grads),
    };
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let c1 = T::one() / (T::one() - b1.powi(t));
    let c2 = T::one() / (T::one() - b2.powi(t));
    let (lr_t, eps, wd) = (T::of(lr), T::of(cfg.eps), T::of(cfg.weight_decay));
    for (i, p) in params.iter_mut().enumerate() {
        let decay = decay_mask[i] && cfg.weight_decay != 0.0;
        let (m, v) = (state.m[i].data_mut(), state.v[i].data_mut());
        for (k, w) in p.data_mut().iter_mut().enumerate() {
            let g = grads[i].data()[k];
            m[k] = b1 * m[k] + (T::one() - b1) * g;
            v[k] = b2 * v[k] + (T::one() - b2) * g * g;
            let mut upd = (m[k] * c1) / ((v[k] * c2).sqrt() + eps);
            if decay {
                upd = upd + wd * *w;
            }
            *w = *w - lr_t * upd;
        }
    }
    Ok(norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecs(v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(&[v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn clipping_cases() {
        let mut g = vec![vecs(&[0.0, 16.0])];
        assert_eq!(clip_grad_norm(&mut g, 32.0), 16.0);
        assert_eq!(g[0].data(), &[0.0, 16.0]);
        let mut g = vec![vecs(&[0.0, 64.0]), vecs(&[0.0])];
        assert_eq!(clip_grad_norm(&mut g, 32.0), 64.0);
        assert!((global_norm(&g) - 32.0).abs() < 1e-12);
        let mut g = vec![vecs(&[0.0, 0.0])];
        clip_grad_norm(&mut g, 32.0);
        assert_eq!(g[0].data(), &[0.0, 0.0]);
    }

    #[test]
    fn first_step_is_unit_sized() {
        let mut w = vecs(&[0.0]);
        let mut st = OptimizerState::<f64>::new(&[&[1]]);
        let cfg = AdamWConfig::default();
        adamw_step(&mut st, &cfg, &mut [&mut w], &mut [vecs(&[1.0])], &[true], 1e-3).unwrap();
        assert!((w.data()[0] + 1e-3).abs() < 1e-10);
    }

    #[test]
    fn zero_grad_zero_decay_is_identity() {
        let mut w = vecs(&[0.3, -2.0]);
        let mut st = OptimizerState::<f64>::new(&[&[2]]);
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        adamw_step(&mut st, &cfg, &mut [&mut w], &mut [vecs(&[0.0, 0.0])], &[true], 1e-3).unwrap();
        assert_eq!(w.data(), &[0.3, -2.0]);
    }

    #[test]
    fn clipped_gradient_halves_first_moment() {
        let mut w = vecs(&[0.0, 0.0]);
        let mut st = OptimizerState::<f64>::new(&[&[2]]);
        adamw_step(&mut st, &AdamWConfig::default(), &mut [&mut w], &mut [vecs(&[0.0, 64.0])], &[false], 1e-3).unwrap();
        assert!((st.m[0].data()[1] - 0.1 * 32.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_reports_step() {
        let mut w = vecs(&[0.0]);
        let mut st = OptimizerState::<f64>::new(&[&[1]]);
        let err = adamw_step(&mut st, &AdamWConfig::default(), &mut [&mut w], &mut [vecs(&[f64::NAN])], &[true], 1e-3)
            .unwrap_err();
        assert_eq!(err, TensorError::NonFiniteGradient { param: 0, step: 1 });
    }

    #[test]
    fn decay_only_on_matrices() {
        let mut a = vecs(&[1.0]);
        let mut b = vecs(&[1.0]);
        let mut st = OptimizerState::<f64>::new(&[&[1], &[1]]);
        adamw_step(
            &mut st,
            &AdamWConfig::default(),
            &mut [&mut a, &mut b],
            &mut [vecs(&[0.0]), vecs(&[0.0])],
            &[true, false],
            0.5,
        )
        .unwrap();
        assert!((a.data()[0] - 0.95).abs() < 1e-12);
        assert_eq!(b.data()[0], 1.0);
    }
}
