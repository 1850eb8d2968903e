use std::sync::Arc;

use crate::diffcore::{Real, Tape, Tensor, Var};

use super::{LossWeights, TrainError};

fn check_weights(w: &LossWeights, rows: usize, cols: usize) -> Result<(), TrainError> {
    if w.area.len() != rows || w.channel.len() != cols || w.inv_var.len() != cols {
        return Err(TrainError::Shape(format!(
            "weights cover {} points and {}/{} channels, predictions are [{rows}, {cols}]",
            w.area.len(),
            w.channel.len(),
            w.inv_var.len()
        )));
    }
    Ok(())
}

/// One batch member's share of the objective, recorded on a tape:
/// Σ_τ Σ_i Σ_j a_i·s_j·w_j·(x̂ − x)² / (T·|G|·batch).
pub fn loss_on_tape<T: Real>(
    tape: &mut Tape<T>,
    predictions: &[Var],
    targets: &[Tensor<T>],
    weights: &LossWeights,
    batch: usize,
) -> Result<Var, TrainError> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(TrainError::Shape(format!(
            "{} predicted steps for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let (rows, cols) = (targets[0].rows(), targets[0].cols());
    check_weights(weights, rows, cols)?;
    let row_w: Arc<[T]> = weights.area.iter().map(|&a| T::of(a)).collect();
    let col_w: Arc<[T]> = weights.combined().iter().map(|&w| T::of(w)).collect();
    let coef = T::of(1.0 / (predictions.len() * rows * batch) as f64);
    let mut total: Option<Var> = None;
    for (&p, t) in predictions.iter().zip(targets) {
        let term = tape.weighted_sse(p, t.data().into(), row_w.clone(), col_w.clone(), coef)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, term)?,
            None => term,
        });
    }
    Ok(total.unwrap())
}

/// The objective evaluated directly. `predictions[b][τ]` and `targets[b][τ]`
/// are [n_grid, n_channels].
pub fn loss<T: Real>(
    predictions: &[Vec<Tensor<T>>],
    targets: &[Vec<Tensor<T>>],
    weights: &LossWeights,
) -> Result<f64, TrainError> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(TrainError::Shape(format!(
            "{} predicted trajectories for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let steps = predictions[0].len();
    let sw = weights.combined();
    let mut total = 0.0;
    for (pb, tb) in predictions.iter().zip(targets) {
        if pb.len() != steps || tb.len() != steps || steps == 0 {
            return Err(TrainError::Shape("trajectories differ in length".into()));
        }
        for (p, t) in pb.iter().zip(tb) {
            if p.shape() != t.shape() || p.shape().len() != 2 {
                return Err(TrainError::Shape(format!("prediction {:?} vs target {:?}", p.shape(), t.shape())));
            }
            check_weights(weights, p.rows(), p.cols())?;
            let c = p.cols();
            let mut sum = 0.0;
            for (i, a) in weights.area.iter().enumerate() {
                let row: f64 = (0..c)
                    .map(|j| {
                        let d = p.data()[i * c + j].as_f64() - t.data()[i * c + j].as_f64();
                        sw[j] * d * d
                    })
                    .sum();
                sum += a * row;
            }
            total += sum / p.rows() as f64;
        }
    }
    Ok(total / (steps * predictions.len()) as f64)
}
