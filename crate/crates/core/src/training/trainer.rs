use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::datastore::{write_container, Container};
use crate::geodesy::GridSpec;
use crate::diffcore::{adamw_step, AdamWConfig, OptimizerState, Tape, Tensor};
use crate::graphnet::{rollout_on_tape, stats_indices, Graph, GraphNetParams, ModelConfig, ModelNorm, StatePair};
use crate::normstats::NormStats;

use super::{loss_on_tape, Curriculum, LossWeights, TrainBatch, TrainError, SplitData};

pub const METRICS_HEADER: &str = "step,lr,t_train,loss,grad_norm";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub curriculum: Curriculum,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: AdamWConfig,
}

impl TrainConfig {
    pub fn new(model: ModelConfig, curriculum: Curriculum, seed: u64) -> Self {
        Self {
            model,
            curriculum,
            batch_size: 4,
            seed,
            optimizer: AdamWConfig::default(),
        }
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub t_train: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

impl StepRecord {
    pub fn to_line(&self) -> String {
        format!("{},{:e},{},{:e},{:e}", self.step, self.lr, self.t_train, self.loss, self.grad_norm)
    }
}

/// Batch sampling draws from its own ChaCha stream so it never overlaps the
/// initialization stream of the same seed.
fn sampling_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Model, optimizer state and sampling stream of one training run.
#[derive(Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub params: GraphNetParams<f32>,
    pub optimizer: OptimizerState<f32>,
    pub graph: Graph,
    pub norm: ModelNorm<f32>,
    pub weights: LossWeights,
    pub stats: NormStats,
    pub step: usize,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(config: TrainConfig, graph: Graph, stats: &NormStats, grid: &GridSpec) -> Result<Self, TrainError> {
        let params = GraphNetParams::init(&config.model, config.seed);
        Self::with_params(config, params, graph, stats, grid)
    }

    pub fn with_params(
        config: TrainConfig,
        params: GraphNetParams<f32>,
        graph: Graph,
        stats: &NormStats,
        grid: &GridSpec,
    ) -> Result<Self, TrainError> {
        let layout = &config.model.layout;
        let idx = stats_indices(stats, layout)?;
        let weights = LossWeights::new(grid, layout, idx.iter().map(|&i| stats.inv_diff_var[i]).collect());
        let shapes = params.shapes();
        let refs: Vec<&[usize]> = shapes.iter().map(|s| s.as_slice()).collect();
        Ok(Self {
            norm: ModelNorm::from_stats(stats, layout)?,
            optimizer: OptimizerState::new(&refs),
            rng: sampling_rng(config.seed),
            config,
            params,
            graph,
            weights,
            stats: stats.clone(),
            step: 0,
        })
    }

    /// Loss and parameter gradients of one batch member.
    pub fn member_gradients(
        &self,
        input: &StatePair<f32>,
        targets: &[Tensor<f32>],
        batch: usize,
    ) -> Result<(f64, Vec<Tensor<f32>>), TrainError> {
        let mut tape = Tape::new();
        let vars = self.params.record(&mut tape);
        let preds = rollout_on_tape(
            &mut tape,
            &vars,
            &self.graph,
            &self.norm,
            &self.config.model.layout,
            input,
            targets.len(),
            None,
        )?;
        let l = loss_on_tape(&mut tape, &preds, targets, &self.weights, batch)?;
        let value = tape.value(l).data()[0] as f64;
        let mut g = tape.backward(l);
        let grads = vars
            .vars()
            .into_iter()
            .zip(self.params.shapes())
            .map(|(v, s)| g.take(v, &s))
            .collect();
        Ok((value, grads))
    }

    /// Batch loss and summed gradients. Members run in parallel and are
    /// reduced in batch order.
    pub fn batch_gradients(&self, batch: &TrainBatch) -> Result<(f64, Vec<Tensor<f32>>), TrainError> {
        let n = batch.inputs.len();
        let parts: Vec<_> = batch
            .inputs
            .par_iter()
            .zip(batch.targets.par_iter())
            .map(|(i, t)| self.member_gradients(i, t, n))
            .collect();
        let mut loss = 0.0;
        let mut total: Option<Vec<Tensor<f32>>> = None;
        for part in parts {
            let (l, g) = part?;
            loss += l;
            total = Some(match total {
                None => g,
                Some(mut acc) => {
                    for (a, b) in acc.iter_mut().zip(&g) {
                        for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                            *x += *y;
                        }
                    }
                    acc
                }
            });
        }
        Ok((loss, total.unwrap_or_default()))
    }

    /// Samples a batch with replacement and applies one AdamW update.
    pub fn train_step(&mut self, data: &SplitData, lr: f64, t_train: usize) -> Result<StepRecord, TrainError> {
        let pool = data.valid_inits(t_train);
        if pool.is_empty() {
            return Err(TrainError::Shape(format!("no training samples with horizon {t_train}")));
        }
        let inits: Vec<usize> = (0..self.config.batch_size)
            .map(|_| pool[self.rng.gen_range(0..pool.len())])
            .collect();
        let batch = data.batch(&inits, t_train)?;
        let (loss, mut grads) = self.batch_gradients(&batch)?;
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { step: self.step, loss });
        }
        let mask = self.params.matrix_mask();
        let mut params = self.params.tensors_mut();
        let grad_norm = adamw_step(&mut self.optimizer, &self.config.optimizer, &mut params, &mut grads, &mask, lr)?;
        let rec = StepRecord {
            step: self.step,
            lr,
            t_train,
            loss,
            grad_norm,
        };
        self.step += 1;
        Ok(rec)
    }

    /// Checkpoint container holding parameters, model config and the
    /// normalization statistics.
    pub fn checkpoint(&self, phase: &str) -> Result<Container, TrainError> {
        let mut attrs = BTreeMap::new();
        attrs.insert("step".to_string(), json!(self.step));
        attrs.insert("phase".to_string(), json!(phase));
        attrs.insert("seed".to_string(), json!(self.config.seed));
        attrs.insert(
            "normalization".to_string(),
            serde_json::to_value(&self.stats).map_err(|e| TrainError::Shape(e.to_string()))?,
        );
        Ok(self.params.to_container(&self.config.model, attrs))
    }

    /// Runs the whole curriculum. Each step is appended to `log`; a
    /// checkpoint is written to `<dir>/phase{1,2,3}` at every phase end.
    pub fn run(
        &mut self,
        data: &SplitData,
        log: &mut dyn Write,
        checkpoint_dir: Option<&Path>,
    ) -> Result<Vec<StepRecord>, TrainError> {
        let c: Curriculum = self.config.curriculum;
        let ends = c.phase_ends();
        writeln!(log, "{METRICS_HEADER}").map_err(TrainError::io("metrics log"))?;
        let mut records = Vec::with_capacity(c.total_steps());
        for k in 0..c.total_steps() {
            let s = c.at(k);
            let rec = self.train_step(data, s.lr, s.t_train)?;
            writeln!(log, "{}", rec.to_line()).map_err(TrainError::io("metrics log"))?;
            records.push(rec);
            if let Some(p) = ends.iter().position(|&e| e == k) {
                if let Some(dir) = checkpoint_dir {
                    let name = format!("phase{}", p + 1);
                    write_container(&dir.join(&name), &self.checkpoint(&name)?)?;
                }
                log::info!("phase {} done at step {k}, loss {:e}", p + 1, rec.loss);
            }
        }
        Ok(records)
    }
}
