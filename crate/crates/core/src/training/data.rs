use std::ops::Range;

use crate::datastore::SplitView;
use crate::diffcore::Tensor;
use crate::graphnet::{ChannelLayout, InputBuilder, StatePair};
use crate::normstats::NormStats;

use super::TrainError;

/// One split held in memory together with the transforms that turn its
/// frames into model inputs.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub builder: InputBuilder,
    frames: Vec<f32>,
    range: Range<usize>,
}

/// Inputs and target trajectories for a set of initialization times.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    /// Dataset time index t of each member; inputs are t−1 and t.
    pub inits: Vec<usize>,
    pub inputs: Vec<StatePair<f32>>,
    pub targets: Vec<Vec<Tensor<f32>>>,
}

impl SplitData {
    pub fn load(view: &SplitView, stats: &NormStats, layout: &ChannelLayout) -> Result<Self, TrainError> {
        let statics = view.read_static()?;
        let builder = InputBuilder::new(view.reader().manifest(), &statics, stats, layout)?;
        Ok(Self {
            builder,
            frames: view.read_all()?,
            range: view.range(),
        })
    }

    /// Frames covering time indices `range` read straight from a container.
    pub fn from_frames(builder: InputBuilder, frames: Vec<f32>, range: Range<usize>) -> Result<Self, TrainError> {
        if frames.len() != range.len() * builder.frame_len() {
            return Err(TrainError::Shape(format!("{} values for frames {range:?}", frames.len())));
        }
        Ok(Self { builder, frames, range })
    }

    pub fn range(&self) -> Range<usize> {
        self.range.clone()
    }

    /// Initialization times whose inputs and `horizon` targets all lie in
    /// the split.
    pub fn valid_inits(&self, horizon: usize) -> Vec<usize> {
        self.range
            .clone()
            .filter(|&t| t > self.range.start && t + horizon < self.range.end)
            .collect()
    }

    /// Frames t−1..=t+horizon for an init at `t`.
    pub fn window(&self, t: usize, horizon: usize) -> Result<&[f32], TrainError> {
        if !(t > self.range.start && t + horizon < self.range.end) {
            return Err(TrainError::Shape(format!(
                "init {t} with horizon {horizon} leaves split {:?}",
                self.range
            )));
        }
        let fl = self.builder.frame_len();
        let first = t - 1 - self.range.start;
        Ok(&self.frames[first * fl..(first + horizon + 2) * fl])
    }

    pub fn batch(&self, inits: &[usize], horizon: usize) -> Result<TrainBatch, TrainError> {
        let mut inputs = Vec::with_capacity(inits.len());
        let mut targets = Vec::with_capacity(inits.len());
        for &t in inits {
            let w = self.window(t, horizon)?;
            inputs.push(self.builder.pair(w, t - 1, horizon)?);
            targets.push(self.builder.targets(w, horizon));
        }
        Ok(TrainBatch {
            inits: inits.to_vec(),
            inputs,
            targets,
        })
    }
}
