//! Per-channel normalization statistics: value mean/std, one-step
//! difference mean/std and the inverse difference variances used as loss
//! weights.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datastore::{DatastoreError, SplitView};

#[derive(Debug, Error)]
pub enum NormError {
    #[error("channel {channel} has zero {what} standard deviation")]
    ConstantChannel { channel: String, what: &'static str },
    #[error("need at least two time steps, got {0}")]
    TooFewSteps(usize),
    #[error(transparent)]
    Data(#[from] DatastoreError),
}

/// Running mean and sum of squared deviations, merged with Chan's
/// pairwise update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn of(values: impl Iterator<Item = f64>) -> Self {
        let mut m = Self::default();
        for v in values {
            m.count += 1;
            let d = v - m.mean;
            m.mean += d / m.count as f64;
            m.m2 += d * (v - m.mean);
        }
        m
    }

    pub fn merge(&mut self, o: &Self) {
        if o.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *o;
            return;
        }
        let n = (self.count + o.count) as f64;
        let d = o.mean - self.mean;
        self.mean += d * o.count as f64 / n;
        self.m2 += o.m2 + d * d * self.count as f64 * o.count as f64 / n;
        self.count += o.count;
    }

    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2 / self.count as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub channels: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub diff_mean: Vec<f64>,
    pub diff_std: Vec<f64>,
    /// 1 / Var[x^{t+1} − x^t] per channel.
    pub inv_diff_var: Vec<f64>,
    pub static_channels: Vec<String>,
    pub static_mean: Vec<f64>,
    pub static_std: Vec<f64>,
    /// Longest finest-level mesh edge; divides every edge feature.
    pub edge_scale: Option<f64>,
}

/// Streams [time, channel, point] frames into value and difference moments.
#[derive(Debug, Clone)]
pub struct StatsAccumulator {
    channels: Vec<String>,
    n_points: usize,
    values: Vec<Moments>,
    diffs: Vec<Moments>,
    last: Option<Vec<f32>>,
    frames: usize,
}

impl StatsAccumulator {
    pub fn new(channels: Vec<String>, n_points: usize) -> Self {
        let n = channels.len();
        Self {
            channels,
            n_points,
            values: vec![Moments::default(); n],
            diffs: vec![Moments::default(); n],
            last: None,
            frames: 0,
        }
    }

    /// Adds consecutive frames; differences span call boundaries.
    pub fn update(&mut self, frames: &[f32]) {
        let np = self.n_points;
        let frame_len = self.channels.len() * np;
        let n_new = frames.len() / frame_len;
        let prev = self.last.take();
        let updates: Vec<(Moments, Moments)> = (0..self.channels.len())
            .into_par_iter()
            .map(|c| {
                let chan = |k: usize| &frames[k * frame_len + c * np..k * frame_len + (c + 1) * np];
                let mut vm = Moments::default();
                let mut dm = Moments::default();
                for k in 0..n_new {
                    vm.merge(&Moments::of(chan(k).iter().map(|&v| v as f64)));
                    let before = if k == 0 {
                        prev.as_ref().map(|p| &p[c * np..(c + 1) * np])
                    } else {
                        Some(chan(k - 1))
                    };
                    if let Some(b) = before {
                        dm.merge(&Moments::of(chan(k).iter().zip(b).map(|(&x, &y)| x as f64 - y as f64)));
                    }
                }
                (vm, dm)
            })
            .collect();
        for (c, (vm, dm)) in updates.iter().enumerate() {
            self.values[c].merge(vm);
            self.diffs[c].merge(dm);
        }
        if n_new > 0 {
            self.last = Some(frames[(n_new - 1) * frame_len..n_new * frame_len].to_vec());
            self.frames += n_new;
        } else {
            self.last = prev;
        }
    }

    pub fn finish(self) -> Result<NormStats, NormError> {
        if self.frames < 2 {
            return Err(NormError::TooFewSteps(self.frames));
        }
        let mut s = NormStats {
            channels: self.channels.clone(),
            mean: Vec::new(),
            std: Vec::new(),
            diff_mean: Vec::new(),
            diff_std: Vec::new(),
            inv_diff_var: Vec::new(),
            static_channels: Vec::new(),
            static_mean: Vec::new(),
            static_std: Vec::new(),
            edge_scale: None,
        };
        for (c, name) in self.channels.iter().enumerate() {
            let (v, d) = (self.values[c], self.diffs[c]);
            let (var, dvar) = (v.variance(), d.variance());
            if var <= 0.0 {
                return Err(NormError::ConstantChannel {
                    channel: name.clone(),
                    what: "value",
                });
            }
            if dvar <= 0.0 {
                return Err(NormError::ConstantChannel {
                    channel: name.clone(),
                    what: "one-step difference",
                });
            }
            s.mean.push(v.mean);
            s.std.push(var.sqrt());
            s.diff_mean.push(d.mean);
            s.diff_std.push(dvar.sqrt());
            s.inv_diff_var.push(1.0 / dvar);
        }
        Ok(s)
    }
}

/// Fits statistics over every frame of a split view (normally the training
/// split), reading it in windows.
pub fn fit_stats(view: &SplitView) -> Result<NormStats, NormError> {
    const WINDOW: usize = 256;
    let manifest = view.reader().manifest();
    let fields = manifest
        .array(crate::datastore::FIELDS_ARRAY)
        .ok_or_else(|| DatastoreError::Schema("dataset has no fields array".into()))?;
    let n_points = fields.dims[2] * fields.dims[3];
    let mut acc = StatsAccumulator::new(fields.channels.clone(), n_points);
    let r = view.range();
    let mut t = r.start;
    while t < r.end {
        let end = (t + WINDOW).min(r.end);
        acc.update(&view.read_frames(t..end)?);
        t = end;
    }
    let mut stats = acc.finish()?;
    if let Some(st) = manifest.array(crate::datastore::STATIC_ARRAY) {
        let values = view.read_static()?;
        let np = st.dims[2] * st.dims[3];
        for (c, name) in st.channels.iter().enumerate() {
            let m = Moments::of(values[c * np..(c + 1) * np].iter().map(|&v| v as f64));
            if m.variance() <= 0.0 {
                return Err(NormError::ConstantChannel {
                    channel: name.clone(),
                    what: "value",
                });
            }
            stats.static_channels.push(name.clone());
            stats.static_mean.push(m.mean);
            stats.static_std.push(m.variance().sqrt());
        }
    }
    Ok(stats)
}

impl NormStats {
    pub fn index_of(&self, channel: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == channel)
    }

    /// In place (x − mean)/std for a [.., channel, point] block whose channels
    /// are `idx` (indices into this table).
    pub fn normalize_inputs(&self, x: &mut [f32], idx: &[usize], n_points: usize) {
        for (block, c) in x.chunks_exact_mut(n_points).zip(idx.iter().cycle()) {
            let (m, s) = (self.mean[*c], self.std[*c]);
            for v in block {
                *v = ((*v as f64 - m) / s) as f32;
            }
        }
    }

    pub fn unnormalize_inputs(&self, x: &mut [f32], idx: &[usize], n_points: usize) {
        for (block, c) in x.chunks_exact_mut(n_points).zip(idx.iter().cycle()) {
            let (m, s) = (self.mean[*c], self.std[*c]);
            for v in block {
                *v = (*v as f64 * s + m) as f32;
            }
        }
    }

    /// In place ỹ·diff_std + diff_mean.
    pub fn unnormalize_delta(&self, y: &mut [f32], idx: &[usize], n_points: usize) {
        for (block, c) in y.chunks_exact_mut(n_points).zip(idx.iter().cycle()) {
            let (m, s) = (self.diff_mean[*c], self.diff_std[*c]);
            for v in block {
                *v = (*v as f64 * s + m) as f32;
            }
        }
    }

    pub fn normalize_delta(&self, y: &mut [f32], idx: &[usize], n_points: usize) {
        for (block, c) in y.chunks_exact_mut(n_points).zip(idx.iter().cycle()) {
            let (m, s) = (self.diff_mean[*c], self.diff_std[*c]);
            for v in block {
                *v = ((*v as f64 - m) / s) as f32;
            }
        }
    }
}
