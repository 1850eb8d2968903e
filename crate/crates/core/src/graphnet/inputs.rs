use std::f64::consts::TAU;

use chrono::{DateTime, Utc};

use super::{ChannelLayout, GraphNetError, StatePair};
use crate::datastore::{local_time_fraction, year_fraction, ChannelRole, Manifest, TimeAxis, FIELDS_ARRAY, STATIC_ARRAY};
use crate::diffcore::Tensor;
use crate::geodesy::GridSpec;
use crate::normstats::NormStats;

/// Per-node forcings: normalized radiation, then sin/cos of local time of
/// day and of year progress.
pub fn forcing_features(grid: &GridSpec, radiation_normalized: &[f32], time: DateTime<Utc>) -> Tensor<f32> {
    let yf = TAU * year_fraction(time);
    let (ys, yc) = (yf.sin() as f32, yf.cos() as f32);
    let local: Vec<(f32, f32)> = grid
        .longitudes
        .iter()
        .map(|&lon| {
            let a = TAU * local_time_fraction(time, lon);
            (a.sin() as f32, a.cos() as f32)
        })
        .collect();
    let mut data = Vec::with_capacity(grid.len() * 5);
    for (i, &r) in radiation_normalized.iter().enumerate() {
        let (ls, lc) = local[i % grid.n_lon];
        data.extend_from_slice(&[r, ls, lc, ys, yc]);
    }
    Tensor::from_vec(&[grid.len(), 5], data).unwrap()
}

/// Per-node constants: the two normalized static fields, then cos(lat),
/// sin(lon), cos(lon).
pub fn constant_features(grid: &GridSpec, static_normalized: [&[f32]; 2]) -> Tensor<f32> {
    let mut data = Vec::with_capacity(grid.len() * 5);
    for k in 0..grid.len() {
        let (lat, lon) = grid.lat_lon(k);
        let (lat, lon) = (lat.to_radians(), lon.to_radians());
        data.extend_from_slice(&[
            static_normalized[0][k],
            static_normalized[1][k],
            lat.cos() as f32,
            lon.sin() as f32,
            lon.cos() as f32,
        ]);
    }
    Tensor::from_vec(&[grid.len(), 5], data).unwrap()
}

/// Turns channel-major dataset frames into node-major model inputs.
#[derive(Debug, Clone)]
pub struct InputBuilder {
    pub grid: GridSpec,
    pub layout: ChannelLayout,
    pub time: TimeAxis,
    /// Positions of the predicted channels within a fields frame.
    pub predicted: Vec<usize>,
    radiation: usize,
    radiation_mean: f64,
    radiation_std: f64,
    pub constants: Tensor<f32>,
    n_fields: usize,
}

impl InputBuilder {
    pub fn new(
        manifest: &Manifest,
        static_values: &[f32],
        stats: &NormStats,
        layout: &ChannelLayout,
    ) -> Result<Self, GraphNetError> {
        let res = manifest
            .grid_resolution_deg
            .ok_or_else(|| GraphNetError::Layout("dataset has no grid resolution".into()))?;
        let grid = GridSpec::new(res).map_err(|e| GraphNetError::Layout(e.to_string()))?;
        let fields = manifest
            .array(FIELDS_ARRAY)
            .ok_or_else(|| GraphNetError::Layout("dataset has no fields array".into()))?;
        let pos = |name: &str| {
            fields
                .channels
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| GraphNetError::Layout(format!("dataset lacks channel {name}")))
        };
        let predicted = layout.channel_names().iter().map(|n| pos(n)).collect::<Result<Vec<_>, _>>()?;
        let forcing = manifest.channels_with_role(ChannelRole::InputOnly);
        let [radiation_ch] = forcing.as_slice() else {
            let missing: Vec<&str> = stats
                .channels
                .iter()
                .filter(|c| !fields.channels.contains(c))
                .map(String::as_str)
                .collect();
            return Err(GraphNetError::Layout(format!(
                "expected exactly one input-only radiation channel, found {}{}",
                forcing.len(),
                if missing.is_empty() { String::new() } else { format!(" (dataset lacks {})", missing.join(", ")) }
            )));
        };
        let radiation = pos(&radiation_ch.name)?;
        let si = stats
            .index_of(&radiation_ch.name)
            .ok_or_else(|| GraphNetError::Layout(format!("no statistics for {}", radiation_ch.name)))?;
        let statics = manifest
            .array(STATIC_ARRAY)
            .ok_or_else(|| GraphNetError::Layout("dataset has no static array".into()))?;
        if statics.channels.len() != 2 || stats.static_channels != statics.channels {
            return Err(GraphNetError::Layout(format!(
                "expected two static channels with statistics, found {:?}",
                statics.channels
            )));
        }
        let np = grid.len();
        let norm_static: Vec<Vec<f32>> = (0..2)
            .map(|c| {
                static_values[c * np..(c + 1) * np]
                    .iter()
                    .map(|&v| ((v as f64 - stats.static_mean[c]) / stats.static_std[c]) as f32)
                    .collect()
            })
            .collect();
        let constants = constant_features(&grid, [&norm_static[0], &norm_static[1]]);
        let time = manifest
            .time
            .clone()
            .ok_or_else(|| GraphNetError::Layout("dataset has no time axis".into()))?;
        Ok(Self {
            grid,
            layout: layout.clone(),
            time,
            predicted,
            radiation,
            radiation_mean: stats.mean[si],
            radiation_std: stats.std[si],
            constants,
            n_fields: fields.channels.len(),
        })
    }

    pub fn frame_len(&self) -> usize {
        self.n_fields * self.grid.len()
    }

    /// Predicted channels of one fields frame as an [n_grid, n_predicted] tensor.
    pub fn state(&self, frame: &[f32]) -> Tensor<f32> {
        let np = self.grid.len();
        let p = self.predicted.len();
        let mut data = vec![0f32; np * p];
        for (j, &c) in self.predicted.iter().enumerate() {
            for (k, &v) in frame[c * np..(c + 1) * np].iter().enumerate() {
                data[k * p + j] = v;
            }
        }
        Tensor::from_vec(&[np, p], data).unwrap()
    }

    /// Inverse of [`Self::state`] for the predicted channels only.
    pub fn unstate(&self, state: &Tensor<f32>) -> Vec<f32> {
        let np = self.grid.len();
        let p = self.predicted.len();
        let mut out = vec![0f32; p * np];
        for k in 0..np {
            for j in 0..p {
                out[j * np + k] = state.data()[k * p + j];
            }
        }
        out
    }

    pub fn forcing(&self, frame: &[f32], time: DateTime<Utc>) -> Tensor<f32> {
        let np = self.grid.len();
        let r: Vec<f32> = frame[self.radiation * np..(self.radiation + 1) * np]
            .iter()
            .map(|&v| ((v as f64 - self.radiation_mean) / self.radiation_std) as f32)
            .collect();
        forcing_features(&self.grid, &r, time)
    }

    /// Inputs for a rollout from consecutive frames starting at time index
    /// `first` (the earlier input state); needs `steps + 2` frames.
    pub fn pair(&self, frames: &[f32], first: usize, steps: usize) -> Result<StatePair<f32>, GraphNetError> {
        let fl = self.frame_len();
        if frames.len() < (steps + 2) * fl {
            return Err(GraphNetError::Layout(format!(
                "{} frames supplied, {steps} steps need {}",
                frames.len() / fl,
                steps + 2
            )));
        }
        let frame = |k: usize| &frames[k * fl..(k + 1) * fl];
        let forcings = (0..steps + 2)
            .map(|k| Ok(self.forcing(frame(k), self.time.time_at(first + k)?)))
            .collect::<Result<Vec<_>, GraphNetError>>()?;
        Ok(StatePair {
            x_prev: self.state(frame(0)),
            x_curr: self.state(frame(1)),
            forcings,
            constants: self.constants.clone(),
        })
    }

    /// Target states of the same window: frames 2..steps+2.
    pub fn targets(&self, frames: &[f32], steps: usize) -> Vec<Tensor<f32>> {
        let fl = self.frame_len();
        (2..steps + 2).map(|k| self.state(&frames[k * fl..(k + 1) * fl])).collect()
    }
}
