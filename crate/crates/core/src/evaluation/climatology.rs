use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, Utc};

use crate::datastore::{
    calendar_day, ArrayInfo, Container, Manifest, SplitView, YearRange, DIM_ORDER, FIELDS_ARRAY, LEAP_DAY,
};

use super::{EvalError, ForecastArray};

pub const DAYS: usize = 366;
pub const CLIMATOLOGY_ARRAY: &str = "climatology";

/// Per-day-of-year mean of each channel at each grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Climatology {
    pub channels: Vec<String>,
    pub n_point: usize,
    /// Sample count per calendar day (29 February at slot 59).
    pub counts: Vec<u64>,
    /// [day, channel, point].
    pub mean: Vec<f64>,
}

/// Streaming sums for [`Climatology`].
#[derive(Debug, Clone)]
pub struct ClimatologyAccumulator {
    channels: Vec<String>,
    n_point: usize,
    counts: Vec<u64>,
    sums: Vec<f64>,
}

impl ClimatologyAccumulator {
    pub fn new(channels: Vec<String>, n_point: usize) -> Self {
        let n = DAYS * channels.len() * n_point;
        Self {
            counts: vec![0; DAYS],
            sums: vec![0.0; n],
            channels,
            n_point,
        }
    }

    /// Adds one frame holding every channel, channel-major.
    pub fn add(&mut self, doy: usize, frame: &[f32]) {
        let n = self.channels.len() * self.n_point;
        assert_eq!(frame.len(), n);
        self.counts[doy] += 1;
        for (s, &v) in self.sums[doy * n..(doy + 1) * n].iter_mut().zip(frame) {
            *s += v as f64;
        }
    }

    /// Every day of a common year must be covered; the leap day may be
    /// missing and is then reported at lookup.
    pub fn finish(self) -> Result<Climatology, EvalError> {
        if let Some(day) = (0..DAYS).find(|&d| d != LEAP_DAY && self.counts[d] == 0) {
            return Err(EvalError::MissingDay(day));
        }
        let n = self.channels.len() * self.n_point;
        let mut mean = self.sums;
        for (d, &c) in self.counts.iter().enumerate() {
            for v in &mut mean[d * n..(d + 1) * n] {
                *v = if c == 0 { f64::NAN } else { *v / c as f64 };
            }
        }
        Ok(Climatology {
            channels: self.channels,
            n_point: self.n_point,
            counts: self.counts,
            mean,
        })
    }
}

impl Climatology {
    pub fn day(&self, doy: usize) -> Result<&[f64], EvalError> {
        if doy >= DAYS || self.counts[doy] == 0 {
            return Err(EvalError::MissingDay(doy));
        }
        let n = self.channels.len() * self.n_point;
        Ok(&self.mean[doy * n..(doy + 1) * n])
    }

    /// Climatology at each validity time, laid out like a forecast of the
    /// selected channels.
    pub fn at_times(&self, valid: &[Vec<DateTime<Utc>>], channels: &[usize]) -> Result<ForecastArray, EvalError> {
        let n_lead = valid.first().map_or(0, Vec::len);
        let mut out = ForecastArray::zeros(valid.len(), n_lead, channels.len(), self.n_point);
        for (d, times) in valid.iter().enumerate() {
            for (tau, t) in times.iter().enumerate() {
                let day = self.day(calendar_day(*t))?;
                for (k, &c) in channels.iter().enumerate() {
                    let src = &day[c * self.n_point..(c + 1) * self.n_point];
                    for (o, &v) in out.field_mut(d, tau, k).iter_mut().zip(src) {
                        *o = v as f32;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    /// Container on the grid of `data`, whose fields array supplies the
    /// channel metadata.
    pub fn to_container(&self, data: &Manifest) -> Result<Container, EvalError> {
        let fields = data
            .array(FIELDS_ARRAY)
            .ok_or_else(|| EvalError::Format("dataset has no fields array".into()))?;
        let (n_lat, n_lon) = (fields.dims[2], fields.dims[3]);
        let mut m = Manifest::new("climatology");
        m.grid_resolution_deg = data.grid_resolution_deg;
        m.channels = self.channels.iter().filter_map(|c| data.channel(c).cloned()).collect();
        m.dim_order = Some(DIM_ORDER.iter().map(|s| s.to_string()).collect());
        m.arrays.push(ArrayInfo {
            name: CLIMATOLOGY_ARRAY.into(),
            dims: vec![DAYS, self.channels.len(), n_lat, n_lon],
            channels: self.channels.clone(),
        });
        m.attributes.insert("day_counts".into(), serde_json::json!(self.counts));
        let mut arrays = BTreeMap::new();
        arrays.insert(CLIMATOLOGY_ARRAY.to_string(), self.mean.iter().map(|&v| v as f32).collect());
        Ok(Container { manifest: m, arrays })
    }

    pub fn from_container(c: &Container) -> Result<Self, EvalError> {
        let info = c
            .manifest
            .array(CLIMATOLOGY_ARRAY)
            .ok_or_else(|| EvalError::Format("container has no climatology array".into()))?;
        let counts: Vec<u64> = c
            .manifest
            .attributes
            .get("day_counts")
            .and_then(|v| serde_json::from_value(v.clone()).ok())
            .filter(|v: &Vec<u64>| v.len() == DAYS)
            .ok_or_else(|| EvalError::Format("climatology lacks day_counts".into()))?;
        let values = c.array(CLIMATOLOGY_ARRAY).unwrap();
        Ok(Self {
            channels: info.channels.clone(),
            n_point: info.dims[2] * info.dims[3],
            counts,
            mean: values.iter().map(|&v| v as f64).collect(),
        })
    }
}

/// Day-of-year means over the years of `reference`, read in windows from a
/// view that must contain the whole period.
pub fn climatology_fit(view: &SplitView, reference: YearRange) -> Result<Climatology, EvalError> {
    let manifest = view.reader().manifest();
    let axis = manifest
        .time
        .as_ref()
        .ok_or_else(|| EvalError::Format("dataset has no time axis".into()))?;
    let info = manifest
        .array(FIELDS_ARRAY)
        .ok_or_else(|| EvalError::Format("dataset has no fields array".into()))?;
    let range = view.range();
    let first_year = axis.time_at(range.start)?.year();
    let last_year = axis.time_at(range.end - 1)?.year();
    if reference.first < first_year || reference.last > last_year || reference.first > reference.last {
        return Err(EvalError::Reference(format!(
            "reference {}-{} is not inside the {first_year}-{last_year} view",
            reference.first, reference.last
        )));
    }
    let n_point = info.dims[2] * info.dims[3];
    let frame_len = info.channels.len() * n_point;
    let mut acc = ClimatologyAccumulator::new(info.channels.clone(), n_point);
    let mut start = range.start;
    while start < range.end {
        let end = (start + 256).min(range.end);
        let frames = view.read_frames(start..end)?;
        for (k, frame) in frames.chunks_exact(frame_len).enumerate() {
            let t = axis.time_at(start + k)?;
            if (reference.first..=reference.last).contains(&t.year()) {
                acc.add(calendar_day(t), frame);
            }
        }
        start = end;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_years_average() {
        let mut acc = ClimatologyAccumulator::new(vec!["a".into()], 2);
        for d in (0..DAYS).filter(|&d| d != LEAP_DAY) {
            acc.add(d, &[d as f32, 1.0]);
            acc.add(d, &[d as f32 + 2.0, 3.0]);
        }
        let c = acc.finish().unwrap();
        assert_eq!(c.day(10).unwrap(), &[11.0, 2.0]);
        assert_eq!(c.day(365).unwrap(), &[366.0, 2.0]);
        assert!(matches!(c.day(LEAP_DAY), Err(EvalError::MissingDay(LEAP_DAY))));
    }

    #[test]
    fn uncovered_day_is_an_error() {
        let mut acc = ClimatologyAccumulator::new(vec!["a".into()], 1);
        for d in 0..200 {
            acc.add(d, &[0.0]);
        }
        assert!(matches!(acc.finish(), Err(EvalError::MissingDay(200))));
    }
}
