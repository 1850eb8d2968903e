use std::ops::Range;
use std::sync::Mutex;

use chrono::{Datelike, Timelike};
use serde::{Deserialize, Serialize};

use super::{ContainerReader, DatastoreError, FIELDS_ARRAY, STATIC_ARRAY};

/// Inclusive range of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub first: i32,
    pub last: i32,
}

impl YearRange {
    pub fn new(first: i32, last: i32) -> Self {
        Self { first, last }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: YearRange,
    pub validation: YearRange,
    pub test: YearRange,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatastoreError> {
        for (name, r) in [("train", self.train), ("validation", self.validation), ("test", self.test)] {
            if r.first > r.last {
                return Err(DatastoreError::Split(format!("{name} range {}..={} is empty", r.first, r.last)));
            }
        }
        if self.train.last >= self.validation.first || self.validation.last >= self.test.first {
            return Err(DatastoreError::Split(format!(
                "ranges overlap or are out of order: train {:?}, validation {:?}, test {:?}",
                self.train, self.validation, self.test
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Time-index window of one split. All reads go through the view, which
/// refuses indices outside its window and records what it served.
#[derive(Debug)]
pub struct SplitView<'a> {
    reader: &'a ContainerReader,
    pub split: Split,
    range: Range<usize>,
    accessed: Mutex<Vec<Range<usize>>>,
}

impl<'a> SplitView<'a> {
    pub fn range(&self) -> Range<usize> {
        self.range.clone()
    }

    pub fn reader(&self) -> &'a ContainerReader {
        self.reader
    }

    /// A sample initialized at `t` (inputs t−1, t) with `horizon` targets
    /// t+1..=t+horizon lies entirely inside the view.
    pub fn is_valid_sample(&self, t: usize, horizon: usize) -> bool {
        t > self.range.start && t >= 1 && t + horizon < self.range.end
    }

    pub fn sample_indices(&self, horizon: usize) -> Vec<usize> {
        self.range.clone().filter(|&t| self.is_valid_sample(t, horizon)).collect()
    }

    /// Valid samples initialized at 00z or 12z.
    pub fn eval_inits(&self, horizon: usize) -> Result<Vec<usize>, DatastoreError> {
        let axis = self
            .reader
            .manifest()
            .time
            .as_ref()
            .ok_or_else(|| DatastoreError::Schema("container has no time axis".into()))?;
        let mut out = Vec::new();
        for t in self.sample_indices(horizon) {
            let time = axis.time_at(t)?;
            if time.minute() == 0 && time.second() == 0 && (time.hour() == 0 || time.hour() == 12) {
                out.push(t);
            }
        }
        Ok(out)
    }

    /// Frames `range` of the gridded fields array, [time, channel, lat, lon].
    pub fn read_frames(&self, range: Range<usize>) -> Result<Vec<f32>, DatastoreError> {
        if range.start < self.range.start || range.end > self.range.end {
            return Err(DatastoreError::Split(format!(
                "{:?} view {:?} cannot serve frames {range:?}",
                self.split, self.range
            )));
        }
        self.accessed.lock().unwrap().push(range.clone());
        self.reader.read_window(FIELDS_ARRAY, range)
    }

    pub fn read_all(&self) -> Result<Vec<f32>, DatastoreError> {
        self.read_frames(self.range())
    }

    pub fn read_static(&self) -> Result<Vec<f32>, DatastoreError> {
        self.reader.read_array(STATIC_ARRAY)
    }

    pub fn accessed(&self) -> Vec<Range<usize>> {
        self.accessed.lock().unwrap().clone()
    }
}

#[derive(Debug)]
pub struct Splits<'a> {
    pub train: SplitView<'a>,
    pub validation: SplitView<'a>,
    pub test: SplitView<'a>,
}

pub fn split<'a>(reader: &'a ContainerReader, spec: &SplitSpec) -> Result<Splits<'a>, DatastoreError> {
    spec.validate()?;
    let view = |split: Split, r: YearRange| year_view(reader, split, r);
    Ok(Splits {
        train: view(Split::Train, spec.train)?,
        validation: view(Split::Validation, spec.validation)?,
        test: view(Split::Test, spec.test)?,
    })
}

/// A single view over the whole years `r`, for tools that operate on one
/// period outside a full train/validation/test split.
pub fn year_view(reader: &ContainerReader, split: Split, r: YearRange) -> Result<SplitView<'_>, DatastoreError> {
    let axis = reader
        .manifest()
        .time
        .clone()
        .ok_or_else(|| DatastoreError::Schema("container has no time axis".into()))?;
    let years: Vec<i32> = (0..axis.count).map(|i| axis.time_at(i).map(|t| t.year())).collect::<Result<_, _>>()?;
    let start = years.iter().position(|&y| y >= r.first).unwrap_or(years.len());
    let end = years.iter().position(|&y| y > r.last).unwrap_or(years.len());
    if start >= end {
        return Err(DatastoreError::Split(format!(
            "{split:?} years {}..={} are outside the time axis",
            r.first, r.last
        )));
    }
    Ok(SplitView {
        reader,
        split,
        range: start..end,
        accessed: Mutex::new(Vec::new()),
    })
}
