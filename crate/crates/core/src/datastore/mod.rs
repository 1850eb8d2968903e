//! On-disk container for gridded fields, the synthetic data generator and
//! causal train/validation/test splits.

mod calendar;
mod container;
mod manifest;
mod split;
mod synthetic;

pub use calendar::{calendar_day, day_of_year, local_time_fraction, year_fraction, LEAP_DAY};
pub use container::{write_container, Container, ContainerReader, FIELDS_ARRAY, STATIC_ARRAY};
pub use manifest::{format_time, ArrayInfo, ChannelInfo, ChannelRole, Manifest, TimeAxis, DIM_ORDER, DTYPE, SCHEMA_VERSION};
pub use split::{split, year_view, Split, SplitSpec, SplitView, Splits, YearRange};
pub use synthetic::{generate_synthetic, solar_irradiance, SyntheticConfig};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatastoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("unknown schema version {0}")]
    UnknownSchema(u32),
    #[error("array {array}: expected {expected} bytes, found {found}")]
    ByteLength { array: String, expected: u64, found: u64 },
    #[error("time axis is not monotone increasing: {0}")]
    NonMonotoneTime(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("split error: {0}")]
    Split(String),
}

impl DatastoreError {
    /// Stable short code identifying the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::Manifest(_) => "manifest",
            Self::UnknownSchema(_) => "schema-version",
            Self::ByteLength { .. } => "byte-length",
            Self::NonMonotoneTime(_) => "time-axis",
            Self::Schema(_) => "schema",
            Self::Split(_) => "split",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
