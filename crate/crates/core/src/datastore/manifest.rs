use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::DatastoreError;

pub const SCHEMA_VERSION: u32 = 1;
pub const DTYPE: &str = "f32le";
pub const DIM_ORDER: [&str; 4] = ["time", "channel", "lat", "lon"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelRole {
    PredictedInput,
    InputOnly,
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelInfo {
    pub name: String,
    pub variable: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    pub role: ChannelRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accumulation_seconds: Option<u64>,
}

impl ChannelInfo {
    pub fn new(variable: &str, level: Option<u32>, role: ChannelRole) -> Self {
        let name = match level {
            Some(l) => format!("{variable}{l}"),
            None => variable.to_string(),
        };
        Self {
            name,
            variable: variable.to_string(),
            level,
            role,
            accumulation_seconds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAxis {
    /// ISO-8601 UTC timestamp of index 0.
    pub start: String,
    pub step_seconds: i64,
    pub count: usize,
}

impl TimeAxis {
    pub fn start_time(&self) -> Result<DateTime<Utc>, DatastoreError> {
        DateTime::parse_from_rfc3339(&self.start)
            .map(|t| t.with_timezone(&Utc))
            .map_err(|e| DatastoreError::Manifest(format!("bad start time {:?}: {e}", self.start)))
    }

    pub fn time_at(&self, index: usize) -> Result<DateTime<Utc>, DatastoreError> {
        Ok(self.start_time()? + Duration::seconds(self.step_seconds * index as i64))
    }

    pub fn validate(&self) -> Result<(), DatastoreError> {
        self.start_time()?;
        if self.step_seconds <= 0 {
            return Err(DatastoreError::NonMonotoneTime(format!("step_seconds = {}", self.step_seconds)));
        }
        Ok(())
    }
}

pub fn format_time(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayInfo {
    pub name: String,
    pub dims: Vec<usize>,
    /// Channel names along axis 1 for gridded arrays; empty otherwise.
    #[serde(default)]
    pub channels: Vec<String>,
}

impl ArrayInfo {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn byte_len(&self) -> u64 {
        4 * self.len() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    /// Container purpose, e.g. "dataset", "forecast", "checkpoint".
    pub kind: String,
    pub dtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_resolution_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_order: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeAxis>,
    #[serde(default)]
    pub channels: Vec<ChannelInfo>,
    pub arrays: Vec<ArrayInfo>,
    #[serde(default)]
    pub attributes: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(kind: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            dtype: DTYPE.to_string(),
            grid_resolution_deg: None,
            dim_order: None,
            time: None,
            channels: Vec::new(),
            arrays: Vec::new(),
            attributes: BTreeMap::new(),
        }
    }

    /// Canonical text form: keys sorted at every level, two-space indent.
    pub fn to_text(&self) -> String {
        let value = serde_json::to_value(self).expect("manifest serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, DatastoreError> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| DatastoreError::Manifest(e.to_string()))?;
        if let Some(v) = raw.get("schema_version").and_then(|v| v.as_u64()) {
            if v != SCHEMA_VERSION as u64 {
                return Err(DatastoreError::UnknownSchema(v as u32));
            }
        }
        let m: Manifest = serde_json::from_value(raw).map_err(|e| DatastoreError::Manifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), DatastoreError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(DatastoreError::UnknownSchema(self.schema_version));
        }
        if self.dtype != DTYPE {
            return Err(DatastoreError::Schema(format!("unsupported dtype {:?}", self.dtype)));
        }
        if let Some(t) = &self.time {
            t.validate()?;
        }
        let gridded = self.dim_order.as_ref().is_some_and(|d| d.iter().map(String::as_str).eq(DIM_ORDER));
        for a in &self.arrays {
            if a.channels.is_empty() {
                continue;
            }
            if !gridded || a.dims.len() != 4 {
                return Err(DatastoreError::Schema(format!("array {} lists channels but is not gridded", a.name)));
            }
            if a.dims[1] != a.channels.len() {
                return Err(DatastoreError::Schema(format!(
                    "array {} declares {} channels but its channel dimension is {}",
                    a.name,
                    a.channels.len(),
                    a.dims[1]
                )));
            }
            for c in &a.channels {
                if self.channel(c).is_none() {
                    return Err(DatastoreError::Schema(format!("array {} names unknown channel {c}", a.name)));
                }
            }
            if let Some(res) = self.grid_resolution_deg {
                let (n_lat, n_lon) = ((180.0 / res).round() as usize + 1, (360.0 / res).round() as usize);
                if a.dims[2] != n_lat || a.dims[3] != n_lon {
                    return Err(DatastoreError::Schema(format!(
                        "array {} spatial dims {:?} do not match a {res} degree grid",
                        a.name,
                        &a.dims[2..]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn array(&self, name: &str) -> Option<&ArrayInfo> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelInfo> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn channels_with_role(&self, role: ChannelRole) -> Vec<&ChannelInfo> {
        self.channels.iter().filter(|c| c.role == role).collect()
    }
}
