use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use meshcast::datastore::{Manifest, SplitSpec, YearRange};
use meshcast::geodesy::GridSpec;
use meshcast::training::Curriculum;

use crate::failure::Failure;

/// Settings of a training run. Read from a JSON file; command-line flags
/// override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Must match the dataset when given.
    pub grid_resolution_deg: Option<f64>,
    pub refinement: usize,
    pub latent: usize,
    pub processor_layers: usize,
    pub batch_size: usize,
    pub schedule_scale: f64,
    /// Explicit phase lengths; replace the scaled ones.
    pub phase_steps: Option<[usize; 3]>,
    pub seed: u64,
    pub train_years: Option<[i32; 2]>,
    pub validation_years: Option<[i32; 2]>,
    pub test_years: Option<[i32; 2]>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid_resolution_deg: None,
            refinement: 2,
            latent: 32,
            processor_layers: 2,
            batch_size: 4,
            schedule_scale: 1e-3,
            phase_steps: None,
            seed: 0,
            train_years: None,
            validation_years: None,
            test_years: None,
            data: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(Failure::io(path.display()))?;
        serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    pub fn curriculum(&self) -> Curriculum {
        let mut c = Curriculum::scaled(self.schedule_scale);
        if let Some([a, b, d]) = self.phase_steps {
            c.phase1_steps = a;
            c.phase2_steps = b;
            c.phase3_steps = d;
        }
        c
    }

    /// Checks the settings against each other and against the dataset.
    pub fn validate(&self, data: &Manifest) -> Result<(), Failure> {
        let bad = |m: String| Err(Failure::Validation(m));
        let res = data
            .grid_resolution_deg
            .ok_or_else(|| Failure::Validation("dataset has no grid resolution".into()))?;
        GridSpec::new(res)?;
        if let Some(r) = self.grid_resolution_deg {
            if r != res {
                return bad(format!("config grid {r}° does not match dataset grid {res}°"));
            }
        }
        if self.refinement > 7 {
            return bad(format!("refinement {} exceeds 7", self.refinement));
        }
        if self.latent == 0 || self.processor_layers == 0 || self.batch_size == 0 {
            return bad("latent, processor_layers and batch_size must be positive".into());
        }
        if !(self.schedule_scale.is_finite() && self.schedule_scale > 0.0) {
            return bad(format!("schedule_scale {} must be positive", self.schedule_scale));
        }
        if let Some(p) = self.phase_steps {
            if p[0] == 0 || p[1] == 0 {
                return bad("phases 1 and 2 need at least one step".into());
            }
        }
        Ok(())
    }

    /// Year ranges from the config, or the last two years of the data as
    /// validation and test with everything before them for training.
    pub fn split_spec(&self, data: &Manifest) -> Result<SplitSpec, Failure> {
        let range = |v: [i32; 2]| YearRange::new(v[0], v[1]);
        let spec = match (self.train_years, self.validation_years, self.test_years) {
            (Some(a), Some(b), Some(c)) => SplitSpec {
                train: range(a),
                validation: range(b),
                test: range(c),
            },
            (None, None, None) => {
                let axis = data
                    .time
                    .as_ref()
                    .ok_or_else(|| Failure::Validation("dataset has no time axis".into()))?;
                let first = axis.time_at(0)?;
                let last = axis.time_at(axis.count.saturating_sub(1))?;
                use chrono::Datelike;
                let (y0, y1) = (first.year(), last.year());
                if y1 - y0 < 2 {
                    return Err(Failure::Validation(format!(
                        "dataset spans {y0}-{y1}; at least three calendar years are needed for a default split"
                    )));
                }
                SplitSpec {
                    train: YearRange::new(y0, y1 - 2),
                    validation: YearRange::new(y1 - 1, y1 - 1),
                    test: YearRange::new(y1, y1),
                }
            }
            _ => return Err(Failure::Validation("give all three of train/validation/test years or none".into())),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses `A:B` (or a single year `A`) into an inclusive year range.
pub fn parse_years(s: &str) -> Result<YearRange, Failure> {
    let bad = || Failure::Validation(format!("expected YEAR or YEAR:YEAR, got {s:?}"));
    let (a, b) = s.split_once(':').unwrap_or((s, s));
    let (a, b) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a > b {
        return Err(bad());
    }
    Ok(YearRange::new(a, b))
}
