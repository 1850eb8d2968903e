use serde::{Deserialize, Serialize};

use super::GraphNetError;
use crate::datastore::{ChannelRole, Manifest};

/// The 37 pressure levels (hPa) of the full-scale layout.
pub const PRESSURE_LEVELS: [u32; 37] = [
    1, 2, 3, 5, 7, 10, 20, 30, 50, 70, 100, 125, 150, 175, 200, 225, 250, 300, 350, 400, 450, 500, 550, 600, 650, 700,
    750, 775, 800, 825, 850, 875, 900, 925, 950, 975, 1000,
];

pub const N_FORCINGS: usize = 5;
pub const N_CONSTANTS: usize = 5;

/// Ordered predicted channels: surface variables, then each atmospheric
/// variable at every level in ascending pressure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLayout {
    pub surface: Vec<String>,
    pub atmospheric: Vec<String>,
    pub levels: Vec<u32>,
    pub n_forcings: usize,
    pub n_constants: usize,
}

impl ChannelLayout {
    pub fn new(surface: &[&str], atmospheric: &[&str], levels: &[u32]) -> Self {
        Self {
            surface: surface.iter().map(|s| s.to_string()).collect(),
            atmospheric: atmospheric.iter().map(|s| s.to_string()).collect(),
            levels: levels.to_vec(),
            n_forcings: N_FORCINGS,
            n_constants: N_CONSTANTS,
        }
    }

    /// Five surface and six atmospheric variables on 37 levels.
    pub fn full() -> Self {
        Self::new(&["2t", "10u", "10v", "msl", "tp"], &["z", "q", "t", "u", "v", "w"], &PRESSURE_LEVELS)
    }

    /// The layout of the synthetic generator.
    pub fn toy(levels: &[u32]) -> Self {
        Self::new(&["2t", "tp"], &["t"], levels)
    }

    pub fn n_surface(&self) -> usize {
        self.surface.len()
    }

    pub fn n_atmo(&self) -> usize {
        self.atmospheric.len()
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn n_predicted(&self) -> usize {
        self.n_surface() + self.n_atmo() * self.n_levels()
    }

    pub fn input_width(&self) -> usize {
        2 * self.n_predicted() + 3 * self.n_forcings + self.n_constants
    }

    /// (variable, level) of every predicted channel in order.
    pub fn channels(&self) -> Vec<(String, Option<u32>)> {
        let mut v: Vec<_> = self.surface.iter().map(|s| (s.clone(), None)).collect();
        for a in &self.atmospheric {
            for &l in &self.levels {
                v.push((a.clone(), Some(l)));
            }
        }
        v
    }

    pub fn channel_names(&self) -> Vec<String> {
        self.channels()
            .into_iter()
            .map(|(v, l)| match l {
                Some(l) => format!("{v}{l}"),
                None => v,
            })
            .collect()
    }

    /// Reads the layout from a dataset manifest and checks that its
    /// predicted channels appear in layout order.
    pub fn from_manifest(m: &Manifest) -> Result<Self, GraphNetError> {
        let predicted = m.channels_with_role(ChannelRole::PredictedInput);
        let mut surface = Vec::new();
        let mut atmospheric: Vec<String> = Vec::new();
        let mut levels: Vec<u32> = Vec::new();
        for c in &predicted {
            match c.level {
                None => surface.push(c.variable.clone()),
                Some(l) => {
                    if !atmospheric.contains(&c.variable) {
                        atmospheric.push(c.variable.clone());
                    }
                    if !levels.contains(&l) {
                        levels.push(l);
                    }
                }
            }
        }
        levels.sort_unstable();
        let layout = Self {
            surface,
            atmospheric,
            levels,
            n_forcings: N_FORCINGS,
            n_constants: N_CONSTANTS,
        };
        let found: Vec<String> = predicted.iter().map(|c| c.name.clone()).collect();
        if found != layout.channel_names() {
            return Err(GraphNetError::Layout(format!(
                "predicted channels {found:?} are not in layout order {:?}",
                layout.channel_names()
            )));
        }
        Ok(layout)
    }
}
