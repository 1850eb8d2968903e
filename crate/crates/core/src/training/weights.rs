use crate::geodesy::GridSpec;
use crate::graphnet::ChannelLayout;

/// Per-row cell-area weights normalized to unit mean over all grid points.
/// Interior rows span ±res/2 in latitude; each pole row is a half cell.
pub fn latitude_weights(grid: &GridSpec) -> Vec<f64> {
    let h = (grid.resolution_deg / 2.0).to_radians();
    let raw: Vec<f64> = grid
        .latitudes
        .iter()
        .map(|&lat| {
            if lat.abs() >= 90.0 - 1e-9 {
                1.0 - h.cos()
            } else {
                2.0 * lat.to_radians().cos() * h.sin()
            }
        })
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.iter().map(|w| w / mean).collect()
}

/// Latitude weights expanded to every grid point.
pub fn point_weights(grid: &GridSpec) -> Vec<f64> {
    latitude_weights(grid)
        .iter()
        .flat_map(|&w| std::iter::repeat(w).take(grid.n_lon))
        .collect()
}

/// Pressure-proportional level weights with unit mean over the levels.
pub fn level_weights(levels: &[u32]) -> Vec<f64> {
    let mean = levels.iter().map(|&p| p as f64).sum::<f64>() / levels.len() as f64;
    levels.iter().map(|&p| p as f64 / mean).collect()
}

/// Per-variable loss weight of a surface channel.
pub fn surface_weight(variable: &str) -> f64 {
    if variable == "2t" {
        1.0
    } else {
        0.1
    }
}

/// w_j for every predicted channel. An atmospheric variable's level weights
/// are divided by the level count, so each variable contributes a total
/// weight of 1 across its levels.
pub fn channel_weights(layout: &ChannelLayout) -> Vec<f64> {
    let lw = level_weights(&layout.levels);
    let n = layout.n_levels() as f64;
    let mut w: Vec<f64> = layout.surface.iter().map(|s| surface_weight(s)).collect();
    for _ in &layout.atmospheric {
        w.extend(lw.iter().map(|x| x / n));
    }
    w
}

/// Everything the objective needs besides predictions and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    /// a_ℓ per grid point.
    pub area: Vec<f64>,
    /// w_j per predicted channel.
    pub channel: Vec<f64>,
    /// s_j per predicted channel.
    pub inv_var: Vec<f64>,
}

impl LossWeights {
    pub fn new(grid: &GridSpec, layout: &ChannelLayout, inv_var: Vec<f64>) -> Self {
        Self {
            area: point_weights(grid),
            channel: channel_weights(layout),
            inv_var,
        }
    }

    /// s_j·w_j.
    pub fn combined(&self) -> Vec<f64> {
        self.channel.iter().zip(&self.inv_var).map(|(w, s)| w * s).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_layout_sums_to_7_4() {
        let w = channel_weights(&ChannelLayout::full());
        assert_eq!(w.len(), 227);
        assert!((w.iter().sum::<f64>() - 7.4).abs() < 1e-6);
        let lw = level_weights(&ChannelLayout::full().levels);
        assert!((lw.iter().sum::<f64>() / 37.0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn area_weights() {
        for res in [0.25, 1.0, 5.0, 10.0, 30.0] {
            let g = GridSpec::new(res).unwrap();
            let a = latitude_weights(&g);
            assert!((a.iter().sum::<f64>() / a.len() as f64 - 1.0).abs() < 1e-9);
            let (pole, eq) = (a[0], a[g.n_lat / 2]);
            assert!(pole > 0.0 && a.iter().all(|&w| w >= pole) && a[g.n_lat - 1] == pole);
            assert!(eq >= *a.iter().max_by(|x, y| x.total_cmp(y)).unwrap());
        }
        let g = GridSpec::new(5.0).unwrap();
        let a = latitude_weights(&g);
        let row = |lat: f64| g.latitudes.iter().position(|&l| (l - lat).abs() < 1e-9).unwrap();
        assert!((a[row(0.0)] / a[row(60.0)] - 2.0).abs() < 1e-12);
    }
}
