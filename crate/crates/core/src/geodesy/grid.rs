use super::vec3::{self, Vec3};
use super::GeodesyError;

/// Equiangular latitude-longitude grid including both poles.
///
/// Latitudes ascend from -90 to +90; longitudes run from `-180 + res` to
/// `+180`. Grid point `i * n_lon + j` sits at `(latitudes[i], longitudes[j])`,
/// matching the C-order `[lat, lon]` layout of stored fields. Every longitude
/// copy of a pole is kept as its own point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub resolution_deg: f64,
    pub n_lat: usize,
    pub n_lon: usize,
    pub latitudes: Vec<f64>,
    pub longitudes: Vec<f64>,
}

impl GridSpec {
    pub fn new(resolution_deg: f64) -> Result<Self, GeodesyError> {
        if !(resolution_deg.is_finite() && resolution_deg > 0.0 && resolution_deg <= 180.0) {
            return Err(GeodesyError::BadResolution(resolution_deg));
        }
        let rows = 180.0 / resolution_deg;
        let n_rows = rows.round();
        if (rows - n_rows).abs() > 1e-9 {
            return Err(GeodesyError::BadResolution(resolution_deg));
        }
        let n_rows = n_rows as usize;
        let n_lat = n_rows + 1;
        let n_lon = 2 * n_rows;
        let latitudes = (0..n_lat)
            .map(|i| -90.0 + 180.0 * i as f64 / n_rows as f64)
            .collect();
        let longitudes = (0..n_lon)
            .map(|j| -180.0 + 360.0 * (j + 1) as f64 / n_lon as f64)
            .collect();
        Ok(Self {
            resolution_deg,
            n_lat,
            n_lon,
            latitudes,
            longitudes,
        })
    }

    /// Number of grid points (`n_lat * n_lon`).
    pub fn len(&self) -> usize {
        self.n_lat * self.n_lon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lat_lon(&self, index: usize) -> (f64, f64) {
        (
            self.latitudes[index / self.n_lon],
            self.longitudes[index % self.n_lon],
        )
    }

    pub fn position(&self, index: usize) -> Vec3 {
        let (lat, lon) = self.lat_lon(index);
        vec3::from_lat_lon_deg(lat, lon)
    }

    pub fn positions(&self) -> Vec<Vec3> {
        (0..self.len()).map(|i| self.position(i)).collect()
    }
}
