use rayon::prelude::*;

use crate::geodesy::GridSpec;
use crate::training::point_weights;

use super::EvalError;

/// Values laid out [init, lead, channel, point].
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastArray {
    pub n_init: usize,
    pub n_lead: usize,
    pub n_channel: usize,
    pub n_point: usize,
    pub data: Vec<f32>,
}

impl ForecastArray {
    pub fn zeros(n_init: usize, n_lead: usize, n_channel: usize, n_point: usize) -> Self {
        Self {
            n_init,
            n_lead,
            n_channel,
            n_point,
            data: vec![0.0; n_init * n_lead * n_channel * n_point],
        }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<f32>) -> Result<Self, EvalError> {
        if dims.iter().product::<usize>() != data.len() {
            return Err(EvalError::Shape(format!("{} values for dims {dims:?}", data.len())));
        }
        let [n_init, n_lead, n_channel, n_point] = dims;
        Ok(Self {
            n_init,
            n_lead,
            n_channel,
            n_point,
            data,
        })
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n_init, self.n_lead, self.n_channel, self.n_point]
    }

    fn offset(&self, init: usize, lead: usize, channel: usize) -> usize {
        ((init * self.n_lead + lead) * self.n_channel + channel) * self.n_point
    }

    pub fn field(&self, init: usize, lead: usize, channel: usize) -> &[f32] {
        let o = self.offset(init, lead, channel);
        &self.data[o..o + self.n_point]
    }

    pub fn field_mut(&mut self, init: usize, lead: usize, channel: usize) -> &mut [f32] {
        let o = self.offset(init, lead, channel);
        &mut self.data[o..o + self.n_point]
    }

    /// All channels of one (init, lead), channel-major.
    pub fn frame_mut(&mut self, init: usize, lead: usize) -> &mut [f32] {
        let o = self.offset(init, lead, 0);
        let n = self.n_channel * self.n_point;
        &mut self.data[o..o + n]
    }
}

/// Per-(channel, lead) values, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub n_channel: usize,
    pub n_lead: usize,
    pub values: Vec<f64>,
}

impl MetricTable {
    pub fn get(&self, channel: usize, lead: usize) -> f64 {
        self.values[channel * self.n_lead + lead]
    }
}

/// Spatial weights of a metric: a_i on included points, 0 elsewhere, with
/// `count` included points and unit mean over them.
#[derive(Debug, Clone, PartialEq)]
pub struct PointWeights {
    pub weights: Vec<f64>,
    pub count: usize,
}

/// Inclusive latitude/longitude box in degrees. `lon_min > lon_max` wraps
/// across the antimeridian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLonBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl LatLonBox {
    pub const GLOBE: LatLonBox = LatLonBox {
        lat_min: -90.0,
        lat_max: 90.0,
        lon_min: -180.0,
        lon_max: 180.0,
    };

    pub fn validate(&self) -> Result<(), EvalError> {
        let lat_ok = -90.0 <= self.lat_min && self.lat_min <= self.lat_max && self.lat_max <= 90.0;
        let lon_ok = (-180.0..=180.0).contains(&self.lon_min) && (-180.0..=180.0).contains(&self.lon_max);
        if !(lat_ok && lon_ok) {
            return Err(EvalError::Region(format!("{self:?} is outside the grid bounds")));
        }
        Ok(())
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        let in_lon = |l: f64| {
            if self.lon_min <= self.lon_max {
                self.lon_min <= l && l <= self.lon_max
            } else {
                l >= self.lon_min || l <= self.lon_max
            }
        };
        let eps = 1e-9;
        let lat_in = lat >= self.lat_min - eps && lat <= self.lat_max + eps;
        let twin = if lon >= 180.0 - eps { lon - 360.0 } else { lon };
        lat_in && (in_lon(lon) || in_lon(twin))
    }
}

impl PointWeights {
    pub fn global(grid: &GridSpec) -> Self {
        Self {
            weights: point_weights(grid),
            count: grid.len(),
        }
    }

    /// Area weights restricted to `region` and renormalized to unit mean
    /// inside it.
    pub fn region(grid: &GridSpec, region: &LatLonBox) -> Result<Self, EvalError> {
        region.validate()?;
        let a = point_weights(grid);
        let inside: Vec<bool> = (0..grid.len())
            .map(|i| {
                let (lat, lon) = grid.lat_lon(i);
                region.contains(lat, lon)
            })
            .collect();
        let count = inside.iter().filter(|&&b| b).count();
        if count == 0 {
            return Err(EvalError::Region(format!("{region:?} contains no grid points")));
        }
        if count == grid.len() {
            return Ok(Self::global(grid));
        }
        let total: f64 = a.iter().zip(&inside).filter(|(_, &b)| b).map(|(w, _)| w).sum();
        let k = count as f64 / total;
        Ok(Self {
            weights: a.iter().zip(&inside).map(|(w, &b)| if b { w * k } else { 0.0 }).collect(),
            count,
        })
    }
}

fn check(f: &ForecastArray, t: &ForecastArray, w: &PointWeights) -> Result<(), EvalError> {
    if f.dims() != t.dims() {
        return Err(EvalError::Shape(format!("forecast {:?} vs truth {:?}", f.dims(), t.dims())));
    }
    if w.weights.len() != f.n_point {
        return Err(EvalError::Shape(format!("{} weights for {} points", w.weights.len(), f.n_point)));
    }
    if f.n_init == 0 {
        return Err(EvalError::NoInits);
    }
    Ok(())
}

fn per_cell<F>(f: &ForecastArray, cell: F) -> Result<MetricTable, EvalError>
where
    F: Fn(usize, usize) -> Result<f64, EvalError> + Sync,
{
    let values = (0..f.n_channel * f.n_lead)
        .into_par_iter()
        .map(|k| cell(k / f.n_lead, k % f.n_lead))
        .collect::<Result<Vec<f64>, EvalError>>()?;
    Ok(MetricTable {
        n_channel: f.n_channel,
        n_lead: f.n_lead,
        values,
    })
}

/// Latitude-weighted RMSE: the weighted spatial root mean square per init,
/// then the mean over inits.
pub fn rmse(forecast: &ForecastArray, truth: &ForecastArray, w: &PointWeights) -> Result<MetricTable, EvalError> {
    check(forecast, truth, w)?;
    per_cell(forecast, |j, tau| {
        let mut total = 0.0;
        for d in 0..forecast.n_init {
            let (x, y) = (forecast.field(d, tau, j), truth.field(d, tau, j));
            let sse: f64 = w
                .weights
                .iter()
                .zip(x.iter().zip(y))
                .map(|(a, (&p, &q))| {
                    let e = p as f64 - q as f64;
                    a * e * e
                })
                .sum();
            total += (sse / w.count as f64).sqrt();
        }
        Ok(total / forecast.n_init as f64)
    })
}

/// Anomaly correlation against `clim` (climatology at each validity time,
/// same layout as the forecast), averaged over inits.
pub fn acc(
    forecast: &ForecastArray,
    truth: &ForecastArray,
    clim: &ForecastArray,
    w: &PointWeights,
) -> Result<MetricTable, EvalError> {
    check(forecast, truth, w)?;
    if clim.dims() != forecast.dims() {
        return Err(EvalError::Shape(format!("climatology {:?} vs forecast {:?}", clim.dims(), forecast.dims())));
    }
    per_cell(forecast, |j, tau| {
        let mut total = 0.0;
        for d in 0..forecast.n_init {
            let (x, y, c) = (forecast.field(d, tau, j), truth.field(d, tau, j), clim.field(d, tau, j));
            let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
            for i in 0..forecast.n_point {
                let a = w.weights[i];
                let (fa, ta) = (x[i] as f64 - c[i] as f64, y[i] as f64 - c[i] as f64);
                xy += a * fa * ta;
                xx += a * fa * fa;
                yy += a * ta * ta;
            }
            if xx == 0.0 || yy == 0.0 {
                return Err(EvalError::ZeroAnomalyVariance {
                    channel: j,
                    lead: tau,
                    init: d,
                });
            }
            total += (xy / (xx * yy).sqrt()).clamp(-1.0, 1.0);
        }
        Ok(total / forecast.n_init as f64)
    })
}
